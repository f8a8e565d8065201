#include "penalight/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace penalight {

namespace {

Mat generator_matrix(const std::vector<Vec> &gens) {
    const auto n = gens.front().size();
    Mat G(n, static_cast<Eigen::Index>(gens.size()));
    for (std::size_t i = 0; i < gens.size(); ++i) {
        if (gens[i].size() != n) {
            throw std::invalid_argument("hull generators have inconsistent dimensions");
        }
        G.col(static_cast<Eigen::Index>(i)) = gens[i];
    }
    return G;
}

// Affine minimizer of |G_S alpha| subject to sum alpha = 1.
Vec affine_minimizer(const Mat &GS) {
    const auto k = GS.cols();
    Mat kkt = Mat::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = GS.transpose() * GS;
    kkt.block(0, k, k, 1).setOnes();
    kkt.block(k, 0, 1, k).setOnes();
    Vec rhs = Vec::Zero(k + 1);
    rhs(k) = 1.0;
    const Vec sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    return sol.head(k);
}

MinNormResult assemble(const Mat &G, const std::vector<int> &corral, const Vec &lam,
                       int iterations) {
    MinNormResult r;
    r.weights = Vec::Zero(G.cols());
    for (std::size_t i = 0; i < corral.size(); ++i) {
        r.weights(corral[i]) = lam(static_cast<Eigen::Index>(i));
    }
    r.weights /= r.weights.sum();
    r.point = G * r.weights;
    r.distance = r.point.norm();
    r.iterations = iterations;
    return r;
}

} // namespace

MinNormResult min_norm_point(const Hull &hull, const MinNormOptions &opts) {
    if (hull.generators.empty()) {
        throw std::invalid_argument("min_norm_point needs a nonempty hull");
    }
    const Mat G = generator_matrix(hull.generators);
    if (!G.allFinite()) {
        throw std::invalid_argument("hull generators must be finite");
    }

    Eigen::Index start = 0;
    G.colwise().squaredNorm().minCoeff(&start);
    std::vector<int> corral = {static_cast<int>(start)};
    Vec lam = Vec::Ones(1);
    Vec x = G.col(start);

    for (int major = 0; major < opts.max_major_cycles; ++major) {
        const double xx = x.squaredNorm();
        const Vec inner = G.transpose() * x;
        Eigen::Index entering = 0;
        inner.minCoeff(&entering); // first minimum on ties
        if (xx - inner(entering) <= opts.gap_tol * (1.0 + xx)) {
            return assemble(G, corral, lam, major);
        }
        if (std::find(corral.begin(), corral.end(), entering) != corral.end()) {
            // Already in the corral: no further progress is representable.
            return assemble(G, corral, lam, major);
        }
        corral.push_back(static_cast<int>(entering));
        lam.conservativeResize(lam.size() + 1);
        lam(lam.size() - 1) = 0.0;

        // Minor cycles: move toward the affine minimizer until it is interior.
        while (true) {
            Mat GS(G.rows(), static_cast<Eigen::Index>(corral.size()));
            for (std::size_t i = 0; i < corral.size(); ++i) {
                GS.col(static_cast<Eigen::Index>(i)) = G.col(corral[i]);
            }
            const Vec alpha = affine_minimizer(GS);
            if ((alpha.array() > 0.0).all()) {
                lam = alpha;
                x = GS * lam;
                break;
            }
            double theta = 1.0;
            for (Eigen::Index i = 0; i < alpha.size(); ++i) {
                if (alpha(i) <= 0.0) {
                    const double denom = lam(i) - alpha(i);
                    if (denom > 0.0) {
                        theta = std::min(theta, lam(i) / denom);
                    }
                }
            }
            lam = theta * alpha + (1.0 - theta) * lam;
            std::vector<int> kept;
            std::vector<double> kept_lam;
            for (Eigen::Index i = 0; i < lam.size(); ++i) {
                if (lam(i) > 1e-15) {
                    kept.push_back(corral[static_cast<std::size_t>(i)]);
                    kept_lam.push_back(lam(i));
                }
            }
            if (kept.empty()) {
                // Degenerate step; keep the entering generator alone.
                kept = {corral.back()};
                kept_lam = {1.0};
            }
            corral = kept;
            lam = Eigen::Map<Vec>(kept_lam.data(), static_cast<Eigen::Index>(kept_lam.size()));
            lam /= lam.sum();
            GS.resize(G.rows(), static_cast<Eigen::Index>(corral.size()));
            for (std::size_t i = 0; i < corral.size(); ++i) {
                GS.col(static_cast<Eigen::Index>(i)) = G.col(corral[i]);
            }
            x = GS * lam;
            if (corral.size() == 1) {
                break;
            }
        }
    }
    throw NonConvergenceError("Wolfe min-norm point did not converge within " +
                                  std::to_string(opts.max_major_cycles) + " major cycles",
                              assemble(G, corral, lam, opts.max_major_cycles));
}

// ============================================================================
// Gordan / LICQ / MFCQ
// ============================================================================

bool GordanCertificate::validates(const std::vector<Vec> &vectors, double tol) const {
    if (vectors.empty()) {
        return false;
    }
    if (branch == Branch::Direction) {
        if (direction.size() == 0 || direction.norm() == 0.0) {
            return false;
        }
        return std::all_of(vectors.begin(), vectors.end(),
                           [&](const Vec &a) { return a.dot(direction) < 0.0; });
    }
    if (weights.size() != static_cast<Eigen::Index>(vectors.size())) {
        return false;
    }
    if ((weights.array() < 0.0).any() || !(weights.sum() > 0.0)) {
        return false;
    }
    Vec combo = Vec::Zero(vectors.front().size());
    double scale = 1.0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        combo += weights(static_cast<Eigen::Index>(i)) * vectors[i];
        scale = std::max(scale, vectors[i].norm());
    }
    return combo.norm() <= tol * scale;
}

GordanCertificate gordan_certificate(const std::vector<Vec> &vectors, double gordan_tol) {
    if (vectors.empty()) {
        throw std::invalid_argument("gordan_certificate needs at least one vector");
    }
    const MinNormResult mn = min_norm_point(Hull{vectors});
    if (mn.distance >= gordan_tol / 10.0 && mn.distance <= gordan_tol) {
        throw BorderlineError("hull distance " + std::to_string(mn.distance) +
                              " lies in the borderline band; refusing to certify");
    }
    GordanCertificate cert;
    cert.distance = mn.distance;
    if (mn.distance > gordan_tol) {
        cert.branch = GordanCertificate::Branch::Direction;
        cert.direction = -mn.point / mn.distance;
    } else {
        cert.branch = GordanCertificate::Branch::Weights;
        cert.weights = mn.weights;
    }
    return cert;
}

LicqResult check_licq(const std::vector<Vec> &eq_grads) {
    LicqResult r;
    if (eq_grads.empty()) {
        return r;
    }
    const Mat A = generator_matrix(eq_grads);
    Eigen::ColPivHouseholderQR<Mat> qr(A);
    qr.setThreshold(1e-10);
    r.rank = static_cast<int>(qr.rank());
    r.holds = r.rank == static_cast<int>(eq_grads.size());
    return r;
}

MfcqResult check_mfcq(const std::vector<Vec> &ineq_grads, double gordan_tol) {
    MfcqResult r;
    if (ineq_grads.empty()) {
        return r;
    }
    const GordanCertificate cert = gordan_certificate(ineq_grads, gordan_tol);
    r.holds = cert.branch == GordanCertificate::Branch::Direction;
    if (r.holds) {
        r.witness = cert.direction;
    }
    return r;
}

MfcqResult check_mixed_cq(const std::vector<Vec> &eq_grads, const std::vector<Vec> &ineq_grads,
                          double gordan_tol) {
    MfcqResult r;
    if (!check_licq(eq_grads).holds) {
        r.holds = false;
        return r;
    }
    if (ineq_grads.empty()) {
        return r;
    }
    const auto n = ineq_grads.front().size();
    Mat P = Mat::Identity(n, n);
    if (!eq_grads.empty()) {
        const Mat A = generator_matrix(eq_grads);
        const Mat Q = Eigen::HouseholderQR<Mat>(A).householderQ() * Mat::Identity(n, A.cols());
        P -= Q * Q.transpose();
    }
    std::vector<Vec> projected;
    projected.reserve(ineq_grads.size());
    for (const Vec &g : ineq_grads) {
        projected.push_back(P * g);
    }
    return check_mfcq(projected, gordan_tol);
}

// ============================================================================
// USC
// ============================================================================

std::string to_string(UscVerdict v) { return v == UscVerdict::Holds ? "HOLDS" : "FAILS"; }

std::string to_string(ClassicalCq c) {
    return c == ClassicalCq::Applicable ? "APPLICABLE" : "NONSMOOTH_NOT_APPLICABLE_CLASSICALLY";
}

namespace {

bool any_nonsmooth_active(const ProblemSpec &spec, const std::vector<int> &eq,
                          const std::vector<int> &ineq) {
    for (int k : eq) {
        if (!spec.eq_constraints[k].smooth) {
            return true;
        }
    }
    for (int j : ineq) {
        if (!spec.ineq_constraints[j].smooth) {
            return true;
        }
    }
    return false;
}

} // namespace

UscReport usc_verdict(const ProblemSpec &spec, const std::vector<Endpoint> &probes,
                      const UscOptions &opts) {
    UscReport rep;
    double best = std::numeric_limits<double>::infinity();
    bool nonsmooth = false;
    bool licq_all = true;
    int licq_rank = spec.state_dim + 1;
    bool mfcq_all = true;
    bool mixed_all = true;
    std::optional<Vec> mfcq_witness;
    std::optional<Vec> mixed_witness;
    bool zero_note = false;

    for (const auto &probe : probes) {
        const TerminalPenalty pt = phi_term(spec, probe.x_T, probe.T, opts.tol_active);
        std::vector<int> all_eq(spec.eq_constraints.size());
        for (std::size_t k = 0; k < all_eq.size(); ++k) {
            all_eq[k] = static_cast<int>(k);
        }
        if (pt.value > opts.tol_active) {
            ++rep.infeasible_probes;
            nonsmooth = nonsmooth || any_nonsmooth_active(spec, pt.active_eq, pt.active_ineq);
            const Hull hull = phi_term_subdifferential(spec, probe.x_T, probe.T, opts.tol_active);
            const double d = min_norm_point(hull).distance;
            if (d < best) {
                best = d;
                rep.active_eq = pt.active_eq;
                rep.active_ineq = pt.active_ineq;
            }
            continue;
        }

        // Feasible probe: classical qualifications on the active constraints.
        ++rep.feasible_probes;
        std::vector<int> act_ineq;
        for (std::size_t j = 0; j < spec.ineq_constraints.size(); ++j) {
            if (spec.ineq_constraints[j].value(probe.x_T, probe.T) >= -opts.tol_active) {
                act_ineq.push_back(static_cast<int>(j));
            }
        }
        if (any_nonsmooth_active(spec, all_eq, act_ineq)) {
            nonsmooth = true;
            continue;
        }
        std::vector<Vec> eq_grads;
        for (const auto &c : spec.eq_constraints) {
            eq_grads.push_back(c.grad_x(probe.x_T, probe.T));
        }
        std::vector<Vec> ineq_grads;
        for (int j : act_ineq) {
            ineq_grads.push_back(spec.ineq_constraints[j].grad_x(probe.x_T, probe.T));
        }
        const LicqResult licq = check_licq(eq_grads);
        licq_all = licq_all && licq.holds;
        licq_rank = std::min(licq_rank, licq.rank);
        try {
            const MfcqResult mf = check_mfcq(ineq_grads, opts.gordan_tol);
            mfcq_all = mfcq_all && mf.holds;
            if (mf.witness && !mfcq_witness) {
                mfcq_witness = mf.witness;
            }
            const MfcqResult mixed = check_mixed_cq(eq_grads, ineq_grads, opts.gordan_tol);
            mixed_all = mixed_all && mixed.holds;
            if (mixed.witness && !mixed_witness) {
                mixed_witness = mixed.witness;
            }
        } catch (const BorderlineError &) {
            rep.notes.push_back("borderline MFCQ decision at a feasible probe");
            mfcq_all = false;
            mixed_all = false;
        }
        if (spec.eq_constraints.empty() && !act_ineq.empty() && !zero_note) {
            const Hull hull = phi_term_subdifferential(spec, probe.x_T, probe.T, opts.tol_active);
            if (!hull.generators.empty() && min_norm_point(hull).distance > opts.gordan_tol) {
                rep.notes.push_back("feasible-point hull lists only active inequality gradients and "
                                    "excludes 0, although 0 belongs to the subdifferential of the "
                                    "clamped max at such points");
                zero_note = true;
            }
        }
    }

    if (rep.infeasible_probes == 0) {
        throw InsufficientProbesError("no probe has phi_term > tol_active; sample infeasible points");
    }
    rep.distance = best;
    rep.verdict = best > opts.usc_tol ? UscVerdict::Holds : UscVerdict::Fails;
    rep.classical = nonsmooth ? ClassicalCq::NonsmoothNotApplicableClassically
                              : ClassicalCq::Applicable;
    if (!nonsmooth && rep.feasible_probes > 0) {
        rep.licq = LicqResult{licq_all, licq_rank};
        rep.mfcq = MfcqResult{mfcq_all, mfcq_all ? mfcq_witness : std::nullopt};
        rep.mixed = MfcqResult{mixed_all, mixed_all ? mixed_witness : std::nullopt};
    }
    if (nonsmooth) {
        rep.notes.push_back("an active constraint is nonsmooth: classical LICQ/MFCQ are not defined; "
                            "distance computed from one-sided gradients");
    }
    rep.notes.push_back("certified on " + std::to_string(probes.size()) +
                        " sampled probes only, not on a continuum neighbourhood");
    return rep;
}

std::vector<Endpoint> sample_probes(const std::vector<Endpoint> &centers, double t0,
                                    const ProbeSampler &sampler) {
    std::mt19937 rng(sampler.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Endpoint> out;
    for (const auto &c : centers) {
        out.push_back(c);
        for (double radius : sampler.radii) {
            for (int s = 0; s < sampler.samples_per_radius; ++s) {
                Endpoint p = c;
                for (int i = 0; i < p.x_T.size(); ++i) {
                    p.x_T(i) += radius * gauss(rng);
                }
                p.T = std::max(t0 + 1e-6, p.T + radius * gauss(rng));
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

} // namespace penalight
