/**
 * @file regularity.hpp
 * @brief Separation-condition checks for the terminal penalty: minimum-norm
 *        points of convex hulls, Gordan alternatives, LICQ and MFCQ.
 *
 * The separation distance a is dist(0, d phi_term) minimized over sampled
 * infeasible endpoints. The condition holds when a > usc_tol.
 */
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "penalight/penalty.hpp"

namespace penalight {

inline constexpr double kUscTol = 1e-6;
inline constexpr double kGordanTol = 1e-9;

struct MinNormResult {
    Vec point;
    Vec weights; ///< one per generator, convex
    double distance = 0.0;
    int iterations = 0;
};

/// Wolfe's method hit its major-cycle cap; best() holds the incumbent.
class NonConvergenceError : public std::runtime_error {
  public:
    NonConvergenceError(const std::string &what, MinNormResult best)
        : std::runtime_error(what), best_(std::move(best)) {}
    [[nodiscard]] const MinNormResult &best() const { return best_; }

  private:
    MinNormResult best_;
};

/// The hull distance is too close to gordan_tol to certify either alternative.
class BorderlineError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InsufficientProbesError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct MinNormOptions {
    int max_major_cycles = 10000;
    double gap_tol = 1e-12;
};

/**
 * Minimum-norm point of co(generators) by Wolfe's algorithm.
 *
 * The entering generator is the one with the smallest inner product with the
 * current point (lowest index on ties). Stops when
 * <p, p - g_i> <= gap_tol * (1 + |p|^2) for every generator.
 */
MinNormResult min_norm_point(const Hull &hull, const MinNormOptions &opts = {});

struct GordanCertificate {
    enum class Branch { Direction, Weights };
    Branch branch = Branch::Direction;
    Vec direction; ///< <a_i, d> < 0 for all i (Direction branch)
    Vec weights;   ///< lambda >= 0, sum 1, sum lambda_i a_i = 0 (Weights branch)
    double distance = 0.0;

    /// Re-checks the populated branch against the input vectors.
    [[nodiscard]] bool validates(const std::vector<Vec> &vectors, double tol = 1e-10) const;
};

GordanCertificate gordan_certificate(const std::vector<Vec> &vectors,
                                     double gordan_tol = kGordanTol);

struct LicqResult {
    bool holds = true;
    int rank = 0;
};

/// Rank by column-pivoted QR with threshold 1e-10 relative to the largest column.
LicqResult check_licq(const std::vector<Vec> &eq_grads);

struct MfcqResult {
    bool holds = true;
    std::optional<Vec> witness;
};

/// MFCQ over active inequality gradients: 0 not in their convex hull.
MfcqResult check_mfcq(const std::vector<Vec> &ineq_grads, double gordan_tol = kGordanTol);

/**
 * Mixed equality/inequality qualification: LICQ on the equalities and a
 * direction d orthogonal to them with <grad_j, d> < 0 on the active inequalities.
 */
MfcqResult check_mixed_cq(const std::vector<Vec> &eq_grads, const std::vector<Vec> &ineq_grads,
                          double gordan_tol = kGordanTol);

enum class UscVerdict { Holds, Fails };
enum class ClassicalCq { Applicable, NonsmoothNotApplicableClassically };

std::string to_string(UscVerdict v);
std::string to_string(ClassicalCq c);

struct Endpoint {
    Vec x_T;
    double T = 0.0;
};

struct UscReport {
    double distance = 0.0; ///< the constant a
    UscVerdict verdict = UscVerdict::Fails;
    ClassicalCq classical = ClassicalCq::Applicable;
    std::optional<LicqResult> licq;
    std::optional<MfcqResult> mfcq;
    std::optional<MfcqResult> mixed;
    std::vector<int> active_eq;   ///< at the probe attaining the minimum
    std::vector<int> active_ineq; ///< at the probe attaining the minimum
    int infeasible_probes = 0;
    int feasible_probes = 0;
    std::vector<std::string> notes;
};

struct UscOptions {
    double tol_active = kDefaultTolActive;
    double usc_tol = kUscTol;
    double gordan_tol = kGordanTol;
};

UscReport usc_verdict(const ProblemSpec &spec, const std::vector<Endpoint> &probes,
                      const UscOptions &opts = {});

struct ProbeSampler {
    std::vector<double> radii = {1e-3, 1e-2, 1e-1};
    int samples_per_radius = 20;
    unsigned seed = 2024;
};

/// Each center itself plus Gaussian perturbations of (x_T, T) at every radius.
std::vector<Endpoint> sample_probes(const std::vector<Endpoint> &centers, double t0,
                                    const ProbeSampler &sampler = {});

} // namespace penalight
