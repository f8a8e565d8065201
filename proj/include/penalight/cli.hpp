/**
 * @file cli.hpp
 * @brief Command implementations behind the penalight executable.
 *
 * Every cmd_* writes its human-readable report to `out`, diagnostics to `err`,
 * and returns one of the exit codes below.
 */
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "penalight/discretize.hpp"

namespace penalight {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitUscFails = 3;

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string problem = "oscillator";
    int n_intervals = 200;
    double rho = 100.0;
    std::optional<std::vector<double>> lambda_sweep;
    double T_init = 3.5;
    /// "paper" or "constant:<u>"
    std::string init_pattern = "paper";
    std::string output_dir; ///< empty means no files
    std::set<std::string> emit = {"trajectory_csv", "adjoint_csv", "report_txt", "report_json"};
    std::uint64_t seed = 1;
    bool json = false; ///< print the JSON report instead of text

    /// Throws ConfigError on the first invalid field.
    void validate() const;
};

/// Overlays keys of a JSON object (snake_case field names) onto cfg.
void apply_config_json(RunConfig &cfg, const nlohmann::json &j);
RunConfig load_config_file(const std::string &path);

/// Shortest decimal string that parses back to the same double.
std::string format_number(double v);

void write_trajectory_csv(const std::string &path, const Trajectory &traj, const ControlGrid &grid);
void write_adjoint_csv(const std::string &path, const AdjointTrajectory &adjoint);

int cmd_solve(const RunConfig &cfg, std::ostream &out, std::ostream &err);
int cmd_check_usc(const RunConfig &cfg, std::ostream &out, std::ostream &err);
int cmd_check_transversality(const RunConfig &cfg, std::ostream &out, std::ostream &err);
int cmd_bench(const RunConfig &cfg, std::ostream &out, std::ostream &err);
int cmd_sweep(const RunConfig &cfg, std::ostream &out, std::ostream &err);

/// Parses argv (flags override the --config file, PENALIGHT_SEED overrides the seed) and dispatches.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace penalight
