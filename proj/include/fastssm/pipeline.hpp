#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fastssm/embed.hpp"
#include "fastssm/predict.hpp"

namespace fastssm {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kArchiveVersion = 1;

struct CalibrationPoint {
    double omega = 0.0;  // rad/s
    double u = 0.0;      // observable amplitude
};

/// Settings of one run. Text form: one `key = value` per line, `#` starts a comment.
struct RunConfig {
    int d = 2;
    int m = 3;
    int r = 3;
    int n = 3;
    int p = 1;
    std::optional<int> k;  // empty: suggest_timelag on the highest estimated frequency
    TransientPolicy transient;
    double tol_res = 0.05;
    bool full_complex_resonance = false;
    int test_trajectories = 0;  // the last files are held out for testing
    AmplitudeFunctional alpha;
    InverseStrategy inverse = InverseStrategy::Newton;
    bool feature_scaling = false;
    std::uint64_t seed = 0;
    double backbone_rho_max = 1.0;
    int backbone_points = 101;
    double frc_omega_min = -std::numeric_limits<double>::infinity();
    double frc_omega_max = std::numeric_limits<double>::infinity();
    double frc_rho_max = 2.0;
    int frc_n_rho = 201;
    std::optional<double> frc_f;  // forcing amplitude; otherwise calibrated from `calibration`
    std::vector<CalibrationPoint> calibration;
};

/// Parses the key-value text. Unknown keys and malformed values raise ConfigError citing the line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Canonical text (every key, fixed order, round-trip precision); parse_config(to_text(c)) == c.
std::string to_text(const RunConfig& config);
/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& config);
/// Throws ConfigError on invalid values; returns warnings for questionable ones.
Warnings validate(const RunConfig& config);

/// CSV: header row, column 1 `t` (seconds), then one column per observable. Lines starting
/// with '#' are skipped, except `# boundary`, which starts a new trajectory in the same file.
TrajectorySet read_trajectory_csv(const std::string& path);
TrajectorySet load_trajectories(const std::vector<std::string>& paths);
void write_trajectory_csv(const std::string& path, const Trajectory& traj, const std::vector<std::string>& comments = {});

struct FitReport {
    int k = 1;
    std::vector<Eigen::Index> transient_start;  // per trajectory
    Eigen::VectorXd singular_values;
    double energy = 0.0;
    double reconstruction_error = 0.0;
    double principal_angle = 0.0;
    double dynamics_residual = 0.0;
    double eigenvector_condition = 0.0;
    double conjugacy_residual = 0.0;
    std::vector<ResonantTerm> resonances;
    std::vector<std::vector<int>> resonance_phases;
    std::vector<double> training_nmte;
    std::vector<double> test_nmte;
    Warnings warnings;

    std::string to_text() const;
};

struct FitOutput {
    FullModel model;
    FitReport report;
};

/// Full chain on `data`; the last config.test_trajectories entries are only used for test NMTE.
/// Module errors are rethrown with the pipeline stage prepended.
FitOutput fit(const RunConfig& config, const TrajectorySet& data);

/// Embedded held-out data: trim with the config policy and delay-embed with the model's embedding.
Trajectory prepare_trajectory(const FullModel& model, const RunConfig& config, const Trajectory& traj);

struct Provenance {
    std::string config_hash;
    std::string tool_version = kVersion;
    std::string timestamp;  // SOURCE_DATE_EPOCH if set, otherwise "unset"
};

Provenance make_provenance(const RunConfig& config);

/// JSON text with hex-float numbers; load(save(m)) reproduces every coefficient bit-exactly.
std::string save_archive(const FullModel& model, const Provenance& provenance);
FullModel load_archive(const std::string& text, Provenance* provenance = nullptr);
void save_archive_file(const std::string& path, const FullModel& model, const Provenance& provenance);
FullModel load_archive_file(const std::string& path, Provenance* provenance = nullptr);

std::string backbone_csv(const Backbone& curve, const std::string& config_hash);
std::string frc_csv(const Frc& curve, const std::string& config_hash);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace fastssm
