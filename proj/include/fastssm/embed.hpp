#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastssm/error.hpp"

namespace fastssm {

/// Uniformly sampled multichannel time series: one column per sample time.
struct Trajectory {
    Eigen::VectorXd times;    // strictly increasing, seconds
    Eigen::MatrixXd samples;  // n_obs x N

    Eigen::Index n_obs() const { return samples.rows(); }
    Eigen::Index length() const { return samples.cols(); }
    double dt() const { return times.size() > 1 ? times(1) - times(0) : 0.0; }
};

using TrajectorySet = std::vector<Trajectory>;

/// Throws DataError if `traj` is not uniformly sampled (tolerance 1e-9 * dt) or
/// has fewer than two samples. `label` prefixes the message (typically a file name).
void validate_trajectory(const Trajectory& traj, const std::string& label = "trajectory");

struct EmbeddingConfig {
    int p = 1;         // number of delayed copies
    int k = 1;         // timelag multiplier
    double dt = 0.0;   // sampling time (s)

    double tau() const { return k * dt; }
};

/// Delay-embedded snapshot matrix. Rows are observable-major: rows
/// [c*p, (c+1)*p) hold the p delayed copies of observable channel c.
struct SnapshotMatrix {
    Eigen::MatrixXd data;
    EmbeddingConfig config;
    Eigen::VectorXd times;  // time of the first (undelayed) row of each column
    int n_obs = 1;

    Eigen::Index rows() const { return data.rows(); }
    Eigen::Index cols() const { return data.cols(); }
};

/// Minimum series length that delay_embed accepts for (p, k).
Eigen::Index min_embedding_length(int p, int k);

SnapshotMatrix delay_embed(const Trajectory& traj, const EmbeddingConfig& config);

/// Leading row block (the undelayed copy) of each channel, i.e. the inverse of
/// delay_embed on the samples it retains.
Eigen::MatrixXd undelayed_rows(const Eigen::MatrixXd& embedded, int n_obs, int p);

/// Timelag k such that omega2 * k * dt is close to pi/2; at least 1.
int suggest_timelag(double omega2, double dt);

/// Embedding matrix of unit harmonics: columns (cos(j w tau), sin(j w tau))_j per frequency,
/// j = 0..p-1. Its conditioning measures how distinguishable the modal planes are.
Eigen::MatrixXd harmonic_embedding_matrix(const std::vector<double>& omegas, double tau, int p);

/// Dominant angular frequencies (rad/s) of the summed channel power spectrum,
/// ascending. Hann window, mean removed, parabolic peak interpolation.
std::vector<double> estimate_frequencies(const Trajectory& traj, int n_peaks);

struct TransientPolicy {
    enum class Kind { None, Index, Time, Auto };
    Kind kind = Kind::None;
    Eigen::Index index = 0;         // Kind::Index
    double time = 0.0;              // Kind::Time
    int n_modes = 1;                // Kind::Auto: number of retained spectral peaks (d/2)
    double energy_fraction = 0.05;  // Kind::Auto: out-of-band amplitude fraction threshold

    static TransientPolicy none() { return {}; }
    static TransientPolicy at_index(Eigen::Index i) {
        TransientPolicy p;
        p.kind = Kind::Index;
        p.index = i;
        return p;
    }
    static TransientPolicy at_time(double t) {
        TransientPolicy p;
        p.kind = Kind::Time;
        p.time = t;
        return p;
    }
    static TransientPolicy automatic(int n_modes, double fraction = 0.05) {
        TransientPolicy p;
        p.kind = Kind::Auto;
        p.n_modes = n_modes;
        p.energy_fraction = fraction;
        return p;
    }
};

struct TrimResult {
    Trajectory trajectory;
    Eigen::Index start = 0;  // index of the first retained sample in the input
    Warnings warnings;
};

TrimResult trim_transient(const Trajectory& traj, const TransientPolicy& policy);

}  // namespace fastssm
