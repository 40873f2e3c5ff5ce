#include "fastssm/embed.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/FFT>

namespace fastssm {

void validate_trajectory(const Trajectory& traj, const std::string& label) {
    if (traj.times.size() != traj.samples.cols()) {
        std::ostringstream msg;
        msg << label << ": " << traj.times.size() << " time stamps for " << traj.samples.cols() << " samples";
        throw ShapeError(msg.str());
    }
    if (traj.samples.cols() == 0) throw DataError(label + ": no samples");
    if (traj.samples.cols() < 2) throw DataError(label + ": at least two samples are required");
    const double dt = traj.times(1) - traj.times(0);
    if (!(dt > 0.0)) {
        std::ostringstream msg;
        msg << label << ": times must be strictly increasing (row 2)";
        throw DataError(msg.str());
    }
    for (Eigen::Index j = 1; j < traj.times.size(); ++j) {
        const double gap = traj.times(j) - traj.times(j - 1);
        if (std::abs(gap - dt) > 1e-9 * dt) {
            std::ostringstream msg;
            msg.precision(12);
            // rows are 1-based data rows (header excluded)
            msg << label << ": non-uniform sampling at row " << j + 1 << " (gap " << gap << " s, expected " << dt
                << " s)";
            throw DataError(msg.str());
        }
    }
    if (!traj.samples.allFinite()) throw DataError(label + ": samples contain non-finite values");
}

Eigen::Index min_embedding_length(int p, int k) {
    return static_cast<Eigen::Index>(p - 1) * k + 2;
}

SnapshotMatrix delay_embed(const Trajectory& traj, const EmbeddingConfig& config) {
    if (config.p < 1 || config.k < 1) throw ConfigError("delay_embed: p and k must be >= 1");
    const Eigen::Index n = traj.length();
    const Eigen::Index need = min_embedding_length(config.p, config.k);
    if (n < need) {
        std::ostringstream msg;
        msg << "delay_embed: series of length " << n << " is too short for p=" << config.p << ", k=" << config.k
            << " (need at least " << need << " samples)";
        throw DataError(msg.str());
    }
    const Eigen::Index shift = static_cast<Eigen::Index>(config.p - 1) * config.k;
    const Eigen::Index cols = n - shift;
    const Eigen::Index nobs = traj.n_obs();
    SnapshotMatrix out;
    out.config = config;
    if (config.dt <= 0.0) out.config.dt = traj.dt();
    out.n_obs = static_cast<int>(nobs);
    out.data.resize(nobs * config.p, cols);
    for (Eigen::Index c = 0; c < nobs; ++c) {
        for (int j = 0; j < config.p; ++j) {
            out.data.row(c * config.p + j) = traj.samples.row(c).segment(static_cast<Eigen::Index>(j) * config.k, cols);
        }
    }
    out.times = traj.times.head(cols);
    return out;
}

Eigen::MatrixXd undelayed_rows(const Eigen::MatrixXd& embedded, int n_obs, int p) {
    if (embedded.rows() != static_cast<Eigen::Index>(n_obs) * p) {
        throw ShapeError("undelayed_rows: row count is not n_obs * p");
    }
    Eigen::MatrixXd out(n_obs, embedded.cols());
    for (int c = 0; c < n_obs; ++c) out.row(c) = embedded.row(static_cast<Eigen::Index>(c) * p);
    return out;
}

int suggest_timelag(double omega2, double dt) {
    if (!(omega2 > 0.0) || !(dt > 0.0)) {
        throw ConfigError("suggest_timelag: frequency and sampling time must be positive");
    }
    const double k = std::round(std::numbers::pi / (2.0 * omega2 * dt));
    return std::max(1, static_cast<int>(k));
}

Eigen::MatrixXd harmonic_embedding_matrix(const std::vector<double>& omegas, double tau, int p) {
    Eigen::MatrixXd v(p, 2 * static_cast<Eigen::Index>(omegas.size()));
    for (std::size_t m = 0; m < omegas.size(); ++m) {
        for (int j = 0; j < p; ++j) {
            v(j, 2 * m) = std::cos(j * omegas[m] * tau);
            v(j, 2 * m + 1) = std::sin(j * omegas[m] * tau);
        }
    }
    return v;
}

namespace {

std::size_t next_pow2(std::size_t n) {
    std::size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}

// One-sided power spectrum (bins 0..nfft/2) summed over channels, Hann window,
// per-channel mean removed.
std::vector<double> power_spectrum(const Eigen::MatrixXd& samples, Eigen::Index first, Eigen::Index len,
                                   std::size_t nfft) {
    Eigen::FFT<double> fft;
    std::vector<double> power(nfft / 2 + 1, 0.0);
    std::vector<double> buf(nfft, 0.0);
    std::vector<std::complex<double>> spectrum;
    for (Eigen::Index c = 0; c < samples.rows(); ++c) {
        const double mean = samples.row(c).segment(first, len).mean();
        std::fill(buf.begin(), buf.end(), 0.0);
        for (Eigen::Index j = 0; j < len; ++j) {
            const double w = len > 1 ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * j / (len - 1)) : 1.0;
            buf[j] = w * (samples(c, first + j) - mean);
        }
        fft.fwd(spectrum, buf);
        for (std::size_t b = 0; b < power.size(); ++b) power[b] += std::norm(spectrum[b]);
    }
    return power;
}

struct Peak {
    double bin;     // interpolated fractional bin
    double height;  // power at the discrete maximum
};

std::vector<Peak> find_peaks(const std::vector<double>& power) {
    std::vector<Peak> peaks;
    for (std::size_t b = 1; b + 1 < power.size(); ++b) {
        if (power[b] > power[b - 1] && power[b] >= power[b + 1] && power[b] > 0.0) {
            // parabola through log power of the three bins
            const double a = std::log(std::max(power[b - 1], 1e-300));
            const double m = std::log(power[b]);
            const double c = std::log(std::max(power[b + 1], 1e-300));
            const double denom = a - 2.0 * m + c;
            double offset = 0.0;
            if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
            peaks.push_back({static_cast<double>(b) + offset, power[b]});
        }
    }
    std::sort(peaks.begin(), peaks.end(), [](const Peak& x, const Peak& y) { return x.height > y.height; });
    return peaks;
}

}  // namespace

std::vector<double> estimate_frequencies(const Trajectory& traj, int n_peaks) {
    if (n_peaks < 1) throw ConfigError("estimate_frequencies: n_peaks must be >= 1");
    const Eigen::Index n = traj.length();
    if (n < 32) throw DataError("estimate_frequencies: at least 32 samples are required");
    const double dt = traj.dt();
    if (!(dt > 0.0)) throw DataError("estimate_frequencies: invalid sampling time");
    const std::size_t nfft = next_pow2(static_cast<std::size_t>(n));
    auto power = power_spectrum(traj.samples, 0, n, nfft);
    double total = 0.0;
    for (double v : power) total += v;
    if (!(total > 0.0)) throw DataError("estimate_frequencies: constant signal has no spectral peaks");
    auto peaks = find_peaks(power);
    // discard numerical noise floor
    const double floor = 1e-20 * (peaks.empty() ? 0.0 : peaks.front().height);
    std::erase_if(peaks, [&](const Peak& p) { return p.height <= floor; });
    if (static_cast<int>(peaks.size()) < n_peaks) {
        std::ostringstream msg;
        msg << "estimate_frequencies: found " << peaks.size() << " spectral peaks, " << n_peaks << " requested";
        throw DataError(msg.str());
    }
    std::vector<double> out;
    const double df = 1.0 / (static_cast<double>(nfft) * dt);
    for (int i = 0; i < n_peaks; ++i) out.push_back(2.0 * std::numbers::pi * peaks[i].bin * df);
    std::sort(out.begin(), out.end());
    return out;
}

TrimResult trim_transient(const Trajectory& traj, const TransientPolicy& policy) {
    const Eigen::Index n = traj.length();
    Eigen::Index start = 0;
    TrimResult result;
    switch (policy.kind) {
        case TransientPolicy::Kind::None:
            break;
        case TransientPolicy::Kind::Index:
            if (policy.index < 0) throw ConfigError("trim_transient: negative start index");
            start = policy.index;
            break;
        case TransientPolicy::Kind::Time: {
            start = n;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (traj.times(j) >= policy.time) {
                    start = j;
                    break;
                }
            }
            break;
        }
        case TransientPolicy::Kind::Auto: {
            if (policy.n_modes < 1) throw ConfigError("trim_transient: auto policy needs n_modes >= 1");
            const auto peaks = estimate_frequencies(traj, policy.n_modes);
            const Eigen::Index window = std::max<Eigen::Index>(64, n / 10);
            if (window > n) throw DataError("trim_transient: trajectory too short for automatic trimming");
            const Eigen::Index hop = std::max<Eigen::Index>(1, window / 8);
            const std::size_t nfft = next_pow2(static_cast<std::size_t>(window));
            const double df = 1.0 / (static_cast<double>(nfft) * traj.dt());
            const double band = 4.0;  // bins on each side of a retained peak
            start = -1;
            for (Eigen::Index s = 0; s + window <= n; s += hop) {
                auto power = power_spectrum(traj.samples, s, window, nfft);
                double in = 0.0;
                double total = 0.0;
                for (std::size_t b = 0; b < power.size(); ++b) {
                    total += power[b];
                    for (double w : peaks) {
                        const double centre = w / (2.0 * std::numbers::pi * df);
                        if (std::abs(static_cast<double>(b) - centre) <= band) {
                            in += power[b];
                            break;
                        }
                    }
                }
                if (!(total > 0.0)) continue;
                const double fraction = std::sqrt(std::max(0.0, total - in) / total);
                if (fraction < policy.energy_fraction) {
                    // start after the first clean window unless the series is clean from the outset
                    start = (s == 0) ? 0 : s + window;
                    break;
                }
            }
            if (start < 0) {
                result.warnings.push_back(
                    "trim_transient: no window met the spectral threshold; trajectory left untrimmed");
                start = 0;
            }
            break;
        }
    }
    if (start >= n - 1) {
        std::ostringstream msg;
        msg << "trim_transient: trimming " << start << " samples leaves fewer than two of " << n;
        throw DataError(msg.str());
    }
    result.start = start;
    result.trajectory.times = traj.times.tail(n - start);
    result.trajectory.samples = traj.samples.rightCols(n - start);
    return result;
}

}  // namespace fastssm
