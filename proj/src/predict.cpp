#include "fastssm/predict.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/numeric/odeint.hpp>

namespace fastssm {

void check_consistency(const FullModel& model) {
    const int d = model.dim();
    const auto obs = static_cast<Eigen::Index>(model.n_obs) * model.embedding.p;
    if (model.ssm.tangent.rows() != obs || model.ssm.parametrization.output_dim() != obs) {
        throw ShapeError("model: observable dimension does not match n_obs * p");
    }
    if (model.ssm.parametrization.input_dim() != d || model.reduced.dim() != d || model.normal_form.dim() != d ||
        model.reduced.eigenvectors.rows() != d) {
        throw ShapeError("model: reduced dimensions disagree along the chain");
    }
}

double AmplitudeFunctional::operator()(const Eigen::VectorXd& y) const {
    if (first < 0 || count < 1 || first + count > y.size()) {
        throw ConfigError("amplitude functional " + to_string() + " does not fit an observable vector of size " +
                          std::to_string(y.size()));
    }
    if (kind == Kind::Coordinate) return y(first);
    return y.segment(first, count).norm();
}

AmplitudeFunctional AmplitudeFunctional::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    try {
        if (parts.size() == 2 && parts[0] == "coord") return coordinate(std::stoi(parts[1]));
        if (parts.size() == 3 && parts[0] == "block") return block_norm(std::stoi(parts[1]), std::stoi(parts[2]));
    } catch (const std::logic_error&) {
    }
    throw ConfigError("invalid amplitude functional '" + text + "' (expected coord:<row> or block:<first>:<count>)");
}

std::string AmplitudeFunctional::to_string() const {
    if (kind == Kind::Coordinate) return "coord:" + std::to_string(first);
    return "block:" + std::to_string(first) + ":" + std::to_string(count);
}

Eigen::VectorXd sample_times(double horizon, double dt) {
    if (!(dt > 0.0)) throw ConfigError("sampling time must be positive");
    if (!(horizon >= 0.0)) throw ConfigError("horizon must be nonnegative");
    const auto n = static_cast<Eigen::Index>(std::floor(horizon / dt + 1e-9)) + 1;
    Eigen::VectorXd t(n);
    for (Eigen::Index i = 0; i < n; ++i) t(i) = static_cast<double>(i) * dt;
    return t;
}

Eigen::MatrixXcd integrate(const ComplexMap& field, const Eigen::VectorXcd& z0, const Eigen::VectorXd& times,
                           double rtol, double atol, double bound) {
    namespace odeint = boost::numeric::odeint;
    using State = std::vector<double>;
    const int d = field.input_dim();
    if (z0.size() != d || field.output_dim() != d) throw ShapeError("integrate: state dimension mismatch");
    if (times.size() == 0) return Eigen::MatrixXcd(d, 0);
    for (Eigen::Index i = 1; i < times.size(); ++i) {
        if (!(times(i) > times(i - 1))) throw ConfigError("integrate: sample times must increase");
    }
    Eigen::MatrixXcd out(d, times.size());
    if (z0.isZero(0.0) && field.basis().order_lo() >= 1) {
        out.setZero();
        return out;
    }

    State x(2 * static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        x[i] = z0(i).real();
        x[d + i] = z0(i).imag();
    }
    Eigen::VectorXcd z(d);
    auto rhs = [&](const State& s, State& ds, double) {
        for (int i = 0; i < d; ++i) z(i) = Complex(s[i], s[d + i]);
        const Eigen::VectorXcd f = field.eval(z);
        for (int i = 0; i < d; ++i) {
            ds[i] = f(i).real();
            ds[d + i] = f(i).imag();
        }
    };
    Eigen::Index col = 0;
    auto observe = [&](const State& s, double t) {
        double norm = 0.0;
        for (int i = 0; i < d; ++i) {
            out(i, col) = Complex(s[i], s[d + i]);
            norm = std::max(norm, std::abs(out(i, col)));
        }
        if (!std::isfinite(norm) || norm > bound) {
            std::ostringstream msg;
            msg << "integration diverged: |z| = " << norm << " at t = " << t;
            throw InstabilityError(msg.str());
        }
        ++col;
    };
    std::vector<double> tv(times.data(), times.data() + times.size());
    const double dt0 = tv.size() > 1 ? (tv[1] - tv[0]) / 10.0 : 1e-3;
    if (tv.size() == 1) {
        observe(x, tv[0]);
        return out;
    }
    auto stepper = odeint::make_dense_output(atol, rtol, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_times(stepper, rhs, x, tv.begin(), tv.end(), dt0, observe);
    return out;
}

Eigen::MatrixXcd modal_from_normal(const FullModel& model, const Eigen::MatrixXcd& z) {
    return model.normal_form.transform.eval(z);
}

Eigen::MatrixXd observables_from_modal(const FullModel& model, const Eigen::MatrixXcd& zeta, double* imag_residue) {
    const Eigen::MatrixXcd xi = model.reduced.eigenvectors * zeta;
    if (imag_residue) {
        double worst = 0.0;
        for (Eigen::Index c = 0; c < xi.cols(); ++c) {
            const double n = xi.col(c).norm();
            if (n > 0.0) worst = std::max(worst, xi.col(c).imag().norm() / n);
        }
        *imag_residue = worst;
    }
    return lift(model.ssm.parametrization, xi.real());
}

Eigen::MatrixXcd normal_from_observables(const FullModel& model, const Eigen::MatrixXd& y) {
    const Eigen::MatrixXd xi = reduce(y, model.ssm.tangent);
    const Eigen::MatrixXcd zeta = model.reduced.eigenvectors.partialPivLu().solve(xi.cast<Complex>());
    return inverse_transform(model.normal_form, zeta, model.normal_form.inverse_strategy).z;
}

Prediction predict_decay(const FullModel& model, const Eigen::VectorXd& y0, double horizon,
                         const PredictOptions& options) {
    check_consistency(model);
    if (y0.size() != model.observable_dim()) {
        std::ostringstream msg;
        msg << "predict_decay: initial snapshot has " << y0.size() << " entries, the model expects "
            << model.observable_dim() << " (embed the observables first)";
        throw ShapeError(msg.str());
    }
    Prediction out;
    Eigen::VectorXcd z0;
    try {
        z0 = normal_from_observables(model, y0).col(0);
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(std::string("predict_decay: inverse transform failed: ") + e.what());
    }
    const double amp = z0.cwiseAbs().maxCoeff();
    if (model.training_amplitude > 0.0 && amp > options.amplitude_factor * model.training_amplitude) {
        std::ostringstream msg;
        msg << "initial condition |z0| = " << amp << " lies outside the training range (" << model.training_amplitude
            << "); prediction extrapolates";
        out.warnings.push_back(msg.str());
    }
    const Eigen::VectorXd times = sample_times(horizon, model.embedding.dt);
    out.z = integrate(model.normal_form.normal_form, z0, times, options.rtol, options.atol * std::max(amp, 1e-300));
    double residue = 0.0;
    out.trajectory.samples = observables_from_modal(model, modal_from_normal(model, out.z), &residue);
    out.trajectory.times = times;
    if (residue > 1e-6) {
        std::ostringstream msg;
        msg << "reduced coordinates carry an imaginary residue of " << residue << " (relative)";
        out.warnings.push_back(msg.str());
    }
    return out;
}

double nmte(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& prediction) {
    if (reference.rows() != prediction.rows() || reference.cols() != prediction.cols()) {
        throw ShapeError("nmte: reference and prediction differ in shape");
    }
    const Eigen::Index n = reference.cols();
    if (n == 0) throw DataError("nmte: empty trajectories");
    const double peak = reference.colwise().norm().maxCoeff();
    if (peak == 0.0) throw DataError("nmte: reference trajectory is identically zero (division by zero)");
    const double sum = (prediction - reference).colwise().norm().sum();
    return sum / (static_cast<double>(n) * peak);
}

double nmte(const Trajectory& reference, const Trajectory& prediction) {
    if (reference.length() != prediction.length()) throw ShapeError("nmte: trajectories differ in length");
    if (reference.length() > 1 && std::abs(reference.dt() - prediction.dt()) > 1e-9 * reference.dt()) {
        throw ShapeError("nmte: trajectories differ in sampling time");
    }
    return nmte(reference.samples, prediction.samples);
}

namespace {

void require_single_pair(const FullModel& model, const char* what) {
    if (model.normal_form.dim() != 2) {
        throw UnsupportedError(std::string(what) + " is defined for a two-dimensional normal form only");
    }
}

}  // namespace

double amplitude_map(const FullModel& model, double rho, const AmplitudeFunctional& alpha, int theta_grid) {
    require_single_pair(model, "amplitude_map");
    if (!(rho >= 0.0)) throw DataError("amplitude_map: rho must be nonnegative");
    if (theta_grid < 3) throw ConfigError("amplitude_map: theta grid needs at least 3 points");
    if (rho == 0.0) return 0.0;
    const double h = 2.0 * std::numbers::pi / theta_grid;
    auto values = [&](const std::vector<double>& thetas) {
        Eigen::MatrixXcd z(2, static_cast<Eigen::Index>(thetas.size()));
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            z(0, static_cast<Eigen::Index>(i)) = std::polar(rho, thetas[i]);
            z(1, static_cast<Eigen::Index>(i)) = std::polar(rho, -thetas[i]);
        }
        const Eigen::MatrixXd y = observables_from_modal(model, modal_from_normal(model, z));
        std::vector<double> out(thetas.size());
        for (std::size_t i = 0; i < thetas.size(); ++i) out[i] = std::abs(alpha(y.col(static_cast<Eigen::Index>(i))));
        return out;
    };
    std::vector<double> grid(static_cast<std::size_t>(theta_grid));
    for (int i = 0; i < theta_grid; ++i) grid[i] = h * i;
    const auto f = values(grid);
    const auto best = static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin());
    const double fm = f[(best + theta_grid - 1) % theta_grid];
    const double f0 = f[best];
    const double fp = f[(best + 1) % theta_grid];
    const double curvature = fm - 2.0 * f0 + fp;
    if (!(curvature < 0.0)) return f0;
    const double offset = 0.5 * (fm - fp) / curvature;
    const double refined = values({grid[best] + offset * h})[0];
    return std::max(f0, refined);
}

Backbone backbone(const FullModel& model, double rho_max, int n_points, const AmplitudeFunctional& alpha,
                  int theta_grid) {
    require_single_pair(model, "backbone");
    if (model.polar.resonant() || model.polar.pair_count() != 1) {
        throw UnsupportedError("backbone: needs a single non-resonant oscillator pair");
    }
    if (!(rho_max > 0.0) || n_points < 2) throw ConfigError("backbone: need rho_max > 0 and at least 2 points");
    Backbone out;
    out.alpha = alpha;
    for (int i = 0; i < n_points; ++i) {
        const double rho = rho_max * i / (n_points - 1);
        out.rho.push_back(rho);
        out.omega.push_back(model.polar.frequency(rho));
        out.amplitude.push_back(amplitude_map(model, rho, alpha, theta_grid));
    }
    return out;
}

double calibrate_forcing(const PolarNormalForm& polar, double omega_cal, double rho_cal) {
    if (!(rho_cal > 0.0)) throw CalibrationError("calibration point maps to the origin (rho_cal = 0)");
    const double c = polar.damping(rho_cal);
    const double dw = polar.frequency(rho_cal) - omega_cal;
    return rho_cal * std::hypot(c, dw);
}

double calibration_amplitude(const FullModel& model, double omega_cal, double u_cal, int n_phases) {
    require_single_pair(model, "calibration");
    if (!(u_cal > 0.0)) throw ConfigError("calibration amplitude must be positive");
    if (n_phases < 1) throw ConfigError("calibration needs at least one phase");
    const int p = model.embedding.p;
    const double tau = model.embedding.tau();
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(model.observable_dim(), n_phases);
    for (int i = 0; i < n_phases; ++i) {
        const double phase = 2.0 * std::numbers::pi * i / n_phases;
        for (int j = 0; j < p; ++j) y(j, i) = u_cal * std::cos(phase + omega_cal * j * tau);
    }
    const Eigen::MatrixXcd z = normal_from_observables(model, y);
    return z.row(0).cwiseAbs().mean();
}

Calibration calibrate_forcing(const FullModel& model, double omega_cal, double u_cal) {
    Calibration out{omega_cal, u_cal, calibration_amplitude(model, omega_cal, u_cal), 0.0};
    out.f = calibrate_forcing(model.polar, omega_cal, out.rho);
    return out;
}

std::pair<double, double> frc_residual(const PolarNormalForm& polar, double f, const FrcPoint& point) {
    const double rho = point.rho;
    const double rho_dot = polar.damping(rho) * rho + f * std::sin(point.psi);
    const double psi_dot = polar.frequency(rho) - point.omega + f / rho * std::cos(point.psi);
    return {rho_dot, psi_dot};
}

Frc frc(const PolarNormalForm& polar, double f, const FrcOptions& options) {
    if (!(f > 0.0)) throw ConfigError("forcing must be positive");
    if (!(options.rho_max > 0.0) || options.n_rho < 2) throw ConfigError("frc: need rho_max > 0 and n_rho >= 2");
    Frc out;
    out.f = f;
    for (int i = 1; i < options.n_rho; ++i) {
        const double rho = options.rho_max * i / (options.n_rho - 1);
        const double c = polar.damping(rho);
        const double w = polar.frequency(rho);
        const double drive = f / rho;
        double radicand = drive * drive - c * c;
        if (radicand < 0.0) {
            if (radicand < -1e-12 * drive * drive) continue;
            radicand = 0.0;
        }
        const double root = std::sqrt(radicand);
        for (int branch : {1, -1}) {
            FrcPoint pt;
            pt.rho = rho;
            pt.branch = branch;
            pt.omega = w + branch * root;
            if (pt.omega < options.omega_min || pt.omega > options.omega_max) continue;
            pt.psi = std::atan2(-c * rho / f, (pt.omega - w) * rho / f);
            pt.amplitude = rho;
            // Jacobian of (rho', psi') with respect to (rho, psi)
            const double j11 = polar.damping_derivative(rho) * rho + c;
            const double j12 = f * std::cos(pt.psi);
            const double j21 = polar.frequency_derivative(rho) - f * std::cos(pt.psi) / (rho * rho);
            const double j22 = -f / rho * std::sin(pt.psi);
            pt.stable = (j11 + j22) < 0.0 && (j11 * j22 - j12 * j21) > 0.0;
            out.points.push_back(pt);
        }
    }
    if (out.points.empty()) {
        out.diagnostics.push_back("frc: no response points in the requested range; the forcing amplitude may be too "
                                  "small or rho_max too low");
    }
    return out;
}

Frc frc(const FullModel& model, double f, const AmplitudeFunctional& alpha, const FrcOptions& options) {
    Frc out = frc(model.polar, f, options);
    std::map<double, double> cache;
    for (auto& pt : out.points) {
        auto it = cache.find(pt.rho);
        if (it == cache.end()) it = cache.emplace(pt.rho, amplitude_map(model, pt.rho, alpha, options.theta_grid)).first;
        pt.amplitude = it->second;
    }
    return out;
}

}  // namespace fastssm
