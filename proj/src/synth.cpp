#include "fastssm/synth.hpp"

#include <cmath>
#include <numbers>
#include <tuple>
#include <sstream>

#include "fastssm/predict.hpp"

namespace fastssm {

std::string to_string(SystemKind kind) {
    switch (kind) {
        case SystemKind::Linear:
            return "linear";
        case SystemKind::StuartLandau:
            return "stuart_landau";
        case SystemKind::CubicOscillator:
            return "cubic_oscillator";
        case SystemKind::ResonantPair:
            return "resonant_pair";
    }
    return "linear";
}

SystemKind system_kind_from_string(const std::string& name) {
    if (name == "linear") return SystemKind::Linear;
    if (name == "stuart_landau") return SystemKind::StuartLandau;
    if (name == "cubic_oscillator") return SystemKind::CubicOscillator;
    if (name == "resonant_pair") return SystemKind::ResonantPair;
    throw ConfigError("unknown system kind '" + name +
                      "' (expected linear, stuart_landau, cubic_oscillator or resonant_pair)");
}

NormalSource::NormalSource(std::uint64_t seed) : engine_(seed) {}

double NormalSource::uniform() {
    // 53 random bits in (0, 1]
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double NormalSource::operator()() {
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    return r * std::cos(phi);
}

namespace {

void check_stable(const Eigen::VectorXcd& eigenvalues) {
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        if (!(eigenvalues(i).real() < 0.0)) {
            throw ConfigError("synthetic system: the origin must be stable (all Re lambda < 0)");
        }
    }
}

// Random observable lift of full column rank.
RealMap make_lift(int state_dim, const LiftOptions& options) {
    if (options.n_obs < state_dim) {
        throw ConfigError("synthetic system: need at least as many observables as state dimensions");
    }
    NormalSource rng(options.seed);
    const int order = options.nonlinearity != 0.0 ? 2 : 1;
    MonomialBasis basis(state_dim, 1, order);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(options.n_obs, static_cast<Eigen::Index>(basis.size()));
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        const double scale = j < state_dim ? 1.0 : options.nonlinearity;
        for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, j) = scale * (2.0 * rng.uniform() - 1.0);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c.leftCols(state_dim));
    const auto& s = svd.singularValues();
    if (!(s(state_dim - 1) > 1e-6 * s(0))) throw ConfigError("synthetic system: lift is rank deficient; change seed");
    return RealMap(basis, c);
}

// Real field s' = Re(P N(L s)) for a conjugate-symmetric complex field N.
RealMap realify(const ComplexMap& n) {
    const int d = n.input_dim();
    const Complex i1(0.0, 1.0);
    Eigen::MatrixXcd l = Eigen::MatrixXcd::Zero(d, d);
    Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(d, d);
    for (int m = 0; m < d; m += 2) {
        l(m, m) = 1.0;
        l(m, m + 1) = i1;
        l(m + 1, m) = 1.0;
        l(m + 1, m + 1) = -i1;
        p(m, m) = 0.5;
        p(m, m + 1) = 0.5;
        p(m + 1, m) = -0.5 * i1;
        p(m + 1, m + 1) = 0.5 * i1;
    }
    const int order = n.basis().order_hi();
    ComplexMap composed = compose(n, ComplexMap(MonomialBasis(d, 1, 1), l), order);
    Eigen::MatrixXcd coeffs = p * composed.coefficients();
    return RealMap(composed.basis(), coeffs.real());
}

// Build a conjugate-symmetric field from the rows of the first pair members.
ComplexMap pair_field(int d, int order, const std::vector<std::tuple<int, MultiIndex, Complex>>& terms) {
    MonomialBasis basis(d, 1, order);
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(d, static_cast<Eigen::Index>(basis.size()));
    for (const auto& [row, k, coef] : terms) {
        MultiIndex mirror(k.size());
        for (std::size_t m = 0; m < k.size(); m += 2) {
            mirror[m] = k[m + 1];
            mirror[m + 1] = k[m];
        }
        c(row, basis.index_of(k)) += coef;
        c(row + 1, basis.index_of(mirror)) += std::conj(coef);
    }
    return ComplexMap(basis, c);
}

Eigen::VectorXcd pair_eigenvalues(const std::vector<Complex>& lambdas) {
    Eigen::VectorXcd out(2 * static_cast<Eigen::Index>(lambdas.size()));
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i].imag() > 0.0)) throw ConfigError("synthetic system: eigenvalues need Im lambda > 0");
        out(2 * i) = lambdas[i];
        out(2 * i + 1) = std::conj(lambdas[i]);
    }
    return out;
}

SyntheticSystem from_normal_form(SystemKind kind, const ComplexMap& n, const Eigen::VectorXcd& eigenvalues,
                                 const LiftOptions& lift) {
    check_stable(eigenvalues);
    return SyntheticSystem{kind, realify(n), make_lift(n.input_dim(), lift), eigenvalues, n};
}

MultiIndex unit(int d, int i) {
    MultiIndex k(d, 0);
    k[i] = 1;
    return k;
}

}  // namespace

SyntheticSystem make_linear(const std::vector<Complex>& lambdas, const LiftOptions& lift) {
    if (lambdas.empty()) throw ConfigError("make_linear: need at least one eigenvalue pair");
    const Eigen::VectorXcd ev = pair_eigenvalues(lambdas);
    const int d = static_cast<int>(ev.size());
    std::vector<std::tuple<int, MultiIndex, Complex>> terms;
    for (int m = 0; m < d; m += 2) terms.emplace_back(m, unit(d, m), ev(m));
    return from_normal_form(SystemKind::Linear, pair_field(d, 1, terms), ev, lift);
}

SyntheticSystem make_stuart_landau(Complex lambda, Complex gamma, const LiftOptions& lift) {
    const Eigen::VectorXcd ev = pair_eigenvalues({lambda});
    auto n = pair_field(2, 3, {{0, {1, 0}, lambda}, {0, {2, 1}, gamma}});
    return from_normal_form(SystemKind::StuartLandau, n, ev, lift);
}

SyntheticSystem make_resonant_pair(const ResonantPairCoefficients& k, const LiftOptions& lift) {
    const Eigen::VectorXcd ev = pair_eigenvalues({k.lambda1, k.lambda2});
    auto n = pair_field(4, 3,
                        {{0, {1, 0, 0, 0}, k.lambda1},
                         {0, {0, 1, 1, 0}, k.a},
                         {0, {2, 1, 0, 0}, k.b},
                         {0, {1, 0, 1, 1}, k.c},
                         {2, {0, 0, 1, 0}, k.lambda2},
                         {2, {2, 0, 0, 0}, k.e},
                         {2, {0, 0, 2, 1}, k.g},
                         {2, {1, 1, 1, 0}, k.h}});
    return from_normal_form(SystemKind::ResonantPair, n, ev, lift);
}

SyntheticSystem make_cubic_oscillator(double omega, double zeta, double kappa, const LiftOptions& lift) {
    if (!(omega > 0.0) || !(zeta > 0.0) || !(zeta < 1.0)) {
        throw ConfigError("make_cubic_oscillator: need omega > 0 and 0 < zeta < 1");
    }
    MonomialBasis basis(2, 1, 3);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 9);
    c(0, 1) = 1.0;                      // x' = v
    c(1, 0) = -omega * omega;           // v' = -omega^2 x
    c(1, 1) = -2.0 * zeta * omega;      //      - 2 zeta omega v
    c(1, basis.index_of({3, 0})) = -kappa;  //  - kappa x^3
    const Complex l(-zeta * omega, omega * std::sqrt(1.0 - zeta * zeta));
    return SyntheticSystem{SystemKind::CubicOscillator, RealMap(basis, c), make_lift(2, lift),
                           pair_eigenvalues({l}), std::nullopt};
}

Eigen::VectorXd state_from_pairs(const Eigen::VectorXcd& z) {
    Eigen::VectorXd s(2 * z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        s(2 * i) = z(i).real();
        s(2 * i + 1) = z(i).imag();
    }
    return s;
}

Eigen::MatrixXd simulate_state(const SyntheticSystem& system, const Eigen::VectorXd& s0, const Eigen::VectorXd& times,
                               const SimulateOptions& options) {
    if (s0.size() != system.state_dim()) throw ShapeError("simulate: initial state has the wrong dimension");
    const double scale = std::max(s0.cwiseAbs().maxCoeff(), 1e-300);
    const Eigen::MatrixXcd z = integrate(system.field.to_complex(), s0.cast<Complex>(), times, options.rtol,
                                         options.atol * scale, options.bound);
    return z.real();
}

Trajectory simulate(const SyntheticSystem& system, const Eigen::VectorXd& s0, double horizon, double dt,
                    const SimulateOptions& options) {
    if (!(horizon > 0.0)) throw ConfigError("simulate: horizon must be positive");
    if (!(options.noise >= 0.0)) throw ConfigError("simulate: noise level must be nonnegative");
    Trajectory out;
    out.times = sample_times(horizon, dt);
    out.samples = system.observable_lift.eval(simulate_state(system, s0, out.times, options));
    if (options.noise > 0.0) {
        const double rms = std::sqrt(out.samples.squaredNorm() / static_cast<double>(out.samples.size()));
        NormalSource rng(options.seed);
        for (Eigen::Index j = 0; j < out.samples.cols(); ++j) {
            for (Eigen::Index i = 0; i < out.samples.rows(); ++i) out.samples(i, j) += options.noise * rms * rng();
        }
    }
    return out;
}

std::vector<Eigen::VectorXd> random_initial_states(const SyntheticSystem& system, int count, double radius,
                                                   std::uint64_t seed) {
    NormalSource rng(seed);
    std::vector<Eigen::VectorXd> out;
    const int pairs = system.state_dim() / 2;
    for (int c = 0; c < count; ++c) {
        Eigen::VectorXcd z(pairs);
        for (int m = 0; m < pairs; ++m) {
            const double r = radius * (0.5 + 0.5 * rng.uniform());
            z(m) = std::polar(r, 2.0 * std::numbers::pi * rng.uniform());
        }
        Eigen::VectorXd s = state_from_pairs(z);
        if (system.kind == SystemKind::CubicOscillator) s(1) *= system.eigenvalues(0).imag();
        out.push_back(s);
    }
    return out;
}

NormalFormModel ground_truth_normal_form(const SyntheticSystem& system, bool normalized) {
    if (!system.normal_form) {
        throw UnsupportedError("ground_truth_normal_form: no closed-form normal form for " + to_string(system.kind));
    }
    const ComplexMap& n = *system.normal_form;
    const int d = n.input_dim();
    Eigen::VectorXcd scale = Eigen::VectorXcd::Ones(d);
    if (normalized) {
        const Eigen::MatrixXd l = system.observable_lift.block(1);
        for (int m = 0; m < d; m += 2) {
            const Eigen::VectorXcd w = 0.5 * (l.col(m).cast<Complex>() - Complex(0.0, 1.0) * l.col(m + 1).cast<Complex>());
            Eigen::Index imax = 0;
            w.cwiseAbs().maxCoeff(&imax);
            scale(m) = w.norm() * w(imax) / std::abs(w(imax));
            scale(m + 1) = std::conj(scale(m));
        }
    }
    // zeta = s z turns the coefficient of z^k in row j into N_jk s_j / prod s^k
    Eigen::MatrixXcd c = n.coefficients();
    const auto& basis = n.basis();
    for (std::size_t i = 0; i < basis.size(); ++i) {
        Complex denom = 1.0;
        for (int v = 0; v < d; ++v) denom *= std::pow(scale(v), basis.exponent(i)[v]);
        for (int j = 0; j < d; ++j) c(j, static_cast<Eigen::Index>(i)) *= scale(j) / denom;
    }
    const int order = std::max(3, basis.order_hi());
    MonomialBasis out_basis(d, 1, order);
    ComplexMap nf = ComplexMap(basis, c).rebase(1, order);
    Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(d, static_cast<Eigen::Index>(out_basis.size()));
    t.leftCols(d).setIdentity();

    NormalFormModel model{ComplexMap(out_basis, t), nf, system.eigenvalues};
    for (std::size_t i = static_cast<std::size_t>(d); i < out_basis.size(); ++i) {
        for (int j = 0; j < d; ++j) {
            if (nf.coefficients()(j, static_cast<Eigen::Index>(i)) != Complex(0.0)) {
                model.resonances.push_back({j, out_basis.exponent(i), 0.0});
            }
        }
    }
    return model;
}

}  // namespace fastssm
