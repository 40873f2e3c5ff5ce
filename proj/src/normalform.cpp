#include "fastssm/normalform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "fastssm/reduced.hpp"

namespace fastssm {

std::string to_string(InverseStrategy s) {
    switch (s) {
        case InverseStrategy::Newton:
            return "newton";
        case InverseStrategy::Series:
            return "series";
        case InverseStrategy::Regression:
            return "regression";
    }
    return "newton";
}

InverseStrategy inverse_strategy_from_string(const std::string& s) {
    if (s == "newton") return InverseStrategy::Newton;
    if (s == "series") return InverseStrategy::Series;
    if (s == "regression") return InverseStrategy::Regression;
    throw ConfigError("unknown inverse strategy '" + s + "' (expected newton, series or regression)");
}

namespace {

// Resonance bookkeeping shared by both solvers.
class ResonanceTest {
public:
    ResonanceTest(const Eigen::VectorXcd& eigenvalues, const NormalFormOptions& options)
        : lam_(eigenvalues), tol_(options.tol_res), full_(options.full_complex_criterion) {
        for (Eigen::Index i = 0; i < lam_.size(); ++i) {
            if (lam_(i).imag() == 0.0) full_ = true;
        }
    }

    bool full() const { return full_; }
    double tolerance() const { return tol_; }

    Complex divisor(const MultiIndex& k, int row) const {
        Complex acc = -lam_(row);
        for (std::size_t i = 0; i < k.size(); ++i) acc += static_cast<double>(k[i]) * lam_(static_cast<Eigen::Index>(i));
        return acc;
    }

    double detuning(const MultiIndex& k, int row) const {
        const Complex div = divisor(k, row);
        const double scale = std::max(std::abs(lam_(row)), 1e-300);
        return (full_ ? std::abs(div) : std::abs(div.imag())) / scale;
    }

    bool resonant(double detuning) const { return detuning <= tol_; }
    bool gray(double detuning) const { return detuning > tol_ && detuning <= 10.0 * tol_; }

private:
    Eigen::VectorXcd lam_;
    double tol_;
    bool full_;
};

std::string describe_monomial(const MultiIndex& k, int row) {
    std::ostringstream out;
    out << "row " << row + 1 << ", z^(";
    for (std::size_t i = 0; i < k.size(); ++i) out << (i ? "," : "") << k[i];
    out << ")";
    return out.str();
}

double max_abs(const Eigen::MatrixXcd& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

std::vector<TruncatedAlgebra::Poly> grad_times(const TruncatedAlgebra& alg, const std::vector<TruncatedAlgebra::Poly>& t,
                                               const std::vector<TruncatedAlgebra::Poly>& n) {
    std::vector<TruncatedAlgebra::Poly> out(t.size(), alg.zero());
    for (std::size_t j = 0; j < t.size(); ++j) {
        for (int i = 0; i < alg.dim(); ++i) {
            auto dt = alg.derivative(t[j], i);
            if (dt.isZero(0.0)) continue;
            out[j] += alg.multiply(dt, n[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

void check_residual(NormalFormModel& model, const ComplexMap& modal, const NormalFormOptions& options) {
    const int n = model.order();
    ComplexMap res = conjugacy_residual(model.transform, model.normal_form, modal, n);
    model.conjugacy_residual = max_abs(res.coefficients());
    double scale = std::max({1.0, max_abs(modal.rebase(1, std::min(n, modal.basis().order_hi())).coefficients()),
                             max_abs(model.normal_form.coefficients()),
                             max_abs(model.transform.coefficients()) * model.eigenvalues.cwiseAbs().maxCoeff()});
    if (!(model.conjugacy_residual <= options.residual_tolerance * scale)) {
        std::ostringstream msg;
        msg << "normal form: conjugacy residual " << model.conjugacy_residual << " exceeds "
            << options.residual_tolerance * scale << " (internal consistency failure)";
        throw NumericalError(msg.str());
    }
}

}  // namespace

ComplexMap conjugacy_residual(const ComplexMap& transform, const ComplexMap& normal_form, const ComplexMap& modal,
                              int n) {
    const int d = transform.input_dim();
    TruncatedAlgebra alg(d, n);
    auto t = alg.from_map(transform);
    auto nf = alg.from_map(normal_form);
    auto lhs = grad_times(alg, t, nf);
    auto rhs = alg.compose(modal, t);
    for (std::size_t j = 0; j < lhs.size(); ++j) lhs[j] -= rhs[j];
    return alg.to_map(lhs, 1, n);
}

NormalFormModel general_normal_form(const ComplexMap& modal, const Eigen::VectorXcd& eigenvalues, int n,
                                    const NormalFormOptions& options) {
    const int d = modal.input_dim();
    if (modal.output_dim() != d) throw ShapeError("general_normal_form: G must map C^d to C^d");
    if (eigenvalues.size() != d) throw ShapeError("general_normal_form: eigenvalue count differs from dimension");
    if (n < 1) throw ConfigError("general_normal_form: order n must be >= 1");
    if (!(options.tol_res >= 0.0)) throw ConfigError("general_normal_form: tol_res must be nonnegative");
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            if (std::abs(eigenvalues(i) - eigenvalues(j)) <= 1e-12 * std::max(1.0, std::abs(eigenvalues(i)))) {
                throw UnsupportedError("general_normal_form: repeated eigenvalues are not supported");
            }
        }
    }

    ResonanceTest test(eigenvalues, options);
    TruncatedAlgebra alg(d, n);
    std::vector<TruncatedAlgebra::Poly> t(d), nf(d);
    for (int j = 0; j < d; ++j) {
        t[j] = alg.variable(j);
        nf[j] = eigenvalues(j) * alg.variable(j);
    }

    NormalFormModel model{ComplexMap::zero(MonomialBasis(d, 1, n), d), ComplexMap::zero(MonomialBasis(d, 1, n), d),
                          eigenvalues};
    model.tol_res = options.tol_res;
    model.full_complex_criterion = test.full();
    if (test.full() && !options.full_complex_criterion) {
        model.warnings.push_back("normal form: real eigenvalue present; using the complex resonance criterion");
    }

    for (int s = 2; s <= n; ++s) {
        auto composed = alg.compose(modal, t);
        auto known = grad_times(alg, t, nf);
        auto [first, last] = alg.basis().degree_range(s);
        for (std::size_t idx = first; idx < last; ++idx) {
            const MultiIndex& k = alg.basis().exponent(idx);
            const auto ei = static_cast<Eigen::Index>(idx);
            for (int j = 0; j < d; ++j) {
                const Complex rhs = composed[j](ei) - known[j](ei);
                const double detuning = test.detuning(k, j);
                if (test.resonant(detuning)) {
                    nf[j](ei) = rhs;
                    model.resonances.push_back({j, k, detuning});
                } else {
                    t[j](ei) = rhs / test.divisor(k, j);
                    if (test.gray(detuning)) {
                        std::ostringstream msg;
                        msg << "normal form: near-resonant monomial " << describe_monomial(k, j) << " (detuning "
                            << detuning << " of |lambda|) eliminated; coefficients may be ill-conditioned";
                        model.warnings.push_back(msg.str());
                    }
                }
            }
        }
    }
    model.transform = alg.to_map(t, 1, n);
    model.normal_form = alg.to_map(nf, 1, n);
    check_residual(model, modal, options);
    return model;
}

NormalFormModel cubic_normal_form_2d(const ComplexMap& modal, Complex lambda, const NormalFormOptions& options) {
    if (modal.input_dim() != 2 || modal.output_dim() != 2) {
        throw ShapeError("cubic_normal_form_2d: G must be a 2D map");
    }
    const Complex lb = std::conj(lambda);
    Eigen::VectorXcd lam(2);
    lam << lambda, lb;
    ResonanceTest test(lam, options);

    const ComplexMap g3 = modal.rebase(1, 3);
    const auto& gc = g3.coefficients();
    // conjugate symmetry: row 2 at (a, b) equals conj(row 1 at (b, a))
    const auto& basis = g3.basis();
    const double gscale = std::max(1.0, max_abs(gc));
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const MultiIndex& k = basis.exponent(i);
        const long mirror = basis.index_of({k[1], k[0]});
        if (std::abs(gc(1, static_cast<Eigen::Index>(i)) - std::conj(gc(0, mirror))) > 1e-8 * gscale) {
            throw ConfigError("cubic_normal_form_2d: G is not conjugate-symmetric between its two rows");
        }
    }

    // Divisors of the eliminated monomials of row 1.
    const std::vector<MultiIndex> eliminated = {{2, 0}, {1, 1}, {0, 2}, {3, 0}, {1, 2}, {0, 3}};
    for (const auto& k : eliminated) {
        const double detuning = test.detuning(k, 0);
        if (test.resonant(detuning)) {
            std::ostringstream msg;
            msg << "cubic_normal_form_2d: internal resonance at monomial " << describe_monomial(k, 0)
                << " (detuning " << detuning << "); use the general normal form solver";
            throw ResonanceError(msg.str());
        }
    }
    if (!test.resonant(test.detuning({2, 1}, 0))) {
        throw ResonanceError("cubic_normal_form_2d: z^2 conj(z) is not resonant under the active criterion");
    }

    // G_i: element i (1-based) of the top row
    auto G = [&](int i) { return gc(0, i - 1); };
    const Complex t3 = G(3) / lambda;
    const Complex t4 = G(4) / lb;
    const Complex t5 = G(5) / (2.0 * lb - lambda);
    const Complex t6 = (2.0 * G(3) * t3 + G(4) * std::conj(t5) + G(6)) / (2.0 * lambda);
    const Complex t9 = (G(4) * t5 + 2.0 * G(5) * std::conj(t3) + G(9)) / (3.0 * lb - lambda);
    const Complex t8 =
        (2.0 * G(3) * t5 + G(4) * std::conj(t3) + G(4) * t4 + 2.0 * G(5) * std::conj(t4) + G(8)) / (2.0 * lb);
    const Complex gamma = 2.0 * G(3) * t4 + G(4) * std::conj(t4) + G(4) * t3 + 2.0 * G(5) * std::conj(t5) + G(7);

    MonomialBasis b(2, 1, 3);
    Eigen::MatrixXcd tc = Eigen::MatrixXcd::Zero(2, 9);
    tc.row(0) << 1.0, 0.0, t3, t4, t5, t6, 0.0, t8, t9;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const MultiIndex& k = b.exponent(i);
        tc(1, static_cast<Eigen::Index>(i)) = std::conj(tc(0, b.index_of({k[1], k[0]})));
    }
    Eigen::MatrixXcd nc = Eigen::MatrixXcd::Zero(2, 9);
    nc(0, 0) = lambda;
    nc(1, 1) = lb;
    nc(0, 6) = gamma;
    nc(1, 7) = std::conj(gamma);

    NormalFormModel model{ComplexMap(b, tc), ComplexMap(b, nc), lam};
    model.tol_res = options.tol_res;
    model.full_complex_criterion = test.full();
    model.resonances.push_back({0, {2, 1}, test.detuning({2, 1}, 0)});
    model.resonances.push_back({1, {1, 2}, test.detuning({1, 2}, 1)});
    for (const auto& k : eliminated) {
        const double detuning = test.detuning(k, 0);
        if (test.gray(detuning)) {
            std::ostringstream msg;
            msg << "normal form: near-resonant monomial " << describe_monomial(k, 0) << " (detuning " << detuning
                << " of |lambda|) eliminated; coefficients may be ill-conditioned";
            model.warnings.push_back(msg.str());
        }
    }
    check_residual(model, modal, options);
    return model;
}

// ---------------------------------------------------------------------------
// Inverse transformation

ComplexMap series_inverse(const ComplexMap& transform, int order) {
    const int d = transform.input_dim();
    if (order < 1) throw ConfigError("series_inverse: order must be >= 1");
    TruncatedAlgebra alg(d, order);
    ComplexMap nonlinear = transform;
    nonlinear.coefficients().leftCols(d).setZero();
    std::vector<TruncatedAlgebra::Poly> h(d);
    for (int j = 0; j < d; ++j) h[j] = alg.variable(j);
    // each pass fixes one more order of  h = zeta - T_{2:n}(h)
    for (int pass = 1; pass < order; ++pass) {
        auto c = alg.compose(nonlinear, h);
        for (int j = 0; j < d; ++j) h[j] = alg.variable(j) - c[j];
    }
    return alg.to_map(h, 1, order);
}

RegressionInverse fit_regression_inverse(const ComplexMap& transform, const Eigen::MatrixXcd& z_samples, int order) {
    if (z_samples.cols() == 0) throw ConfigError("regression inverse needs training samples");
    if (z_samples.rows() != transform.input_dim()) throw ShapeError("regression inverse: sample dimension mismatch");
    MonomialBasis basis(transform.input_dim(), 1, order);
    if (static_cast<std::size_t>(z_samples.cols()) < basis.size()) {
        throw DataError("regression inverse: fewer samples than monomials");
    }
    Eigen::MatrixXcd zeta = transform.eval(z_samples);
    auto fit = fit_polynomial(z_samples, eval_monomials(basis, zeta));
    return {ComplexMap(basis, fit.coefficients), fit.relative_residual};
}

InverseResult inverse_transform(const NormalFormModel& model, const Eigen::MatrixXcd& zeta, InverseStrategy strategy,
                                const InverseOptions& options) {
    const ComplexMap& t = model.transform;
    if (zeta.rows() != t.input_dim()) throw ShapeError("inverse_transform: point dimension mismatch");
    InverseResult out;
    out.residuals.resize(zeta.cols());
    switch (strategy) {
        case InverseStrategy::Series: {
            ComplexMap h = series_inverse(t, std::min(3, model.order()));
            out.z = h.eval(zeta);
            break;
        }
        case InverseStrategy::Regression: {
            if (model.inverse_strategy != InverseStrategy::Regression || !model.inverse_map) {
                throw ConfigError("inverse_transform: no regression inverse was fitted for this model");
            }
            out.z = model.inverse_map->eval(zeta);
            break;
        }
        case InverseStrategy::Newton: {
            ComplexMap guess = series_inverse(t, std::min(3, model.order()));
            out.z = guess.eval(zeta);
            for (Eigen::Index c = 0; c < zeta.cols(); ++c) {
                Eigen::VectorXcd z = out.z.col(c);
                const Eigen::VectorXcd target = zeta.col(c);
                bool converged = false;
                for (int it = 0; it <= options.max_iterations; ++it) {
                    Eigen::VectorXcd r = t.eval(z) - target;
                    if (r.norm() <= options.tolerance) {
                        converged = true;
                        break;
                    }
                    if (it == options.max_iterations || !r.allFinite()) break;
                    z -= t.jacobian(z).partialPivLu().solve(r);
                }
                if (!converged) {
                    std::ostringstream msg;
                    msg << "inverse_transform: Newton iteration did not converge for point " << c << " after "
                        << options.max_iterations << " iterations";
                    throw ConvergenceError(msg.str());
                }
                out.z.col(c) = z;
            }
            break;
        }
    }
    Eigen::MatrixXcd back = t.eval(out.z);
    for (Eigen::Index c = 0; c < zeta.cols(); ++c) out.residuals(c) = (back.col(c) - zeta.col(c)).norm();
    return out;
}

// ---------------------------------------------------------------------------
// Polar form

std::pair<std::vector<int>, int> canonical_phase(const std::vector<int>& phase) {
    int g = 0;
    for (int v : phase) g = std::gcd(g, std::abs(v));
    if (g == 0) return {phase, 0};
    std::vector<int> q(phase.size());
    for (std::size_t i = 0; i < phase.size(); ++i) q[i] = phase[i] / g;
    int sign = 1;
    for (int v : q) {
        if (v != 0) {
            sign = v > 0 ? 1 : -1;
            break;
        }
    }
    if (sign < 0) {
        for (int& v : q) v = -v;
    }
    return {q, sign * g};
}

std::pair<double, double> PolarNormalForm::rates(std::size_t pair, const std::vector<double>& rho,
                                                 const std::vector<double>& theta) const {
    Complex acc = 0.0;
    for (const auto& term : pairs.at(pair).terms) {
        double mag = 1.0;
        double ph = 0.0;
        for (std::size_t m = 0; m < term.rho_powers.size(); ++m) {
            mag *= std::pow(rho[m], term.rho_powers[m]);
            ph += term.phase[m] * theta[m];
        }
        acc += term.coefficient * std::polar(mag, ph);
    }
    return {acc.real(), acc.imag()};
}

namespace {

void require_single_nonresonant(const PolarNormalForm& p) {
    if (p.pairs.size() != 1 || p.resonant()) {
        throw UnsupportedError("amplitude-only damping/frequency is defined for a single non-resonant pair");
    }
}

// sum of coefficient part * rho^(a-1-shift) * (a-1)^derivative
double radial_sum(const PolarNormalForm& p, double rho, bool imag, bool derivative) {
    require_single_nonresonant(p);
    double acc = 0.0;
    for (const auto& term : p.pairs[0].terms) {
        const int e = term.rho_powers[0] - 1;
        const double coef = imag ? term.coefficient.imag() : term.coefficient.real();
        if (derivative) {
            if (e > 0) acc += coef * e * std::pow(rho, e - 1);
        } else {
            acc += coef * std::pow(rho, e);
        }
    }
    return acc;
}

}  // namespace

double PolarNormalForm::damping(double rho) const { return radial_sum(*this, rho, false, false); }
double PolarNormalForm::frequency(double rho) const { return radial_sum(*this, rho, true, false); }
double PolarNormalForm::damping_derivative(double rho) const { return radial_sum(*this, rho, false, true); }
double PolarNormalForm::frequency_derivative(double rho) const { return radial_sum(*this, rho, true, true); }

PolarNormalForm PolarNormalForm::from_polynomials(const std::vector<double>& damping_coeffs,
                                                  const std::vector<double>& frequency_coeffs) {
    const std::size_t n = std::max(damping_coeffs.size(), frequency_coeffs.size());
    if (n == 0) throw ConfigError("from_polynomials: empty coefficient lists");
    PolarPair pair;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = i < damping_coeffs.size() ? damping_coeffs[i] : 0.0;
        const double w = i < frequency_coeffs.size() ? frequency_coeffs[i] : 0.0;
        if (i == 0) pair.eigenvalue = Complex(c, w);
        if (c == 0.0 && w == 0.0 && i > 0) continue;
        pair.terms.push_back({Complex(c, w), {static_cast<int>(2 * i + 1)}, {0}});
    }
    PolarNormalForm out;
    out.pairs.push_back(pair);
    return out;
}

PolarNormalForm to_polar(const NormalFormModel& model) {
    const auto firsts = conjugate_pairs(model.eigenvalues);
    const int d = model.dim();
    const std::size_t npairs = firsts.size();
    // variable index -> (pair, +1 for z, -1 for conj z)
    std::vector<std::pair<std::size_t, int>> var(d);
    for (std::size_t m = 0; m < npairs; ++m) {
        var[firsts[m]] = {m, 1};
        var[firsts[m] + 1] = {m, -1};
    }
    std::set<std::pair<int, MultiIndex>> declared;
    for (const auto& r : model.resonances) declared.insert({r.row, r.exponent});

    PolarNormalForm out;
    std::set<std::vector<int>> phases;
    const auto& basis = model.normal_form.basis();
    const auto& coeffs = model.normal_form.coefficients();
    for (std::size_t l = 0; l < npairs; ++l) {
        const int row = firsts[l];
        PolarPair pair;
        pair.eigenvalue = model.eigenvalues(row);
        for (std::size_t i = 0; i < basis.size(); ++i) {
            const Complex c = coeffs(row, static_cast<Eigen::Index>(i));
            if (c == Complex(0.0)) continue;
            const MultiIndex& k = basis.exponent(i);
            if (basis.degree(i) == 1) {
                if (k[row] != 1) {
                    throw NumericalError("to_polar: normal form has an off-diagonal linear term (internal error)");
                }
            } else if (!declared.contains({row, k})) {
                std::ostringstream msg;
                msg << "to_polar: monomial " << describe_monomial(k, row)
                    << " is neither resonant nor declared (internal error)";
                throw NumericalError(msg.str());
            }
            PolarTerm term{c, std::vector<int>(npairs, 0), std::vector<int>(npairs, 0)};
            for (int v = 0; v < d; ++v) {
                term.rho_powers[var[v].first] += k[v];
                term.phase[var[v].first] += var[v].second * k[v];
            }
            term.phase[l] -= 1;
            auto [q, s] = canonical_phase(term.phase);
            if (s != 0) phases.insert(q);
            pair.terms.push_back(std::move(term));
        }
        out.pairs.push_back(std::move(pair));
    }
    out.resonance_phases.assign(phases.begin(), phases.end());
    return out;
}

namespace {

std::string num4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string rho_monomial(const std::vector<int>& powers, bool single) {
    std::string out;
    for (std::size_t m = 0; m < powers.size(); ++m) {
        if (powers[m] == 0) continue;
        if (!out.empty()) out += " ";
        out += single ? std::string("rho") : "rho" + std::to_string(m + 1);
        if (powers[m] > 1) out += "^" + std::to_string(powers[m]);
    }
    return out;
}

std::string signed_term(double coef, const std::string& factor, bool first) {
    std::string out;
    if (first) {
        out = coef < 0 ? "-" : "";
    } else {
        out = coef < 0 ? " - " : " + ";
    }
    out += num4(std::abs(coef));
    if (!factor.empty()) out += " " + factor;
    return out;
}

}  // namespace

std::string format_polar(const PolarNormalForm& polar) {
    std::ostringstream out;
    const bool single = polar.pairs.size() == 1;
    auto phase_name = [&](const std::vector<int>& q) {
        auto it = std::find(polar.resonance_phases.begin(), polar.resonance_phases.end(), q);
        const auto idx = static_cast<std::size_t>(it - polar.resonance_phases.begin());
        return polar.resonance_phases.size() == 1 ? std::string("psi") : "psi" + std::to_string(idx + 1);
    };
    for (std::size_t l = 0; l < polar.pairs.size(); ++l) {
        const std::string rho = single ? "rho" : "rho" + std::to_string(l + 1);
        const std::string theta = single ? "theta" : "theta" + std::to_string(l + 1);
        for (int part = 0; part < 2; ++part) {
            std::string line = part == 0 ? rho + "' = " : rho + " " + theta + "' = ";
            bool first = true;
            for (const auto& term : polar.pairs[l].terms) {
                const std::string mono = rho_monomial(term.rho_powers, single);
                auto [q, s] = canonical_phase(term.phase);
                const double re = term.coefficient.real();
                const double im = term.coefficient.imag();
                if (s == 0) {
                    line += signed_term(part == 0 ? re : im, mono, first);
                } else {
                    // Re/Im of c e^{i s psi}
                    const std::string arg = (std::abs(s) == 1 ? "" : std::to_string(std::abs(s))) + phase_name(q);
                    const double sgn = s > 0 ? 1.0 : -1.0;
                    const double a = part == 0 ? re : im;                  // cos coefficient
                    const double b = part == 0 ? -sgn * im : sgn * re;     // sin coefficient
                    std::string group = "(" + signed_term(a, "cos " + arg, true) + signed_term(b, "sin " + arg, false) +
                                        ")";
                    line += first ? group : " + " + group;
                    if (!mono.empty()) line += " " + mono;
                }
                first = false;
            }
            out << line << "\n";
        }
    }
    for (std::size_t i = 0; i < polar.resonance_phases.size(); ++i) {
        const auto& q = polar.resonance_phases[i];
        std::string line = (polar.resonance_phases.size() == 1 ? std::string("psi") : "psi" + std::to_string(i + 1)) +
                           " = ";
        bool first = true;
        for (std::size_t m = 0; m < q.size(); ++m) {
            if (q[m] == 0) continue;
            const std::string th = single ? "theta" : "theta" + std::to_string(m + 1);
            const int a = std::abs(q[m]);
            std::string coef = a == 1 ? "" : std::to_string(a) + " ";
            if (first) {
                line += (q[m] < 0 ? "-" : "") + coef + th;
            } else {
                line += (q[m] < 0 ? " - " : " + ") + coef + th;
            }
            first = false;
        }
        out << line << "\n";
    }
    return out.str();
}

}  // namespace fastssm
