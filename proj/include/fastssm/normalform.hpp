#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastssm/polybasis.hpp"

namespace fastssm {

struct NormalFormOptions {
    /// Relative near-resonance tolerance: |<k,l> - l_j| <= tol_res * |l_j|.
    double tol_res = 0.05;
    /// Use the full complex eigenvalues in the resonance test. By default only
    /// imaginary parts enter, so lightly damped oscillators still resonate.
    /// Spectra with a real eigenvalue always use the complex test.
    bool full_complex_criterion = false;
    /// Conjugacy residual bound, relative to max(1, coefficient scale).
    double residual_tolerance = 1e-10;
};

/// A monomial kept in N: output row, multi-index, and its relative detuning.
struct ResonantTerm {
    int row = 0;
    MultiIndex exponent;
    double detuning = 0.0;  // |<k,l> - l_row| / |l_row| under the active criterion
};

enum class InverseStrategy { Newton, Series, Regression };

std::string to_string(InverseStrategy s);
InverseStrategy inverse_strategy_from_string(const std::string& s);

/// z_dot = N z^{1:n} with zeta = T z^{1:n} = z + T_{2:n} z^{2:n}.
struct NormalFormModel {
    ComplexMap transform;       // T, linear block = identity
    ComplexMap normal_form;     // N, linear block = diag(eigenvalues)
    Eigen::VectorXcd eigenvalues;
    std::vector<ResonantTerm> resonances;
    double tol_res = 0.05;
    bool full_complex_criterion = false;
    double conjugacy_residual = 0.0;  // max |coefficient| of grad(T) N - G(T) through order n
    InverseStrategy inverse_strategy = InverseStrategy::Newton;
    std::optional<ComplexMap> inverse_map;  // H with z ~ H zeta^{1:n} (series or regression strategies)
    Warnings warnings;

    int dim() const { return transform.input_dim(); }
    int order() const { return transform.basis().order_hi(); }
};

/// Coefficients (orders 1..n) of grad_z(T z^{1:n}) N z^{1:n} - G (T z^{1:n})^{1:r}.
ComplexMap conjugacy_residual(const ComplexMap& transform, const ComplexMap& normal_form, const ComplexMap& modal,
                              int n);

/// Closed-form cubic normal form of one conjugate pair (lambda, conj(lambda)).
/// G must be conjugate-symmetric: row 2 mirrors row 1 with conjugated coefficients.
NormalFormModel cubic_normal_form_2d(const ComplexMap& modal, Complex lambda, const NormalFormOptions& options = {});

/// Order-by-order solution of the conjugacy equation for any dimension and order.
NormalFormModel general_normal_form(const ComplexMap& modal, const Eigen::VectorXcd& eigenvalues, int n,
                                    const NormalFormOptions& options = {});

/// Compositional inverse of T truncated at `order` (series reversion).
ComplexMap series_inverse(const ComplexMap& transform, int order);

struct RegressionInverse {
    ComplexMap map;
    double relative_residual = 0.0;
};

/// Fit z ~ H zeta^{1:order} on zeta = t(z) over the sample points (d x N, one per column).
RegressionInverse fit_regression_inverse(const ComplexMap& transform, const Eigen::MatrixXcd& z_samples, int order);

struct InverseOptions {
    int max_iterations = 50;
    double tolerance = 1e-10;  // absolute, per point, on ||t(z) - zeta||
};

struct InverseResult {
    Eigen::MatrixXcd z;
    Eigen::VectorXd residuals;  // ||t(z) - zeta|| per point
};

/// z with t(z) = zeta for each column. Newton throws ConvergenceError naming the
/// first point that does not converge; the other strategies report their residuals.
InverseResult inverse_transform(const NormalFormModel& model, const Eigen::MatrixXcd& zeta, InverseStrategy strategy,
                                const InverseOptions& options = {});

// ---------------------------------------------------------------------------
// Polar form

/// One monomial of z_l' seen in polar coordinates z_m = rho_m e^{i theta_m}:
/// rho_l' + i rho_l theta_l' gains  coefficient * prod_m rho_m^{rho_powers[m]} * e^{i <phase, theta>}.
struct PolarTerm {
    Complex coefficient;
    std::vector<int> rho_powers;  // per pair
    std::vector<int> phase;       // per pair; all zero for amplitude-only terms
};

struct PolarPair {
    Complex eigenvalue;
    std::vector<PolarTerm> terms;  // includes the linear term (eigenvalue, rho_l^1)
};

struct PolarNormalForm {
    std::vector<PolarPair> pairs;
    /// Distinct resonance phases psi = <q, theta>, q normalized (gcd 1, first nonzero entry positive).
    std::vector<std::vector<int>> resonance_phases;

    std::size_t pair_count() const { return pairs.size(); }
    bool resonant() const { return !resonance_phases.empty(); }

    /// rho_l' and rho_l theta_l' at (rho, theta).
    std::pair<double, double> rates(std::size_t pair, const std::vector<double>& rho,
                                    const std::vector<double>& theta) const;

    // Single-pair, non-resonant helpers: c(rho) = rho'/rho, omega(rho) = theta'.
    double damping(double rho) const;
    double frequency(double rho) const;
    double damping_derivative(double rho) const;
    double frequency_derivative(double rho) const;

    /// Single pair with c(rho) = sum_i c[i] rho^{2i} and omega(rho) = sum_i w[i] rho^{2i}.
    static PolarNormalForm from_polynomials(const std::vector<double>& damping_coeffs,
                                            const std::vector<double>& frequency_coeffs);
};

PolarNormalForm to_polar(const NormalFormModel& model);

/// Canonical form of a phase vector: (q, s) with phase = s * q.
std::pair<std::vector<int>, int> canonical_phase(const std::vector<int>& phase);

/// Human-readable equations in polar style, 4 significant digits.
std::string format_polar(const PolarNormalForm& polar);

}  // namespace fastssm
