#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fastssm/polybasis.hpp"

namespace fastssm {

/// Finite-difference weights for the `derivative`-th derivative at x0 from
/// values at `points` (Fornberg's recursion; any spacing, any order).
std::vector<double> fornberg_weights(int derivative, double x0, const std::vector<double>& points);

/// Weights of the 9-point central first-derivative stencil on a unit grid
/// (offsets -4..4), accurate to order 8.
const std::vector<double>& central_stencil_9();

struct Derivative {
    Eigen::MatrixXd values;       // d/dt of the retained columns
    Eigen::MatrixXd retained;     // input columns [first, last)
    Eigen::Index first = 0;
    Eigen::Index last = 0;
};

/// Time derivative of each row with the 9-point stencil. The first and last four
/// columns have no full stencil and are dropped from both outputs.
Derivative differentiate(const Eigen::MatrixXd& xi, double dt);

struct DynamicsFit {
    RealMap map;
    double relative_residual = 0.0;
    Warnings warnings;
};

/// R = Xi_dot (Xi^{1:r})^+.
DynamicsFit fit_reduced_dynamics(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& xi_dot, int r,
                                 const FitOptions& options = {});

/// Reduced dynamics in physical and modal coordinates.
struct ReducedModel {
    RealMap dynamics;              // R: xi_dot = R xi^{1:r}
    Eigen::MatrixXcd eigenvectors;  // W, R_1 = W diag(eigenvalues) W^{-1}
    Eigen::VectorXcd eigenvalues;   // conjugate pairs adjacent (Im > 0 first), slowest |Re| first
    ComplexMap modal;               // G: zeta_dot = G zeta^{1:r}, linear block exactly diag(eigenvalues)
    double condition = 1.0;         // condition number of W
    double residual = 0.0;          // relative regression residual of R

    int dim() const { return dynamics.input_dim(); }
    int order() const { return dynamics.basis().order_hi(); }
};

struct ModalizeOptions {
    double max_condition = 1e8;
    double pair_tolerance = 1e-8;  // |l_i - conj(l_j)| <= tol * max(1, |l_i|)
    // When given (p x d, the linear block of the manifold parametrization), each
    // eigenvector is scaled so that its observable-space image has unit norm.
    // Otherwise eigenvectors get unit norm in reduced coordinates.
    std::optional<Eigen::MatrixXd> mode_shapes;
};

/// Exact linear change of coordinates zeta = W^{-1} xi applied to R.
ReducedModel modalize(const RealMap& dynamics, const ModalizeOptions& options = {});

/// Indices (into eigenvalues) of the first member of each conjugate pair; throws
/// UnsupportedError if some eigenvalue is not part of a pair.
std::vector<int> conjugate_pairs(const Eigen::VectorXcd& eigenvalues);

}  // namespace fastssm
