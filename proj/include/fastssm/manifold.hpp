#pragma once

#include <Eigen/Dense>

#include "fastssm/embed.hpp"
#include "fastssm/polybasis.hpp"

namespace fastssm {

/// Truncated-SVD tangent space of a snapshot matrix.
struct TangentFit {
    Eigen::MatrixXd tangent;          // V = U_d S_d^{-1}, columns rescaled by column_scale
    Eigen::MatrixXd left_vectors;     // U_d, sign-fixed (largest-magnitude entry positive)
    Eigen::VectorXd singular_values;  // all singular values of Y, descending
    Eigen::VectorXd column_scale;     // max |column of right singular vectors|; V column j was divided by it
    double energy = 0.0;              // share of sum(sigma^2) captured by the leading d
};

/// Tangent space, manifold parametrization and fit diagnostics of a fitted SSM.
struct SsmModel {
    Eigen::MatrixXd tangent;  // V, p x d
    Eigen::VectorXd column_scale;
    RealMap parametrization;  // M over orders 1..m, p outputs
    Eigen::VectorXd singular_values;
    double energy = 0.0;
    double reconstruction_error = 0.0;  // ||Y - M Xi^{1:m}||_F / ||Y||_F on the training data
    double principal_angle = 0.0;       // largest angle (rad) between span(M_1) and span(U_d)
    Warnings warnings;

    int dim() const { return static_cast<int>(tangent.cols()); }
    int order() const { return parametrization.basis().order_hi(); }
    int observable_dim() const { return static_cast<int>(tangent.rows()); }
};

TangentFit fit_tangent_space(const Eigen::MatrixXd& y, int d);
inline TangentFit fit_tangent_space(const SnapshotMatrix& y, int d) { return fit_tangent_space(y.data, d); }

/// Reduced coordinates Xi = V^T Y (no re-orthogonalization).
Eigen::MatrixXd reduce(const Eigen::MatrixXd& y, const Eigen::MatrixXd& tangent);

struct ParametrizationFit {
    RealMap map;
    double reconstruction_error = 0.0;
    Warnings warnings;
};

/// Joint least-squares fit of y ~ M xi^{1:m}, linear block included.
ParametrizationFit fit_parametrization(const Eigen::MatrixXd& y, const Eigen::MatrixXd& xi, int m,
                                       const FitOptions& options = {});

Eigen::MatrixXd lift(const RealMap& parametrization, const Eigen::MatrixXd& xi);
inline Eigen::MatrixXd lift(const SsmModel& model, const Eigen::MatrixXd& xi) {
    return lift(model.parametrization, xi);
}

/// Principal angles (radians, ascending) between the column spaces of a and b.
Eigen::VectorXd principal_angles(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Nearest-neighbour consistency of xi -> y on (a subsample of) the training data.
/// Returns warnings when reduced-space neighbours are far apart in observable space.
Warnings check_folding(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& y, Eigen::Index max_points = 400);

struct SsmFitOptions {
    FitOptions regression;
    double angle_warning = 0.1;  // rad
    bool check_folding = true;
};

/// fit_tangent_space -> reduce -> fit_parametrization with diagnostics.
SsmModel fit_ssm(const Eigen::MatrixXd& y, int d, int m, const SsmFitOptions& options = {});

}  // namespace fastssm
