#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastssm/embed.hpp"
#include "fastssm/manifold.hpp"
#include "fastssm/normalform.hpp"
#include "fastssm/reduced.hpp"

namespace fastssm {

/// The fitted chain: embedding -> SSM -> modal reduced dynamics -> normal form.
struct FullModel {
    EmbeddingConfig embedding;
    int n_obs = 1;
    SsmModel ssm;
    ReducedModel reduced;
    NormalFormModel normal_form;
    PolarNormalForm polar;
    std::vector<double> training_nmte;  // one per training trajectory
    double training_amplitude = 0.0;    // largest |z| met on the training data

    int dim() const { return ssm.dim(); }
    int observable_dim() const { return ssm.observable_dim(); }
};

/// Throws ShapeError when the dimensions along the chain do not match.
void check_consistency(const FullModel& model);

/// Observable-space function whose magnitude defines the amplitude of a state.
struct AmplitudeFunctional {
    enum class Kind { Coordinate, BlockNorm };
    Kind kind = Kind::Coordinate;
    int first = 0;  // first embedded row
    int count = 1;  // BlockNorm: number of rows

    double operator()(const Eigen::VectorXd& y) const;

    static AmplitudeFunctional coordinate(int row) { return {Kind::Coordinate, row, 1}; }
    static AmplitudeFunctional block_norm(int first, int count) { return {Kind::BlockNorm, first, count}; }
    /// "coord:<row>" or "block:<first>:<count>".
    static AmplitudeFunctional parse(const std::string& text);
    std::string to_string() const;
};

/// Solution of z' = field(z) at `times` (first entry = initial time), adaptive
/// Dormand-Prince with dense output. Throws InstabilityError if |z| exceeds `bound`.
Eigen::MatrixXcd integrate(const ComplexMap& field, const Eigen::VectorXcd& z0, const Eigen::VectorXd& times,
                           double rtol, double atol, double bound = 1e8);

/// Uniform sample times 0, dt, ..., up to horizon.
Eigen::VectorXd sample_times(double horizon, double dt);

/// Modal coordinates zeta and observables y for normal-form states z (one per column).
Eigen::MatrixXcd modal_from_normal(const FullModel& model, const Eigen::MatrixXcd& z);
/// Real observables M (W zeta); `imag_residue`, when given, receives max ||Im xi|| / ||xi||.
Eigen::MatrixXd observables_from_modal(const FullModel& model, const Eigen::MatrixXcd& zeta,
                                       double* imag_residue = nullptr);
/// Normal-form coordinates of embedded observable snapshots (one per column).
Eigen::MatrixXcd normal_from_observables(const FullModel& model, const Eigen::MatrixXd& y);

struct PredictOptions {
    double rtol = 1e-9;
    double atol = 1e-13;
    double amplitude_factor = 1.5;  // warn when |z0| > factor * training amplitude
};

struct Prediction {
    Trajectory trajectory;  // embedded observables
    Eigen::MatrixXcd z;     // normal-form states
    Warnings warnings;
};

Prediction predict_decay(const FullModel& model, const Eigen::VectorXd& y0, double horizon,
                         const PredictOptions& options = {});

/// sum_j ||pred_j - ref_j|| / (N max_j ||ref_j||), one sample per column.
double nmte(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& prediction);
double nmte(const Trajectory& reference, const Trajectory& prediction);

/// max over theta of |alpha(y)| on the curve z = (rho e^{i theta}, rho e^{-i theta}).
double amplitude_map(const FullModel& model, double rho, const AmplitudeFunctional& alpha, int theta_grid = 128);

struct Backbone {
    std::vector<double> rho;
    std::vector<double> omega;      // rad/s
    std::vector<double> amplitude;  // via alpha
    AmplitudeFunctional alpha;
};

Backbone backbone(const FullModel& model, double rho_max, int n_points, const AmplitudeFunctional& alpha,
                  int theta_grid = 128);

/// f with f^2 = c(rho)^2 rho^2 + (omega(rho) - Omega)^2 rho^2.
double calibrate_forcing(const PolarNormalForm& polar, double omega_cal, double rho_cal);

struct Calibration {
    double omega = 0.0;
    double u = 0.0;
    double rho = 0.0;
    double f = 0.0;
};

/// Normal-form amplitude of a delay-embedded cosine of amplitude u on observable
/// channel 0 (other channels zero), averaged over one period of phases.
double calibration_amplitude(const FullModel& model, double omega_cal, double u_cal, int n_phases = 64);
Calibration calibrate_forcing(const FullModel& model, double omega_cal, double u_cal);

struct FrcPoint {
    double omega = 0.0;  // rad/s
    double rho = 0.0;
    double psi = 0.0;    // rad
    double amplitude = 0.0;
    bool stable = false;
    int branch = 1;      // sign in front of the square root
};

struct Frc {
    double f = 0.0;
    std::vector<FrcPoint> points;
    Warnings diagnostics;
};

struct FrcOptions {
    double omega_min = -std::numeric_limits<double>::infinity();
    double omega_max = std::numeric_limits<double>::infinity();
    double rho_max = 2.0;
    int n_rho = 201;  // uniform grid on [0, rho_max]; rho = 0 is skipped
    int theta_grid = 128;
};

/// Fixed points of the forced polar system swept over rho0. Amplitudes are rho0.
Frc frc(const PolarNormalForm& polar, double f, const FrcOptions& options = {});
/// Same, with observable amplitudes from amplitude_map.
Frc frc(const FullModel& model, double f, const AmplitudeFunctional& alpha, const FrcOptions& options = {});

/// (rho', psi') of the forced polar system at an FRC point; both vanish on the curve.
std::pair<double, double> frc_residual(const PolarNormalForm& polar, double f, const FrcPoint& point);

}  // namespace fastssm
