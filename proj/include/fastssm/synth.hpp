#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastssm/embed.hpp"
#include "fastssm/normalform.hpp"

namespace fastssm {

/// Noise generator recorded in dataset metadata: 64-bit Mersenne Twister,
/// 53-bit uniforms, Box-Muller normals. Identical output on every platform.
inline constexpr const char* kNoiseAlgorithm = "mt19937_64/box-muller";

enum class SystemKind { Linear, StuartLandau, CubicOscillator, ResonantPair };

std::string to_string(SystemKind kind);
SystemKind system_kind_from_string(const std::string& name);

/// Ground-truth system s' = field(s) on a real state, observed through y = lift(s).
/// Complex systems use s = (Re z1, Im z1, Re z2, Im z2, ...).
struct SyntheticSystem {
    SystemKind kind;
    RealMap field;
    RealMap observable_lift;
    Eigen::VectorXcd eigenvalues;            // (l1, conj l1, l2, conj l2, ...), slowest |Re| first
    std::optional<ComplexMap> normal_form;  // z' = N z over (z1, conj z1, ...), when known in closed form

    int state_dim() const { return field.input_dim(); }
    int n_obs() const { return observable_lift.output_dim(); }
};

struct LiftOptions {
    int n_obs = 7;
    double nonlinearity = 0.0;  // scale of random quadratic lift terms (0: linear lift)
    std::uint64_t seed = 1;
};

SyntheticSystem make_linear(const std::vector<Complex>& lambdas, const LiftOptions& lift = {});
SyntheticSystem make_stuart_landau(Complex lambda, Complex gamma, const LiftOptions& lift = {});
/// x'' + 2 zeta omega x' + omega^2 x + kappa x^3 = 0 with state (x, x').
SyntheticSystem make_cubic_oscillator(double omega, double zeta, double kappa, const LiftOptions& lift = {});

/// Two pairs with a near 1:2 frequency ratio and the resonant cubic structure
///   z1' = l1 z1 + a conj(z1) z2 + b z1^2 conj(z1) + c z1 z2 conj(z2)
///   z2' = l2 z2 + e z1^2 + g z2^2 conj(z2) + h z1 conj(z1) z2
struct ResonantPairCoefficients {
    Complex lambda1{-0.01, 1.0};
    Complex lambda2{-0.04, 243.4 / 122.4};
    Complex a{0.05, 0.02};
    Complex b{-0.02, -0.1};
    Complex c{-0.03, 0.05};
    Complex e{0.04, -0.03};
    Complex g{-0.05, -0.08};
    Complex h{-0.02, 0.06};
};

SyntheticSystem make_resonant_pair(const ResonantPairCoefficients& coefficients = {}, const LiftOptions& lift = {});

/// Real state for complex pair amplitudes z = (z1, z2, ...) (first members only).
Eigen::VectorXd state_from_pairs(const Eigen::VectorXcd& z);

struct SimulateOptions {
    double rtol = 1e-11;
    double atol = 1e-14;
    double noise = 0.0;  // relative standard deviation against the RMS of the clean signal
    std::uint64_t seed = 0;
    double bound = 1e6;  // divergence threshold on the state norm
};

/// Clean state samples (state_dim x N) at `times`.
Eigen::MatrixXd simulate_state(const SyntheticSystem& system, const Eigen::VectorXd& s0, const Eigen::VectorXd& times,
                               const SimulateOptions& options = {});

Trajectory simulate(const SyntheticSystem& system, const Eigen::VectorXd& s0, double horizon, double dt,
                    const SimulateOptions& options = {});

/// Initial states with pair amplitudes drawn uniformly in [0.5, 1] * radius and uniform phases.
std::vector<Eigen::VectorXd> random_initial_states(const SyntheticSystem& system, int count, double radius,
                                                   std::uint64_t seed);

/// The normal form a fit should recover. With `normalized`, coordinates are
/// scaled so that each mode's observable image has unit norm and its largest
/// component is real positive, which matches the eigenvector convention of modalize
/// for a linear lift without delay embedding.
NormalFormModel ground_truth_normal_form(const SyntheticSystem& system, bool normalized = true);

/// Seeded standard normal samples with kNoiseAlgorithm.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed);
    double operator()();
    double uniform();

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

}  // namespace fastssm
