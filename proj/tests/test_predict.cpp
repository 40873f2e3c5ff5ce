#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fastssm/predict.hpp"

using namespace fastssm;

namespace {

// Single oscillator with z' = lambda z + gamma z^2 conj(z), identity near-identity
// transform, W = [[1, 1], [-i, i]] (so xi = (2 Re z, 2 Im z)) and observables y = xi
// plus an optional cubic term in the first channel.
FullModel oscillator(Complex lambda, Complex gamma, double cubic_obs = 0.0) {
    const Complex i(0.0, 1.0);
    MonomialBasis b3(2, 1, 3);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 9);
    m(0, 0) = 1.0;
    m(1, 1) = 1.0;
    m(0, 8) = cubic_obs;
    SsmModel ssm{Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(2), RealMap(b3, m)};

    Eigen::MatrixXcd w(2, 2);
    w << 1.0, 1.0, -i, i;
    Eigen::VectorXcd lam(2);
    lam << lambda, std::conj(lambda);
    Eigen::MatrixXd r1(2, 2);
    r1 << lambda.real(), -lambda.imag(), lambda.imag(), lambda.real();
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(2, 2);
    g.diagonal() = lam;
    ReducedModel reduced{RealMap(MonomialBasis(2, 1, 1), r1), w, lam, ComplexMap(MonomialBasis(2, 1, 1), g)};

    Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(2, 9);
    t(0, 0) = 1.0;
    t(1, 1) = 1.0;
    Eigen::MatrixXcd n = Eigen::MatrixXcd::Zero(2, 9);
    n(0, 0) = lambda;
    n(1, 1) = std::conj(lambda);
    n(0, 6) = gamma;
    n(1, 7) = std::conj(gamma);
    NormalFormModel nf{ComplexMap(b3, t), ComplexMap(b3, n), lam};
    nf.resonances = {{0, {2, 1}, 0.0}, {1, {1, 2}, 0.0}};
    PolarNormalForm polar = to_polar(nf);
    return FullModel{{1, 1, 0.01}, 2, ssm, reduced, nf, polar, {}, 1.0};
}

}  // namespace

TEST_SUITE("predict") {

TEST_CASE("nmte of simple trajectories") {
    Eigen::MatrixXd ref(1, 4), pred(1, 4);
    ref << 1.0, -1.0, 0.5, 0.0;
    pred << 1.1, -0.9, 0.6, 0.1;
    CHECK(nmte(ref, pred) == doctest::Approx(0.1));
    CHECK(nmte(3.0 * ref, 3.0 * pred) == doctest::Approx(0.1));
    // invariant under a common orthogonal transformation
    Eigen::MatrixXd r2(2, 3), p2(2, 3);
    r2 << 1.0, 0.0, 2.0, 0.5, -1.0, 0.3;
    p2 << 1.1, 0.2, 1.9, 0.4, -0.8, 0.3;
    Eigen::Matrix2d q;
    q << std::cos(0.4), -std::sin(0.4), std::sin(0.4), std::cos(0.4);
    CHECK(nmte(q * r2, q * p2) == doctest::Approx(nmte(r2, p2)).epsilon(1e-12));
    CHECK(nmte(r2, r2) == 0.0);
    CHECK_THROWS_AS(nmte(Eigen::MatrixXd::Zero(2, 3), p2), DataError);
    CHECK_THROWS(nmte(r2, p2.leftCols(2)));
}

TEST_CASE("amplitude functional parsing") {
    const auto a = AmplitudeFunctional::parse("block:2:3");
    CHECK(a.kind == AmplitudeFunctional::Kind::BlockNorm);
    CHECK(a.first == 2);
    CHECK(a.count == 3);
    CHECK(a.to_string() == "block:2:3");
    CHECK(AmplitudeFunctional::parse("coord:4").to_string() == "coord:4");
    CHECK_THROWS_AS(AmplitudeFunctional::parse("norm"), ConfigError);
    Eigen::VectorXd y(3);
    y << 3.0, -4.0, 1.0;
    CHECK(AmplitudeFunctional::block_norm(0, 2)(y) == doctest::Approx(5.0));
    CHECK(AmplitudeFunctional::coordinate(1)(y) == -4.0);
    CHECK_THROWS_AS(AmplitudeFunctional::coordinate(3)(y), ConfigError);
}

TEST_CASE("sample times") {
    const auto t = sample_times(1.0, 0.1);
    CHECK(t.size() == 11);
    CHECK(t(10) == doctest::Approx(1.0));
}

TEST_CASE("linear prediction matches the closed form") {
    const Complex lambda(-0.1, 2.0);
    const auto model = oscillator(lambda, 0.0);
    CHECK_NOTHROW(check_consistency(model));
    const Complex z0(0.3, -0.2);
    Eigen::VectorXd y0(2);
    y0 << 2.0 * z0.real(), 2.0 * z0.imag();
    const auto pred = predict_decay(model, y0, 10.0);
    CHECK(pred.warnings.empty());
    double worst = 0.0;
    for (Eigen::Index j = 0; j < pred.trajectory.times.size(); ++j) {
        const Complex z = z0 * std::exp(lambda * pred.trajectory.times(j));
        worst = std::max({worst, std::abs(pred.trajectory.samples(0, j) - 2.0 * z.real()),
                          std::abs(pred.trajectory.samples(1, j) - 2.0 * z.imag())});
    }
    CHECK(worst < 1e-6 * std::abs(z0));

    const auto rest = predict_decay(model, Eigen::VectorXd::Zero(2), 1.0);
    CHECK(rest.trajectory.samples.cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd far = 10.0 * y0 / y0.norm();
    CHECK_FALSE(predict_decay(model, far, 1.0).warnings.empty());
}

TEST_CASE("cubic prediction follows the Bernoulli solution") {
    // |z|^2 obeys a logistic-type equation: r' = 2 a r + 2 b r^2 with r = |z|^2
    const Complex lambda(-0.1, 2.0), gamma(-0.2, 0.5);
    const auto model = oscillator(lambda, gamma);
    Eigen::VectorXd y0(2);
    y0 << 1.2, 0.0;
    const auto pred = predict_decay(model, y0, 8.0);
    const double a = lambda.real(), b = gamma.real(), r0 = 0.36;
    for (Eigen::Index j = 0; j < pred.z.cols(); j += 50) {
        const double t = pred.trajectory.times(j);
        const double e = std::exp(2.0 * a * t);
        const double r = r0 * e / (1.0 - b * r0 * (e - 1.0) / a);
        CHECK(std::norm(pred.z(0, j)) == doctest::Approx(r).epsilon(1e-8));
    }
}

TEST_CASE("amplitude map and its resolution") {
    const auto linear = oscillator(Complex(-0.1, 2.0), 0.0);
    CHECK(amplitude_map(linear, 0.4, AmplitudeFunctional::coordinate(0)) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(amplitude_map(linear, 0.4, AmplitudeFunctional::block_norm(0, 2)) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(amplitude_map(linear, 0.0, AmplitudeFunctional::coordinate(0)) == 0.0);

    const auto curved = oscillator(Complex(-0.1, 2.0), 0.0, 0.3);
    for (double rho : {0.2, 0.7, 1.3}) {
        const double coarse = amplitude_map(curved, rho, AmplitudeFunctional::coordinate(0), 128);
        const double fine = amplitude_map(curved, rho, AmplitudeFunctional::coordinate(0), 4096);
        CHECK(coarse == doctest::Approx(fine).epsilon(1e-6));
    }
}

TEST_CASE("backbone of a softening oscillator") {
    const auto model = oscillator(Complex(-0.062, 7.81), Complex(-0.019, -0.628));
    const auto bb = backbone(model, 1.0, 11, AmplitudeFunctional::coordinate(0));
    REQUIRE(bb.rho.size() == 11);
    CHECK(bb.rho.back() == 1.0);
    CHECK(bb.omega.back() == doctest::Approx(7.182));
    CHECK(bb.omega.front() == doctest::Approx(7.81));
    for (std::size_t i = 1; i < bb.omega.size(); ++i) {
        CHECK(bb.omega[i] < bb.omega[i - 1]);
        CHECK(bb.amplitude[i] == doctest::Approx(2.0 * bb.rho[i]));
    }
}

TEST_CASE("forcing calibration") {
    const auto polar = PolarNormalForm::from_polynomials({-0.062, -0.019}, {7.81, -0.628});
    CHECK(calibrate_forcing(polar, 7.182, 1.0) == doctest::Approx(0.081).epsilon(1e-12));
    const auto linear = PolarNormalForm::from_polynomials({-0.1}, {2.0});
    CHECK(calibrate_forcing(linear, 2.0, 0.5) == doctest::Approx(0.05));
    CHECK(calibrate_forcing(linear, 2.3, 0.5) == doctest::Approx(0.5 * std::hypot(0.1, 0.3)));
    CHECK_THROWS_AS(calibrate_forcing(linear, 2.0, 0.0), CalibrationError);

    // channel-0 cosine u cos(phi) maps to z = u cos(phi) / 2 under W^{-1}
    const auto model = oscillator(Complex(-0.1, 2.0), 0.0);
    double mean_cos = 0.0;
    for (int i = 0; i < 64; ++i) mean_cos += std::abs(std::cos(2.0 * std::numbers::pi * i / 64)) / 64;
    const auto cal = calibrate_forcing(model, 2.0, 0.3);
    CHECK(cal.rho == doctest::Approx(0.15 * mean_cos).epsilon(1e-10));
    CHECK(cal.f == doctest::Approx(0.1 * cal.rho).epsilon(1e-10));
}

TEST_CASE("linear forced response") {
    const double c = -0.1, w = 2.0, f = 0.05;
    const auto polar = PolarNormalForm::from_polynomials({c}, {w});
    const auto curve = frc(polar, f);
    REQUIRE_FALSE(curve.points.empty());
    double rho_peak = 0.0;
    for (const auto& pt : curve.points) {
        const double detune = std::sqrt(std::max(0.0, f * f / (pt.rho * pt.rho) - c * c));
        CHECK(pt.omega == doctest::Approx(w + pt.branch * detune).epsilon(1e-12));
        CHECK(pt.stable);
        CHECK(pt.amplitude == pt.rho);
        const auto [a, b] = frc_residual(polar, f, pt);
        CHECK(std::abs(a) < 1e-12);
        CHECK(std::abs(b) < 1e-12);
        rho_peak = std::max(rho_peak, pt.rho);
    }
    // the peak sits at f / |c|, within one grid step
    CHECK(rho_peak <= f / std::abs(c) + 1e-12);
    CHECK(rho_peak > f / std::abs(c) - 2.0 / 200);
    CHECK_THROWS_AS(frc(polar, 0.0), ConfigError);

    FrcOptions window;
    window.omega_min = 1.9;
    window.omega_max = 2.0;
    for (const auto& pt : frc(polar, f, window).points) {
        CHECK(pt.omega >= 1.9);
        CHECK(pt.omega <= 2.0);
    }
}

TEST_CASE("forced response peaks on the backbone") {
    const auto polar = PolarNormalForm::from_polynomials({-0.062, -0.019}, {7.81, -0.628});
    const double f = 0.081;
    FrcOptions opts;
    opts.n_rho = 2001;
    const auto curve = frc(polar, f, opts);
    const FrcPoint* peak = nullptr;
    for (const auto& pt : curve.points) {
        if (!peak || pt.rho > peak->rho) peak = &pt;
    }
    REQUIRE(peak != nullptr);
    CHECK(peak->rho == doctest::Approx(1.0).epsilon(2e-3));
    CHECK(std::abs(peak->omega - polar.frequency(peak->rho)) < 0.01);
    // softening curves have an unstable middle branch near the peak
    bool unstable = false;
    for (const auto& pt : curve.points) unstable = unstable || !pt.stable;
    CHECK(unstable);
}

TEST_CASE("model forced response uses observable amplitudes") {
    const auto model = oscillator(Complex(-0.1, 2.0), 0.0);
    const auto curve = frc(model, 0.05, AmplitudeFunctional::coordinate(0));
    REQUIRE_FALSE(curve.points.empty());
    for (const auto& pt : curve.points) CHECK(pt.amplitude == doctest::Approx(2.0 * pt.rho).epsilon(1e-12));
}

}
