#include <doctest.h>

#include <cmath>
#include <random>

#include "fastssm/predict.hpp"
#include "fastssm/reduced.hpp"

using namespace fastssm;

TEST_SUITE("reduced") {

TEST_CASE("nine-point stencil weights") {
    const auto& w = central_stencil_9();
    REQUIRE(w.size() == 9);
    const double expected[9] = {1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0, 4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280};
    for (int i = 0; i < 9; ++i) CHECK(w[i] == doctest::Approx(expected[i]).epsilon(1e-14));
    // Fornberg agrees with textbook forward-difference weights
    const auto fwd = fornberg_weights(1, 0.0, {0.0, 1.0, 2.0});
    CHECK(fwd[0] == doctest::Approx(-1.5));
    CHECK(fwd[1] == doctest::Approx(2.0));
    CHECK(fwd[2] == doctest::Approx(-0.5));
    CHECK_THROWS_AS(fornberg_weights(2, 0.0, {0.0, 1.0}), ConfigError);
}

TEST_CASE("differentiation is exact for degree-8 polynomials and drops the edges") {
    const double dt = 0.05;
    const Eigen::VectorXd t = sample_times(3.0, dt);
    Eigen::MatrixXd y(2, t.size());
    for (Eigen::Index j = 0; j < t.size(); ++j) {
        y(0, j) = std::pow(t(j) - 1.0, 8);
        y(1, j) = 3.0 * t(j) - 2.0;
    }
    const auto der = differentiate(y, dt);
    CHECK(der.first == 4);
    CHECK(der.last == t.size() - 4);
    CHECK(der.values.cols() == t.size() - 8);
    CHECK(der.retained.cols() == der.values.cols());
    for (Eigen::Index j = 0; j < der.values.cols(); ++j) {
        const double x = t(j + der.first);
        CHECK(der.values(0, j) == doctest::Approx(8.0 * std::pow(x - 1.0, 7)).epsilon(1e-9).scale(1.0));
        CHECK(der.values(1, j) == doctest::Approx(3.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(differentiate(y.leftCols(8), dt), DataError);
}

TEST_CASE("dynamics of a known polynomial vector field are recovered") {
    // xi' = A xi + quadratic + cubic terms, sampled at random states
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MonomialBasis b(2, 1, 3);
    Eigen::MatrixXd c(2, 9);
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = u(rng);
    RealMap field(b, c);
    Eigen::MatrixXd xi(2, 300);
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = u(rng);
    const auto fit = fit_reduced_dynamics(xi, field.eval(xi), 3);
    CHECK((fit.map.coefficients() - c).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(fit.relative_residual < 1e-12);
    CHECK_THROWS_AS(fit_reduced_dynamics(xi, field.eval(xi).leftCols(10), 3), ShapeError);
}

TEST_CASE("modalize diagonalizes the linear part and orders modes") {
    // two damped oscillators, the slower-decaying one listed second
    Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
    a.block<2, 2>(0, 0) << -0.3, 2.0, -2.0, -0.3;
    a.block<2, 2>(2, 2) << -0.05, 1.0, -1.0, -0.05;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Matrix4d s;
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = u(rng);
    s += 3.0 * Eigen::Matrix4d::Identity();
    const Eigen::Matrix4d r1 = s * a * s.inverse();

    MonomialBasis b(4, 1, 3);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(4, static_cast<Eigen::Index>(b.size()));
    c.leftCols(4) = r1;
    for (Eigen::Index i = 0; i < 4; ++i) {
        for (Eigen::Index j = 4; j < c.cols(); ++j) c(i, j) = 0.1 * u(rng);
    }
    RealMap dynamics(b, c);
    const auto model = modalize(dynamics);

    REQUIRE(model.eigenvalues.size() == 4);
    CHECK(std::abs(model.eigenvalues(0) - Complex(-0.05, 1.0)) < 1e-10);
    CHECK(std::abs(model.eigenvalues(1) - Complex(-0.05, -1.0)) < 1e-10);
    CHECK(std::abs(model.eigenvalues(2) - Complex(-0.3, 2.0)) < 1e-10);
    CHECK(conjugate_pairs(model.eigenvalues) == std::vector<int>{0, 2});

    // R_1 = W diag(lambda) W^{-1}
    const Eigen::MatrixXcd rebuilt =
        model.eigenvectors * model.eigenvalues.asDiagonal() * model.eigenvectors.inverse();
    CHECK((rebuilt - r1.cast<Complex>()).cwiseAbs().maxCoeff() < 1e-11);

    // G(zeta) = W^{-1} R(W zeta) at random points
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXcd zeta(4);
        zeta(0) = Complex(u(rng), u(rng));
        zeta(1) = std::conj(zeta(0));
        zeta(2) = Complex(u(rng), u(rng));
        zeta(3) = std::conj(zeta(2));
        const Eigen::VectorXcd xi = model.eigenvectors * zeta;
        CHECK(xi.imag().cwiseAbs().maxCoeff() < 1e-10);
        const Eigen::VectorXd rx = dynamics.eval(Eigen::VectorXd(xi.real()));
        const Eigen::VectorXcd want = model.eigenvectors.inverse() * rx.cast<Complex>();
        CHECK((model.modal.eval(zeta) - want).cwiseAbs().maxCoeff() < 1e-11);
    }
}

TEST_CASE("near-defective linear parts are rejected") {
    Eigen::MatrixXd c(2, 2);
    c << 1e-9, 1.0, -1e-14, 0.0;  // eigenvalues +-1e-7 i with nearly parallel eigenvectors
    RealMap dynamics(MonomialBasis(2, 1, 1), c);
    ModalizeOptions opts;
    opts.max_condition = 1e4;
    CHECK_THROWS_AS(modalize(dynamics, opts), ConditioningError);
}

TEST_CASE("conjugate pair check") {
    Eigen::VectorXcd l(2);
    l << Complex(-0.1, 1.0), Complex(-0.1, -1.0);
    CHECK(conjugate_pairs(l) == std::vector<int>{0});
    l(1) = Complex(-0.2, 0.0);
    CHECK_THROWS_AS(conjugate_pairs(l), UnsupportedError);
}

}
