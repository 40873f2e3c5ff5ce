#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fastssm/manifold.hpp"

using namespace fastssm;

namespace {

// Samples of the graph y = (x1, x2, 0.3 x1^2 - 0.2 x2^2, 0.5 x1 x2^2).
Eigen::MatrixXd graph_samples(int n, unsigned seed, Eigen::MatrixXd* xi_out = nullptr) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    Eigen::MatrixXd x(2, n), y(4, n);
    for (int j = 0; j < n; ++j) {
        x(0, j) = u(rng);
        x(1, j) = u(rng);
        y(0, j) = x(0, j);
        y(1, j) = x(1, j);
        y(2, j) = 0.3 * x(0, j) * x(0, j) - 0.2 * x(1, j) * x(1, j);
        y(3, j) = 0.5 * x(0, j) * x(1, j) * x(1, j);
    }
    if (xi_out) *xi_out = x;
    return y;
}

}  // namespace

TEST_SUITE("manifold") {

TEST_CASE("tangent space of planar data is exact and normalized") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    Eigen::MatrixXd basis(5, 2);
    for (Eigen::Index i = 0; i < basis.size(); ++i) basis(i) = g(rng);
    Eigen::MatrixXd coords(2, 300);
    for (Eigen::Index i = 0; i < coords.size(); ++i) coords(i) = g(rng);
    const Eigen::MatrixXd y = basis * coords;
    const auto fit = fit_tangent_space(y, 2);
    // reduced coordinates are scaled so each row has max |value| 1
    const Eigen::MatrixXd xi = reduce(y, fit.tangent);
    CHECK(xi.row(0).cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(xi.row(1).cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.energy == doctest::Approx(1.0).epsilon(1e-12));
    // sign convention: largest-magnitude entry of each left vector positive
    for (int j = 0; j < 2; ++j) {
        Eigen::Index imax = 0;
        fit.left_vectors.col(j).cwiseAbs().maxCoeff(&imax);
        CHECK(fit.left_vectors(imax, j) > 0.0);
    }
    // linear reconstruction recovers the data exactly
    const auto param = fit_parametrization(y, xi, 1);
    CHECK(param.reconstruction_error < 1e-12);
    CHECK(principal_angles(param.map.block(1), basis).maxCoeff() < 1e-10);
}

TEST_CASE("rank deficiency is reported") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(4, 50);
    y.row(0).setLinSpaced(-1, 1);
    y.row(1) = 2 * y.row(0);
    CHECK_THROWS_AS(fit_tangent_space(y, 2), RankError);
    CHECK_THROWS_AS(fit_tangent_space(y, 5), RankError);
}

TEST_CASE("polynomial graph is recovered to machine precision") {
    Eigen::MatrixXd x;
    const Eigen::MatrixXd y = graph_samples(400, 7, &x);
    const auto param = fit_parametrization(y, x, 3);
    CHECK(param.reconstruction_error < 1e-12);
    Eigen::MatrixXd x_new;
    const Eigen::MatrixXd y_new = graph_samples(20, 99, &x_new);
    CHECK((lift(param.map, x_new) - y_new).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fit_ssm on a curved graph reports small errors") {
    const Eigen::MatrixXd y = graph_samples(400, 3);
    const auto model = fit_ssm(y, 2, 3);
    CHECK(model.reconstruction_error < 0.05);
    CHECK(model.principal_angle < 0.2);
    CHECK(model.dim() == 2);
    CHECK(model.order() == 3);
    CHECK(model.observable_dim() == 4);
}

TEST_CASE("too few samples for the manifold order") {
    Eigen::MatrixXd x;
    const Eigen::MatrixXd y = graph_samples(8, 1, &x);
    CHECK_THROWS_AS(fit_parametrization(y, x, 3), DataError);
}

TEST_CASE("principal angles of known planes") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 1), b = Eigen::MatrixXd::Zero(3, 1);
    a(0, 0) = 1.0;
    const double angle = 0.3;
    b(0, 0) = std::cos(angle);
    b(1, 0) = std::sin(angle);
    CHECK(principal_angles(a, b)(0) == doctest::Approx(angle).epsilon(1e-12));
    CHECK(principal_angles(a, a)(0) < 1e-7);
    b(0, 0) = 1e-9;
    b(1, 0) = 1.0;
    CHECK(principal_angles(a, b)(0) == doctest::Approx(std::numbers::pi / 2 - 1e-9).epsilon(1e-12));
}

TEST_CASE("folding check flags a graph that is not single-valued") {
    // xi runs forward then turns back at s = 0.5, so distant points share reduced coordinates
    const int n = 400;
    Eigen::MatrixXd xi(1, n), xi_ok(1, n), y(2, n);
    for (int j = 0; j < n; ++j) {
        const double s = -3.0 + 4.0 * j / (n - 1);
        xi(0, j) = s < 0.5 ? s : 1.0 - s;
        xi_ok(0, j) = s;
        y(0, j) = xi(0, j);
        y(1, j) = s;
    }
    CHECK_FALSE(check_folding(xi, y).empty());
    CHECK(check_folding(xi_ok, y).empty());
}

}
