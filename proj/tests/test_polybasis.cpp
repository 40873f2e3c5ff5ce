#include <doctest.h>

#include <random>

#include "fastssm/polybasis.hpp"
#include "oracle.hpp"

using namespace fastssm;

TEST_SUITE("polybasis") {

TEST_CASE("graded descending-lex ordering for d=2, orders 1..3") {
    MonomialBasis b(2, 1, 3);
    const std::vector<MultiIndex> expected = {{1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2},
                                              {3, 0}, {2, 1}, {1, 2}, {0, 3}};
    REQUIRE(b.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(b.exponent(i) == expected[i]);
        CHECK(b.index_of(expected[i]) == static_cast<long>(i));
    }
    CHECK(b.index_of({4, 0}) == -1);
    CHECK(b.index_of({0, 0}) == -1);
    CHECK(b.degree_range(2) == std::pair<std::size_t, std::size_t>{2, 5});
}

TEST_CASE("monomial counts match the binomial formula") {
    CHECK(monomial_count(2, 3) == 4);
    CHECK(monomial_count(4, 3) == 20);
    CHECK(MonomialBasis(4, 1, 3).size() == 34);
    CHECK(MonomialBasis(3, 2, 2).size() == 6);
    CHECK_THROWS_AS(enumerate_monomials(2, 0, 3), ConfigError);
}

TEST_CASE("index_of inverts exponent for larger bases") {
    MonomialBasis b(4, 1, 5);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.index_of(b.exponent(i)) == static_cast<long>(i));
}

TEST_CASE("eval_monomials evaluates products of powers") {
    MonomialBasis b(2, 1, 3);
    Eigen::MatrixXd x(2, 1);
    x << 2.0, -3.0;
    const Eigen::MatrixXd phi = eval_monomials(b, x);
    const std::vector<double> expected = {2, -3, 4, -6, 9, 8, -12, 18, -27};
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(phi(static_cast<Eigen::Index>(i), 0) == expected[i]);
}

TEST_CASE("least-squares fit recovers exact coefficients and is a minimum") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MonomialBasis b(2, 1, 3);
    Eigen::MatrixXd c(3, 9);
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = u(rng);
    Eigen::MatrixXd x(2, 200);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
    const Eigen::MatrixXd features = eval_monomials(b, x);
    Eigen::MatrixXd targets = c * features;
    auto exact = fit_polynomial(targets, features);
    CHECK((exact.coefficients - c).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(exact.rank == 9);

    // with noise, perturbing any coefficient never lowers the residual
    for (Eigen::Index i = 0; i < targets.size(); ++i) targets(i) += 0.01 * u(rng);
    auto noisy = fit_polynomial(targets, features);
    for (Eigen::Index i = 0; i < noisy.coefficients.size(); ++i) {
        for (double step : {1e-3, -1e-3}) {
            Eigen::MatrixXd perturbed = noisy.coefficients;
            perturbed(i) += step;
            CHECK((targets - perturbed * features).norm() >= noisy.residual);
        }
    }
}

TEST_CASE("rank-deficient features produce a warning") {
    Eigen::MatrixXd x(2, 50);
    x.row(0).setLinSpaced(-1, 1);
    x.row(1) = x.row(0);
    MonomialBasis b(2, 1, 1);
    auto fit = fit_polynomial(Eigen::MatrixXd(x.row(0)), eval_monomials(b, x));
    CHECK(fit.rank == 1);
    CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("jacobian matches central differences") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MonomialBasis b(3, 1, 3);
    Eigen::MatrixXd c(2, static_cast<Eigen::Index>(b.size()));
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = u(rng);
    RealMap map(b, c);
    Eigen::VectorXd x(3);
    x << 0.3, -0.2, 0.5;
    const Eigen::MatrixXd j = map.jacobian(x);
    const double h = 1e-6;
    for (int v = 0; v < 3; ++v) {
        Eigen::VectorXd xp = x, xm = x;
        xp(v) += h;
        xm(v) -= h;
        const Eigen::VectorXd fd = (map.eval(xp) - map.eval(xm)) / (2 * h);
        CHECK((fd - j.col(v)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("compose agrees with the dictionary oracle") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MonomialBasis ob(2, 1, 3), ib(2, 1, 2);
    Eigen::MatrixXcd oc(2, 9), ic(2, 5);
    for (Eigen::Index i = 0; i < oc.size(); ++i) oc(i) = Complex(u(rng), u(rng));
    for (Eigen::Index i = 0; i < ic.size(); ++i) ic(i) = Complex(u(rng), u(rng));
    ComplexMap outer(ob, oc), inner(ib, ic);
    const int order = 4;
    ComplexMap got = compose(outer, inner, order);
    std::vector<oracle::Poly> inner_p = {oracle::from_row(inner, 0), oracle::from_row(inner, 1)};
    auto want = oracle::compose(outer, inner_p, order);
    for (int r = 0; r < 2; ++r) {
        for (std::size_t i = 0; i < got.basis().size(); ++i) {
            const Complex w = want[r].count(got.basis().exponent(i)) ? want[r][got.basis().exponent(i)] : Complex(0.0);
            CHECK(std::abs(got.coefficients()(r, static_cast<Eigen::Index>(i)) - w) < 1e-12);
        }
    }
}

TEST_CASE("composition with a linear inner map is exact") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MonomialBasis ob(2, 1, 3);
    Eigen::MatrixXd oc(1, 9);
    for (Eigen::Index i = 0; i < oc.size(); ++i) oc(i) = u(rng);
    Eigen::MatrixXd a(2, 2);
    a << 0.5, -1.0, 2.0, 0.25;
    RealMap outer(ob, oc);
    RealMap composed = compose(outer, RealMap(MonomialBasis(2, 1, 1), a), 3);
    Eigen::VectorXd x(2);
    x << 0.7, -0.4;
    CHECK(std::abs(composed.eval(x)(0) - outer.eval(Eigen::VectorXd(a * x))(0)) < 1e-13);
}

TEST_CASE("truncated algebra products and derivatives") {
    TruncatedAlgebra alg(2, 3);
    const auto x = alg.variable(0);
    const auto y = alg.variable(1);
    const auto one = alg.constant(1.0);
    const auto p = alg.multiply(x + one, y + one);  // 1 + x + y + xy
    const auto& b = alg.basis();
    CHECK(p(b.index_of({0, 0})) == Complex(1.0));
    CHECK(p(b.index_of({1, 1})) == Complex(1.0));
    const auto cube = alg.multiply(alg.multiply(p, p), x);
    CHECK(cube(b.index_of({1, 0})) == Complex(1.0));
    CHECK(cube(b.index_of({2, 1})) == Complex(4.0));  // the xy coefficient of p^2
    const auto dp = alg.derivative(p, 0);  // 1 + y
    CHECK(dp(b.index_of({0, 0})) == Complex(1.0));
    CHECK(dp(b.index_of({0, 1})) == Complex(1.0));
    CHECK(dp(b.index_of({1, 0})) == Complex(0.0));
}

TEST_CASE("rebase keeps shared columns") {
    MonomialBasis b(2, 1, 2);
    Eigen::MatrixXd c(1, 5);
    c << 1, 2, 3, 4, 5;
    RealMap m(b, c);
    RealMap up = m.rebase(1, 3);
    CHECK(up.coefficients().cols() == 9);
    CHECK(up.coefficients()(0, 4) == 5);
    CHECK(up.coefficients()(0, 8) == 0);
    RealMap down = m.rebase(2, 2);
    CHECK(down.coefficients()(0, 0) == 3);
}

}
