#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "fastssm/embed.hpp"
#include "fastssm/predict.hpp"

using namespace fastssm;

namespace {

Trajectory make_signal(double dt, double horizon, const std::function<double(double)>& f) {
    Trajectory t;
    t.times = sample_times(horizon, dt);
    t.samples.resize(1, t.times.size());
    for (Eigen::Index j = 0; j < t.times.size(); ++j) t.samples(0, j) = f(t.times(j));
    return t;
}

}  // namespace

TEST_SUITE("embed") {

TEST_CASE("delay embedding stacks shifted copies per channel") {
    Trajectory t;
    t.times = Eigen::VectorXd::LinSpaced(6, 0.0, 0.5);
    t.samples.resize(2, 6);
    t.samples.row(0) << 0, 1, 2, 3, 4, 5;
    t.samples.row(1) << 10, 11, 12, 13, 14, 15;
    const auto emb = delay_embed(t, {2, 2, 0.1});
    REQUIRE(emb.rows() == 4);
    REQUIRE(emb.cols() == 4);
    CHECK(emb.data(0, 0) == 0);
    CHECK(emb.data(1, 0) == 2);
    CHECK(emb.data(2, 0) == 10);
    CHECK(emb.data(3, 3) == 15);
    CHECK(emb.times(3) == doctest::Approx(0.3));
    CHECK(undelayed_rows(emb.data, 2, 2).row(1)(2) == 12);
}

TEST_CASE("too-short series are rejected") {
    Trajectory t;
    t.times = Eigen::VectorXd::LinSpaced(6, 0.0, 0.5);
    t.samples = Eigen::MatrixXd::Ones(1, 6);
    // at least two snapshots
    CHECK(min_embedding_length(3, 2) == 6);
    CHECK(delay_embed(t, {3, 2, 0.1}).cols() == 2);
    CHECK_THROWS_AS(delay_embed(t, {3, 3, 0.1}), DataError);
}

TEST_CASE("non-uniform sampling is reported with its row") {
    Trajectory t;
    t.times = Eigen::VectorXd::LinSpaced(200, 0.0, 19.9);
    t.times.tail(101).array() += 0.1;
    t.samples = Eigen::MatrixXd::Zero(1, 200);
    try {
        validate_trajectory(t, "gap.csv");
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 100") != std::string::npos);
    }
}

TEST_CASE("timelag heuristic") {
    CHECK(suggest_timelag(2.0 * std::numbers::pi * 243.4, 0.0001953) == 5);
    CHECK(suggest_timelag(1.0, 0.01) == 157);
    CHECK(suggest_timelag(1e6, 0.01) == 1);
}

TEST_CASE("embedded two-tone data spans four dimensions") {
    const double w1 = 3.0, w2 = 7.7;
    auto t = make_signal(0.02, 30.0, [&](double x) { return std::sin(w1 * x) + 0.5 * std::cos(w2 * x + 1.0); });
    const auto emb = delay_embed(t, {9, 3, 0.02});
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(emb.data);
    const auto& s = svd.singularValues();
    CHECK(s(3) / s(0) > 1e-3);
    CHECK(s(4) / s(0) < 1e-10);
    // the harmonic matrix has full column rank when the frequencies are separated
    Eigen::JacobiSVD<Eigen::MatrixXd> h(harmonic_embedding_matrix({w1, w2}, 0.06, 9));
    CHECK(h.singularValues()(3) > 1e-3);
}

TEST_CASE("spectral peaks are recovered in ascending order") {
    const double two_pi = 2.0 * std::numbers::pi;
    auto t = make_signal(0.005, 20.0, [&](double x) { return 0.5 * std::sin(two_pi * 7 * x) + std::cos(two_pi * 2 * x); });
    const auto f = estimate_frequencies(t, 2);
    REQUIRE(f.size() == 2);
    CHECK(f[0] / two_pi == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(f[1] / two_pi == doctest::Approx(7.0).epsilon(1e-3));
    auto flat = make_signal(0.01, 5.0, [](double) { return 3.0; });
    CHECK_THROWS_AS(estimate_frequencies(flat, 1), DataError);
}

TEST_CASE("explicit transient policies") {
    auto t = make_signal(0.1, 9.9, [](double x) { return x; });
    CHECK(trim_transient(t, TransientPolicy::at_index(10)).start == 10);
    CHECK(trim_transient(t, TransientPolicy::at_time(2.0)).start == 20);
    CHECK(trim_transient(t, TransientPolicy::none()).trajectory.length() == 100);
    CHECK_THROWS(trim_transient(t, TransientPolicy::at_index(200)));
}

TEST_CASE("automatic trimming waits for the fast mode to fade") {
    // mode 2 decays ten times faster than mode 1
    const double w1 = 2.0, w2 = 5.3, a1 = 0.05, a2 = 0.5;
    auto t = make_signal(0.02, 80.0, [&](double x) {
        return std::exp(-a1 * x) * std::cos(w1 * x) + 2.0 * std::exp(-a2 * x) * std::cos(w2 * x);
    });
    const auto res = trim_transient(t, TransientPolicy::automatic(1, 0.05));
    const double ts = t.times(res.start);
    const double ratio = 2.0 * std::exp(-a2 * ts) / std::exp(-a1 * ts);
    CHECK(ratio < 0.05);
    CHECK(res.start > 0);

    auto clean = make_signal(0.02, 80.0, [&](double x) { return std::exp(-a1 * x) * std::cos(w1 * x); });
    CHECK(trim_transient(clean, TransientPolicy::automatic(1, 0.05)).start == 0);
}

}
