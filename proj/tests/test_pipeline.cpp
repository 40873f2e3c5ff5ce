#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "fastssm/pipeline.hpp"
#include "fastssm/synth.hpp"

using namespace fastssm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "fastssm_unit";
    fs::create_directories(dir);
    return dir / name;
}

TrajectorySet stuart_landau_data(int count, double horizon, const LiftOptions& lift = {5, 0.0, 3}) {
    const auto sys = make_stuart_landau({-0.05, 1.0}, {-0.1, -0.2}, lift);
    TrajectorySet out;
    for (const auto& s0 : random_initial_states(sys, count, 1.0, 11)) out.push_back(simulate(sys, s0, horizon, 0.05));
    return out;
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing and canonical round trip") {
    const std::string text =
        "# example\n"
        "d = 4\n"
        "m = 5   # manifold order\n"
        "k = auto\n"
        "p = 3\n"
        "transient = time:2.5\n"
        "alpha = block:0:3\n"
        "inverse = series\n"
        "frc.f = 0.125\n"
        "calibration = 7.1:0.5; 7.3:0.6\n";
    const RunConfig c = parse_config(text);
    CHECK(c.d == 4);
    CHECK(c.m == 5);
    CHECK(c.r == 3);
    CHECK_FALSE(c.k.has_value());
    CHECK(c.transient.kind == TransientPolicy::Kind::Time);
    CHECK(c.transient.time == 2.5);
    CHECK(c.alpha.kind == AmplitudeFunctional::Kind::BlockNorm);
    CHECK(c.inverse == InverseStrategy::Series);
    REQUIRE(c.frc_f.has_value());
    CHECK(*c.frc_f == 0.125);
    REQUIRE(c.calibration.size() == 2);
    CHECK(c.calibration[1].omega == 7.3);
    CHECK(c.calibration[1].u == 0.6);

    const std::string canonical = to_text(c);
    CHECK(to_text(parse_config(canonical)) == canonical);
    CHECK(config_hash(parse_config(canonical)) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
    RunConfig other = c;
    other.tol_res = 0.0500000001;
    CHECK(config_hash(other) != config_hash(c));
    CHECK(to_text(parse_config(to_text(RunConfig{}))) == to_text(RunConfig{}));
}

TEST_CASE("config errors name the line") {
    CHECK(message_of([] { parse_config("d = 2\nbogus = 1\n"); }).find("config line 2") != std::string::npos);
    CHECK(message_of([] { parse_config("d = two\n"); }).find("config line 1") != std::string::npos);
    CHECK(message_of([] { parse_config("d = 2\nd = 4\n"); }).find("duplicate") != std::string::npos);
    CHECK_THROWS_AS(parse_config("m = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("inverse = magic\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("calibration = 7.1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigError);
    RunConfig odd;
    odd.d = 3;
    CHECK_FALSE(validate(odd).empty());
    CHECK(validate(RunConfig{}).empty());
}

TEST_CASE("trajectory CSV round trip and errors") {
    const auto data = stuart_landau_data(2, 2.0);
    const auto a = scratch("a.csv"), b = scratch("b.csv");
    write_trajectory_csv(a.string(), data[0], {"system stuart-landau"});
    write_trajectory_csv(b.string(), data[1]);
    const auto loaded = load_trajectories({a.string(), b.string()});
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].samples == data[0].samples);
    CHECK(loaded[1].times == data[1].times);

    const auto gap = scratch("gap.csv");
    write_file(gap.string(), "t,y1\n0,1\n0.1,2\n0.2,3\n0.4,4\n");
    const std::string msg = message_of([&] { read_trajectory_csv(gap.string()); });
    CHECK(msg.find("row 4") != std::string::npos);
    CHECK(msg.find("line 5") != std::string::npos);

    const auto empty = scratch("empty.csv");
    write_file(empty.string(), "t,y1,y2\n");
    CHECK(message_of([&] { read_trajectory_csv(empty.string()); }).find("no samples") != std::string::npos);

    const auto narrow = scratch("narrow.csv");
    write_file(narrow.string(), "t,y1\n0,1\n0.1,2\n");
    CHECK_THROWS_AS(load_trajectories({a.string(), narrow.string()}), DataError);
    const auto ragged = scratch("ragged.csv");
    write_file(ragged.string(), "t,y1\n0,1\n0.1,2,3\n");
    CHECK_THROWS_AS(read_trajectory_csv(ragged.string()), DataError);
    CHECK_THROWS_AS(read_trajectory_csv(scratch("missing.csv").string()), DataError);
}

TEST_CASE("boundary markers keep trajectories separate") {
    const auto data = stuart_landau_data(2, 40.0);
    const auto a = scratch("sa.csv"), b = scratch("sb.csv"), joint = scratch("joint.csv");
    write_trajectory_csv(a.string(), data[0]);
    write_trajectory_csv(b.string(), data[1]);
    std::string text = read_file(a.string());
    const std::string second = read_file(b.string());
    text += "# boundary\n" + second.substr(second.find('\n') + 1);
    write_file(joint.string(), text);

    const auto split = load_trajectories({a.string(), b.string()});
    const auto combined = read_trajectory_csv(joint.string());
    REQUIRE(combined.size() == 2);
    const RunConfig config;
    const Provenance prov{"0", kVersion, "unset"};
    CHECK(save_archive(fit(config, split).model, prov) == save_archive(fit(config, combined).model, prov));
}

TEST_CASE("archives round trip bit-exactly") {
    const auto data = stuart_landau_data(3, 40.0);
    RunConfig config;
    const auto out = fit(config, data);
    const Provenance prov = make_provenance(config);
    CHECK(prov.config_hash == config_hash(config));
    const std::string text = save_archive(out.model, prov);
    Provenance back;
    const FullModel model = load_archive(text, &back);
    CHECK(back.config_hash == prov.config_hash);
    CHECK(save_archive(model, back) == text);
    CHECK(model.normal_form.normal_form.coefficients() == out.model.normal_form.normal_form.coefficients());

    const auto path = scratch("model.json");
    save_archive_file(path.string(), out.model, prov);
    CHECK(save_archive(load_archive_file(path.string()), prov) == text);

    std::string future = text;
    const auto pos = future.find("\"version\": 1");
    REQUIRE(pos != std::string::npos);
    future.replace(pos, 12, "\"version\": 99");
    CHECK(message_of([&] { load_archive(future); }).find("unsupported version") != std::string::npos);
    CHECK_THROWS_AS(load_archive("not json"), DataError);
}

TEST_CASE("Stuart-Landau fit recovers the normal form") {
    const Complex gamma(-0.1, -0.2);
    const auto lift = LiftOptions{5, 0.0, 3};
    const auto sys = make_stuart_landau({-0.05, 1.0}, gamma, lift);
    const auto data = stuart_landau_data(4, 60.0, lift);
    RunConfig config;
    config.test_trajectories = 1;
    const auto out = fit(config, data);
    const auto truth = ground_truth_normal_form(sys);
    const auto& nb = out.model.normal_form.normal_form.basis();
    const Complex fitted = out.model.normal_form.normal_form.coefficients()(0, nb.index_of({2, 1}));
    const Complex want = truth.normal_form.coefficients()(0, truth.normal_form.basis().index_of({2, 1}));
    CHECK(std::abs(fitted - want) / std::abs(want) < 1e-2);
    REQUIRE(out.report.training_nmte.size() == 3);
    REQUIRE(out.report.test_nmte.size() == 1);
    CHECK(out.report.test_nmte[0] < 1e-2);
    CHECK(out.report.energy > 0.99);
    CHECK(out.report.to_text().find("NMTE") != std::string::npos);

    // the report's training error is reproducible from the public prediction path
    const Trajectory prepared = prepare_trajectory(out.model, config, data[0]);
    const auto pred = predict_decay(out.model, prepared.samples.col(0), prepared.times(prepared.length() - 1) -
                                                                            prepared.times(0));
    const Eigen::Index len = std::min(prepared.length(), pred.trajectory.length());
    const double e = nmte(prepared.samples.leftCols(len), pred.trajectory.samples.leftCols(len));
    CHECK(e == doctest::Approx(out.report.training_nmte[0]).epsilon(1e-6));

    const auto bb = backbone(out.model, config.backbone_rho_max, 11, config.alpha);
    const std::string csv = backbone_csv(bb, config_hash(config));
    CHECK(csv.find(config_hash(config)) != std::string::npos);
}

TEST_CASE("failures name their pipeline stage") {
    // a single oscillator cannot span a four-dimensional tangent space
    const auto data = stuart_landau_data(2, 20.0, {3, 0.0, 3});
    RunConfig config;
    config.d = 4;
    try {
        fit(config, data);
        FAIL("expected a RankError");
    } catch (const RankError& e) {
        CHECK(std::string(e.what()).find("tangent space") == 0);
    }
    config.d = 2;
    config.test_trajectories = 2;
    CHECK_THROWS_AS(fit(config, data), ConfigError);
}

TEST_CASE("1:2 resonant data is reported") {
    const auto sys = make_resonant_pair({}, {8, 0.0, 7});
    TrajectorySet data;
    for (const auto& s0 : random_initial_states(sys, 4, 0.6, 29)) data.push_back(simulate(sys, s0, 120.0, 0.05));
    RunConfig config;
    config.d = 4;
    const auto out = fit(config, data);
    REQUIRE(out.report.resonance_phases.size() == 1);
    CHECK(out.report.resonance_phases[0] == std::vector<int>{2, -1});
    CHECK(out.report.resonances.size() == 12);
    CHECK_THROWS_AS(backbone(out.model, 1.0, 11, config.alpha), UnsupportedError);
}

}
