// fastssm command-line interface. Results go to files or stdout, diagnostics to stderr.
// Exit codes: 0 success, 1 data/config error, 2 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fastssm/pipeline.hpp"
#include "fastssm/synth.hpp"

using namespace fastssm;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
    cmd->add_option("--config", c.config_path, "run configuration (key = value file)");
    cmd->add_option("--out", c.out, out_help);
    cmd->add_option("--seed", c.seed, "random seed (overrides the config)");
}

RunConfig load_common(const Common& c) {
    RunConfig config = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
    if (c.seed) config.seed = *c.seed;
    for (const auto& w : validate(config)) std::cerr << "warning: " << w << "\n";
    return config;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_file(path, text);
        std::cerr << "wrote " << path << "\n";
    }
}

Complex parse_complex(const std::string& text) {
    std::stringstream ss(text);
    double re = 0.0, im = 0.0;
    char comma = 0;
    if (!(ss >> re >> comma >> im) || comma != ',') throw ConfigError("expected 're,im', got '" + text + "'");
    return {re, im};
}

nlohmann::json complex_matrix_json(const Eigen::MatrixXcd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
        rows.push_back(row);
    }
    return rows;
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
    Common common;
    std::string system = "stuart_landau";
    int count = 4;
    double horizon = 60.0;
    double dt = 0.05;
    double radius = 1.0;
    double noise = 0.0;
    int n_obs = 5;
    double nonlinearity = 0.0;
    std::string lambda = "-0.05,1";
    std::string gamma = "-0.1,-0.2";
    double omega = 1.0;
    double zeta = 0.02;
    double kappa = 0.5;
};

int run_synth(const SynthArgs& a) {
    const RunConfig config = load_common(a.common);
    const std::uint64_t seed = config.seed;
    const LiftOptions lift{a.n_obs, a.nonlinearity, seed + 1};
    SyntheticSystem sys = [&] {
        switch (system_kind_from_string(a.system)) {
            case SystemKind::Linear: return make_linear({parse_complex(a.lambda)}, lift);
            case SystemKind::StuartLandau: return make_stuart_landau(parse_complex(a.lambda), parse_complex(a.gamma), lift);
            case SystemKind::CubicOscillator: return make_cubic_oscillator(a.omega, a.zeta, a.kappa, lift);
            case SystemKind::ResonantPair: return make_resonant_pair({}, lift);
        }
        throw ConfigError("unknown system");
    }();
    if (a.count < 1) throw ConfigError("--count must be >= 1");
    const fs::path dir = a.common.out.empty() ? fs::path(".") : fs::path(a.common.out);
    fs::create_directories(dir);

    SimulateOptions sim;
    sim.noise = a.noise;
    const auto states = random_initial_states(sys, a.count, a.radius, seed);
    nlohmann::json files = nlohmann::json::array();
    for (int i = 0; i < a.count; ++i) {
        sim.seed = seed * 1000003ULL + static_cast<std::uint64_t>(i);
        const Trajectory t = simulate(sys, states[static_cast<std::size_t>(i)], a.horizon, a.dt, sim);
        char name[32];
        std::snprintf(name, sizeof name, "traj_%03d.csv", i + 1);
        std::ostringstream meta;
        meta << "system " << to_string(sys.kind) << ", seed " << seed << ", noise " << a.noise << " ("
             << kNoiseAlgorithm << ")";
        write_trajectory_csv((dir / name).string(), t, {meta.str()});
        files.push_back(name);
    }

    nlohmann::json truth;
    truth["system"] = to_string(sys.kind);
    truth["seed"] = seed;
    truth["noise"] = a.noise;
    truth["noise_algorithm"] = kNoiseAlgorithm;
    truth["n_obs"] = sys.n_obs();
    truth["dt"] = a.dt;
    truth["horizon"] = a.horizon;
    truth["files"] = files;
    truth["eigenvalues"] = complex_matrix_json(Eigen::MatrixXcd(sys.eigenvalues.transpose()));
    truth["monomial_ordering"] = kMonomialOrdering;
    if (sys.normal_form) {
        const auto nf = ground_truth_normal_form(sys);
        nlohmann::json exps = nlohmann::json::array();
        for (const auto& k : nf.normal_form.basis().exponents()) exps.push_back(k);
        truth["normal_form"] = {{"exponents", exps}, {"coefficients", complex_matrix_json(nf.normal_form.coefficients())}};
    }
    write_file((dir / "truth.json").string(), truth.dump(1) + "\n");
    std::cerr << "wrote " << a.count << " trajectories and truth.json to " << dir.string() << "\n";
    return 0;
}

// --- fit -----------------------------------------------------------------

struct FitArgs {
    Common common;
    std::vector<std::string> data;
    std::string report;
};

int run_fit(const FitArgs& a) {
    const RunConfig config = load_common(a.common);
    const TrajectorySet data = load_trajectories(a.data);
    const FitOutput out = fit(config, data);
    const std::string archive = save_archive(out.model, make_provenance(config));
    emit(a.common.out.empty() ? "model.json" : a.common.out, archive);
    const std::string report = out.report.to_text();
    if (a.report.empty()) {
        std::cerr << report;
    } else {
        write_file(a.report, report);
        std::cerr << "wrote " << a.report << "\n";
    }
    return 0;
}

// --- predict -------------------------------------------------------------

struct PredictArgs {
    Common common;
    std::string model;
    std::string data;
};

int run_predict(const PredictArgs& a) {
    const RunConfig config = load_common(a.common);
    const FullModel model = load_archive_file(a.model);
    const TrajectorySet data = read_trajectory_csv(a.data);
    std::ostringstream csv;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Trajectory held = prepare_trajectory(model, config, data[i]);
        const double horizon = held.times(held.length() - 1) - held.times(0);
        const Prediction pred = predict_decay(model, held.samples.col(0), horizon);
        for (const auto& w : pred.warnings) std::cerr << "warning: " << w << "\n";
        const Eigen::Index len = std::min(held.length(), pred.trajectory.length());
        const double err = nmte(held.samples.leftCols(len), pred.trajectory.samples.leftCols(len));
        std::printf("trajectory %zu NMTE %.6e\n", i + 1, err);
        if (i == 0) {
            csv << "# fastssm " << kVersion << " prediction\n# config_hash: " << config_hash(config) << "\n";
            csv << "trajectory,t";
            for (Eigen::Index r = 0; r < pred.trajectory.n_obs(); ++r) csv << ",y" << r + 1;
            csv << "\n";
        }
        csv.precision(17);
        for (Eigen::Index j = 0; j < pred.trajectory.length(); ++j) {
            csv << i + 1 << "," << held.times(0) + pred.trajectory.times(j);
            for (Eigen::Index r = 0; r < pred.trajectory.n_obs(); ++r) csv << "," << pred.trajectory.samples(r, j);
            csv << "\n";
        }
    }
    if (!a.common.out.empty()) emit(a.common.out, csv.str());
    return 0;
}

// --- backbone / frc ------------------------------------------------------

struct CurveArgs {
    Common common;
    std::string model;
    std::optional<double> rho_max;
    std::optional<double> f;
};

int run_backbone(const CurveArgs& a) {
    const RunConfig config = load_common(a.common);
    const FullModel model = load_archive_file(a.model);
    const Backbone bb = backbone(model, a.rho_max.value_or(config.backbone_rho_max), config.backbone_points,
                                 config.alpha);
    emit(a.common.out, backbone_csv(bb, config_hash(config)));
    return 0;
}

int run_frc(const CurveArgs& a) {
    const RunConfig config = load_common(a.common);
    const FullModel model = load_archive_file(a.model);
    FrcOptions opts;
    opts.omega_min = config.frc_omega_min;
    opts.omega_max = config.frc_omega_max;
    opts.rho_max = a.rho_max.value_or(config.frc_rho_max);
    opts.n_rho = config.frc_n_rho;

    std::vector<double> forcings;
    if (a.f) {
        forcings.push_back(*a.f);
    } else if (config.frc_f) {
        forcings.push_back(*config.frc_f);
    } else {
        if (config.calibration.empty()) throw ConfigError("frc needs --f, frc.f or calibration points in the config");
        for (const auto& pt : config.calibration) {
            const Calibration cal = calibrate_forcing(model, pt.omega, pt.u);
            std::cerr << "calibration Omega " << cal.omega << " u " << cal.u << ": rho " << cal.rho << ", f " << cal.f
                      << "\n";
            forcings.push_back(cal.f);
        }
    }
    std::string text;
    for (std::size_t i = 0; i < forcings.size(); ++i) {
        const Frc curve = frc(model, forcings[i], config.alpha, opts);
        for (const auto& d : curve.diagnostics) std::cerr << "note: " << d << "\n";
        std::string csv = frc_csv(curve, config_hash(config));
        if (i > 0) {
            // keep a single header block
            std::istringstream in(csv);
            std::string line, body;
            bool header_done = false;
            while (std::getline(in, line)) {
                if (!header_done) {
                    header_done = line.rfind("omega_rad_s", 0) == 0;
                    continue;
                }
                body += line + "\n";
            }
            csv = body;
        }
        text += csv;
    }
    emit(a.common.out, text);
    return 0;
}

// --- inspect -------------------------------------------------------------

struct InspectArgs {
    Common common;
    std::string model;
};

int run_inspect(const InspectArgs& a) {
    load_common(a.common);
    Provenance prov;
    const FullModel model = load_archive_file(a.model, &prov);
    std::ostringstream out;
    out << format_polar(model.polar);
    out << "# d = " << model.dim() << ", manifold order " << model.ssm.order() << ", normal form order "
        << model.normal_form.order() << ", p = " << model.embedding.p << ", k = " << model.embedding.k
        << ", n_obs = " << model.n_obs << "\n";
    out << "# config_hash " << prov.config_hash << ", tool " << prov.tool_version << "\n";
    emit(a.common.out, out.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fastssm: data-driven spectral submanifold reduction"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate synthetic trajectories with known normal forms");
    add_common(s, synth.common, "output directory");
    s->add_option("--system", synth.system, "linear, stuart_landau, cubic_oscillator or resonant_pair");
    s->add_option("--count", synth.count, "number of trajectories");
    s->add_option("--horizon", synth.horizon, "simulated time (s)");
    s->add_option("--dt", synth.dt, "sampling time (s)");
    s->add_option("--radius", synth.radius, "initial amplitude scale");
    s->add_option("--noise", synth.noise, "relative measurement noise");
    s->add_option("--n-obs", synth.n_obs, "number of observables");
    s->add_option("--nonlinearity", synth.nonlinearity, "scale of quadratic observable terms");
    s->add_option("--lambda", synth.lambda, "eigenvalue 're,im' (linear, stuart_landau)");
    s->add_option("--gamma", synth.gamma, "cubic coefficient 're,im' (stuart_landau)");
    s->add_option("--omega", synth.omega, "natural frequency (cubic_oscillator)");
    s->add_option("--zeta", synth.zeta, "damping ratio (cubic_oscillator)");
    s->add_option("--kappa", synth.kappa, "cubic stiffness (cubic_oscillator)");

    FitArgs fit_args;
    auto* f = app.add_subcommand("fit", "fit an SSM model to trajectory CSV files");
    add_common(f, fit_args.common, "model archive path (default model.json)");
    f->add_option("data", fit_args.data, "trajectory CSV files")->required();
    f->add_option("--report", fit_args.report, "fit report path (default: stderr)");

    PredictArgs pred;
    auto* p = app.add_subcommand("predict", "predict free decay from the first snapshot of each trajectory");
    add_common(p, pred.common, "predicted trajectory CSV");
    p->add_option("--model", pred.model, "model archive")->required();
    p->add_option("data", pred.data, "held-out trajectory CSV")->required();

    CurveArgs bb;
    auto* b = app.add_subcommand("backbone", "backbone curve CSV");
    add_common(b, bb.common, "curve CSV (default: stdout)");
    b->add_option("--model", bb.model, "model archive")->required();
    b->add_option("--rho-max", bb.rho_max, "largest normal-form amplitude");

    CurveArgs fr;
    auto* r = app.add_subcommand("frc", "forced response curve CSV");
    add_common(r, fr.common, "curve CSV (default: stdout)");
    r->add_option("--model", fr.model, "model archive")->required();
    r->add_option("--f", fr.f, "forcing amplitude (otherwise frc.f or calibration from the config)");
    r->add_option("--rho-max", fr.rho_max, "largest normal-form amplitude");

    InspectArgs ins;
    auto* i = app.add_subcommand("inspect", "print the normal form in polar coordinates");
    add_common(i, ins.common, "output file (default: stdout)");
    i->add_option("model", ins.model, "model archive")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*s) return run_synth(synth);
        if (*f) return run_fit(fit_args);
        if (*p) return run_predict(pred);
        if (*b) return run_backbone(bb);
        if (*r) return run_frc(fr);
        if (*i) return run_inspect(ins);
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
