#include "fastssm/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

namespace fastssm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("write to '" + path + "' failed");
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, sep);) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

bool parse_double(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

bool parse_int(const std::string& text, long long& out) {
    const std::string t = trim(text);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
    return !t.empty() && res.ec == std::errc() && res.ptr == t.data() + t.size();
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hexd(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string transient_text(const TransientPolicy& p) {
    switch (p.kind) {
        case TransientPolicy::Kind::None:
            return "none";
        case TransientPolicy::Kind::Index:
            return "index:" + std::to_string(p.index);
        case TransientPolicy::Kind::Time:
            return "time:" + fmt17(p.time);
        case TransientPolicy::Kind::Auto:
            return "auto:" + fmt17(p.energy_fraction);
    }
    return "none";
}

TransientPolicy parse_transient(const std::string& value) {
    const auto parts = split(value, ':');
    long long i = 0;
    double x = 0.0;
    if (value == "none") return TransientPolicy::none();
    if (value == "auto") return TransientPolicy::automatic(1);
    if (parts.size() == 2 && parts[0] == "auto" && parse_double(parts[1], x)) return TransientPolicy::automatic(1, x);
    if (parts.size() == 2 && parts[0] == "index" && parse_int(parts[1], i)) return TransientPolicy::at_index(i);
    if (parts.size() == 2 && parts[0] == "time" && parse_double(parts[1], x)) return TransientPolicy::at_time(x);
    throw ConfigError("expected none, auto, auto:<fraction>, index:<n> or time:<seconds>");
}

bool parse_bool(const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("expected true or false");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    std::map<std::string, int> seen;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw.substr(0, raw.find('#'));
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        auto fail = [&](const std::string& why) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + why);
        };
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (seen.count(key)) fail("duplicate key '" + key + "'");
        seen[key] = line_no;
        auto as_int = [&](int lo) {
            long long v = 0;
            if (!parse_int(value, v)) fail("'" + key + "' needs an integer, got '" + value + "'");
            if (v < lo) fail("'" + key + "' must be >= " + std::to_string(lo));
            return static_cast<int>(v);
        };
        auto as_double = [&]() {
            double v = 0.0;
            if (!parse_double(value, v)) fail("'" + key + "' needs a number, got '" + value + "'");
            return v;
        };
        try {
            if (key == "d") c.d = as_int(1);
            else if (key == "m") c.m = as_int(1);
            else if (key == "r") c.r = as_int(1);
            else if (key == "n") c.n = as_int(1);
            else if (key == "p") c.p = as_int(1);
            else if (key == "k") c.k = value == "auto" ? std::nullopt : std::optional<int>(as_int(1));
            else if (key == "transient") c.transient = parse_transient(value);
            else if (key == "tol_res") c.tol_res = as_double();
            else if (key == "full_complex_resonance") c.full_complex_resonance = parse_bool(value);
            else if (key == "test_trajectories") c.test_trajectories = as_int(0);
            else if (key == "alpha") c.alpha = AmplitudeFunctional::parse(value);
            else if (key == "inverse") c.inverse = inverse_strategy_from_string(value);
            else if (key == "feature_scaling") c.feature_scaling = parse_bool(value);
            else if (key == "seed") {
                long long v = 0;
                if (!parse_int(value, v) || v < 0) fail("'seed' needs a nonnegative integer");
                c.seed = static_cast<std::uint64_t>(v);
            } else if (key == "backbone.rho_max") c.backbone_rho_max = as_double();
            else if (key == "backbone.points") c.backbone_points = as_int(2);
            else if (key == "frc.omega_min") c.frc_omega_min = as_double();
            else if (key == "frc.omega_max") c.frc_omega_max = as_double();
            else if (key == "frc.rho_max") c.frc_rho_max = as_double();
            else if (key == "frc.n_rho") c.frc_n_rho = as_int(2);
            else if (key == "frc.f") c.frc_f = value == "none" ? std::nullopt : std::optional<double>(as_double());
            else if (key == "calibration") {
                c.calibration.clear();
                for (const auto& item : split(value, ';')) {
                    if (item.empty()) continue;
                    const auto pair = split(item, ':');
                    CalibrationPoint pt;
                    if (pair.size() != 2 || !parse_double(pair[0], pt.omega) || !parse_double(pair[1], pt.u)) {
                        fail("calibration expects 'omega:u; omega:u; ...'");
                    }
                    c.calibration.push_back(pt);
                }
            } else {
                fail("unknown key '" + key + "'");
            }
        } catch (const ConfigError& e) {
            const std::string what = e.what();
            if (what.rfind("config line", 0) == 0) throw;
            fail("'" + key + "': " + what);
        }
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    try {
        return parse_config(text);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string to_text(const RunConfig& c) {
    std::ostringstream out;
    out << "d = " << c.d << "\n";
    out << "m = " << c.m << "\n";
    out << "r = " << c.r << "\n";
    out << "n = " << c.n << "\n";
    out << "p = " << c.p << "\n";
    out << "k = " << (c.k ? std::to_string(*c.k) : std::string("auto")) << "\n";
    out << "transient = " << transient_text(c.transient) << "\n";
    out << "tol_res = " << fmt17(c.tol_res) << "\n";
    out << "full_complex_resonance = " << (c.full_complex_resonance ? "true" : "false") << "\n";
    out << "test_trajectories = " << c.test_trajectories << "\n";
    out << "alpha = " << c.alpha.to_string() << "\n";
    out << "inverse = " << to_string(c.inverse) << "\n";
    out << "feature_scaling = " << (c.feature_scaling ? "true" : "false") << "\n";
    out << "seed = " << c.seed << "\n";
    out << "backbone.rho_max = " << fmt17(c.backbone_rho_max) << "\n";
    out << "backbone.points = " << c.backbone_points << "\n";
    out << "frc.omega_min = " << fmt17(c.frc_omega_min) << "\n";
    out << "frc.omega_max = " << fmt17(c.frc_omega_max) << "\n";
    out << "frc.rho_max = " << fmt17(c.frc_rho_max) << "\n";
    out << "frc.n_rho = " << c.frc_n_rho << "\n";
    out << "frc.f = " << (c.frc_f ? fmt17(*c.frc_f) : std::string("none")) << "\n";
    out << "calibration = ";
    for (std::size_t i = 0; i < c.calibration.size(); ++i) {
        out << (i ? "; " : "") << fmt17(c.calibration[i].omega) << ":" << fmt17(c.calibration[i].u);
    }
    out << "\n";
    return out.str();
}

std::string config_hash(const RunConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_text(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Warnings validate(const RunConfig& c) {
    Warnings w;
    if (c.d < 1 || c.m < 1 || c.r < 1 || c.n < 1 || c.p < 1) throw ConfigError("d, m, r, n and p must be >= 1");
    if (c.k && *c.k < 1) throw ConfigError("k must be >= 1");
    if (!(c.tol_res >= 0.0)) throw ConfigError("tol_res must be nonnegative");
    if (c.test_trajectories < 0) throw ConfigError("test_trajectories must be nonnegative");
    if (!(c.frc_rho_max > 0.0) || c.frc_n_rho < 2) throw ConfigError("frc.rho_max must be positive, frc.n_rho >= 2");
    if (!(c.backbone_rho_max > 0.0) || c.backbone_points < 2) {
        throw ConfigError("backbone.rho_max must be positive, backbone.points >= 2");
    }
    if (c.frc_f && !(*c.frc_f > 0.0)) throw ConfigError("forcing must be positive");
    for (const auto& pt : c.calibration) {
        if (!(pt.u > 0.0)) throw ConfigError("calibration amplitude must be positive");
    }
    if (c.d % 2 != 0) w.push_back("d is odd; normal forms and polar forms assume complex conjugate pairs");
    return w;
}

// ---------------------------------------------------------------------------
// Trajectory CSV

TrajectorySet read_trajectory_csv(const std::string& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    std::size_t columns = 0;
    TrajectorySet out;
    std::vector<std::vector<double>> rows;
    std::vector<int> lines;
    auto flush = [&]() {
        if (rows.empty()) {
            throw DataError(path + ": no samples" + (out.empty() ? "" : " after boundary marker"));
        }
        Trajectory t;
        t.times.resize(static_cast<Eigen::Index>(rows.size()));
        t.samples.resize(static_cast<Eigen::Index>(columns - 1), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t j = 0; j < rows.size(); ++j) {
            t.times(static_cast<Eigen::Index>(j)) = rows[j][0];
            for (std::size_t c = 1; c < columns; ++c) {
                t.samples(static_cast<Eigen::Index>(c - 1), static_cast<Eigen::Index>(j)) = rows[j][c];
            }
        }
        if (rows.size() >= 2) {
            const double dt = rows[1][0] - rows[0][0];
            for (std::size_t j = 1; j < rows.size(); ++j) {
                const double gap = rows[j][0] - rows[j - 1][0];
                if (!(dt > 0.0) || std::abs(gap - dt) > 1e-9 * dt) {
                    std::ostringstream msg;
                    msg.precision(12);
                    msg << path << ": non-uniform sampling at row " << j + 1 << " (line " << lines[j] << ", gap "
                        << gap << " s, expected " << dt << " s)";
                    throw DataError(msg.str());
                }
            }
        }
        validate_trajectory(t, path);
        out.push_back(std::move(t));
        rows.clear();
        lines.clear();
    };
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (trim(line.substr(1)) == "boundary" && columns > 0) flush();
            continue;
        }
        const auto cells = split(line, ',');
        if (columns == 0) {
            if (cells.size() < 2 || cells[0] != "t") {
                throw DataError(path + ": header must start with column 't' followed by observables");
            }
            columns = cells.size();
            continue;
        }
        if (cells.size() != columns) {
            throw DataError(path + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " columns, header has " + std::to_string(columns));
        }
        std::vector<double> row(columns);
        for (std::size_t c = 0; c < columns; ++c) {
            if (!parse_double(cells[c], row[c])) {
                throw DataError(path + ": line " + std::to_string(line_no) + ": cannot parse '" + cells[c] + "'");
            }
        }
        rows.push_back(std::move(row));
        lines.push_back(line_no);
    }
    if (columns == 0) throw DataError(path + ": missing header row");
    flush();
    return out;
}

TrajectorySet load_trajectories(const std::vector<std::string>& paths) {
    if (paths.empty()) throw DataError("no trajectory files given");
    TrajectorySet out;
    for (const auto& path : paths) {
        auto set = read_trajectory_csv(path);
        for (auto& t : set) {
            if (!out.empty() && t.n_obs() != out.front().n_obs()) {
                throw DataError(path + ": " + std::to_string(t.n_obs()) + " observable columns, expected " +
                                std::to_string(out.front().n_obs()) + " as in '" + paths.front() + "'");
            }
            out.push_back(std::move(t));
        }
    }
    return out;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, const std::vector<std::string>& comments) {
    std::ostringstream out;
    for (const auto& c : comments) out << "# " << c << "\n";
    out << "t";
    for (Eigen::Index i = 0; i < traj.n_obs(); ++i) out << ",y" << i + 1;
    out << "\n";
    for (Eigen::Index j = 0; j < traj.length(); ++j) {
        out << fmt17(traj.times(j));
        for (Eigen::Index i = 0; i < traj.n_obs(); ++i) out << "," << fmt17(traj.samples(i, j));
        out << "\n";
    }
    write_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Fit

namespace {

[[noreturn]] void rethrow_stage(const std::string& stage) {
    try {
        throw;
    } catch (const RankError& e) {
        throw RankError(stage + ": " + e.what());
    } catch (const ConditioningError& e) {
        throw ConditioningError(stage + ": " + e.what());
    } catch (const ResonanceError& e) {
        throw ResonanceError(stage + ": " + e.what());
    } catch (const CalibrationError& e) {
        throw CalibrationError(stage + ": " + e.what());
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(stage + ": " + e.what());
    } catch (const InstabilityError& e) {
        throw InstabilityError(stage + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(stage + ": " + e.what());
    } catch (const UnsupportedError& e) {
        throw UnsupportedError(stage + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(stage + ": " + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(stage + ": " + e.what());
    }
}

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error&) {
        rethrow_stage(name);
    }
}

Eigen::MatrixXd hcat(const std::vector<Eigen::MatrixXd>& parts) {
    Eigen::Index cols = 0;
    for (const auto& p : parts) cols += p.cols();
    Eigen::MatrixXd out(parts.front().rows(), cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p;
        at += p.cols();
    }
    return out;
}

Eigen::MatrixXd subsample(const Eigen::MatrixXd& x, Eigen::Index max_cols) {
    const Eigen::Index stride = std::max<Eigen::Index>(1, (x.cols() + max_cols - 1) / max_cols);
    Eigen::MatrixXd out(x.rows(), (x.cols() + stride - 1) / stride);
    for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = x.col(j * stride);
    return out;
}

PolarNormalForm polar_or_empty(const NormalFormModel& nf, Warnings* warnings) {
    try {
        return to_polar(nf);
    } catch (const UnsupportedError& e) {
        if (warnings) warnings->push_back(std::string("no polar form: ") + e.what());
        return {};
    }
}

TransientPolicy policy_for(const RunConfig& config) {
    TransientPolicy policy = config.transient;
    if (policy.kind == TransientPolicy::Kind::Auto) policy.n_modes = std::max(1, config.d / 2);
    return policy;
}

}  // namespace

Trajectory prepare_trajectory(const FullModel& model, const RunConfig& config, const Trajectory& traj) {
    validate_trajectory(traj);
    const auto trimmed = trim_transient(traj, policy_for(config));
    const auto emb = delay_embed(trimmed.trajectory, model.embedding);
    return Trajectory{emb.times, emb.data};
}

FitOutput fit(const RunConfig& config, const TrajectorySet& data) {
    FitReport report;
    report.warnings = validate(config);
    if (data.empty()) throw DataError("fit: no trajectories");
    if (static_cast<std::size_t>(config.test_trajectories) >= data.size()) {
        throw ConfigError("fit: test_trajectories leaves no training data");
    }
    const std::size_t n_train = data.size() - static_cast<std::size_t>(config.test_trajectories);
    const int d = config.d;

    // trim
    std::vector<Trajectory> trimmed;
    stage("transient", [&] {
        for (std::size_t i = 0; i < data.size(); ++i) {
            const std::string label = "trajectory " + std::to_string(i + 1);
            validate_trajectory(data[i], label);
            if (data[i].n_obs() != data.front().n_obs()) throw DataError(label + ": observable count differs");
            auto res = trim_transient(data[i], policy_for(config));
            for (auto& w : res.warnings) report.warnings.push_back(label + ": " + w);
            report.transient_start.push_back(res.start);
            trimmed.push_back(std::move(res.trajectory));
        }
        return 0;
    });
    const double dt = trimmed.front().dt();
    for (const auto& t : trimmed) {
        if (std::abs(t.dt() - dt) > 1e-9 * dt) throw DataError("fit: trajectories have different sampling times");
    }

    // embed
    EmbeddingConfig emb{config.p, 1, dt};
    stage("embedding", [&] {
        if (config.k) {
            emb.k = *config.k;
        } else if (config.p > 1) {
            const auto freqs = estimate_frequencies(trimmed.front(), std::max(1, d / 2));
            emb.k = suggest_timelag(freqs.back(), dt);
        }
        return 0;
    });
    report.k = emb.k;
    std::vector<Eigen::MatrixXd> embedded;
    stage("embedding", [&] {
        for (const auto& t : trimmed) embedded.push_back(delay_embed(t, emb).data);
        return 0;
    });
    const std::vector<Eigen::MatrixXd> train(embedded.begin(), embedded.begin() + static_cast<long>(n_train));
    const Eigen::MatrixXd y = hcat(train);

    // manifold
    SsmFitOptions ssm_options;
    ssm_options.regression.scale_features = config.feature_scaling;
    SsmModel ssm = stage("tangent space/parametrization", [&] { return fit_ssm(y, d, config.m, ssm_options); });
    report.warnings.insert(report.warnings.end(), ssm.warnings.begin(), ssm.warnings.end());

    // reduced dynamics; derivatives stay inside each trajectory
    std::vector<Eigen::MatrixXd> retained, rates;
    stage("differentiation", [&] {
        for (const auto& part : train) {
            auto der = differentiate(reduce(part, ssm.tangent), dt);
            retained.push_back(std::move(der.retained));
            rates.push_back(std::move(der.values));
        }
        return 0;
    });
    FitOptions regression;
    regression.scale_features = config.feature_scaling;
    DynamicsFit dyn = stage("reduced dynamics",
                            [&] { return fit_reduced_dynamics(hcat(retained), hcat(rates), config.r, regression); });
    report.warnings.insert(report.warnings.end(), dyn.warnings.begin(), dyn.warnings.end());
    ModalizeOptions modal_options;
    modal_options.mode_shapes = ssm.parametrization.block(1);
    ReducedModel reduced = stage("modal transformation", [&] { return modalize(dyn.map, modal_options); });
    reduced.residual = dyn.relative_residual;

    // normal form
    NormalFormOptions nf_options;
    nf_options.tol_res = config.tol_res;
    nf_options.full_complex_criterion = config.full_complex_resonance;
    NormalFormModel nf = stage("normal form", [&] {
        const bool pair = d == 2 && reduced.eigenvalues(0).imag() != 0.0;
        if (pair && config.n == 3) return cubic_normal_form_2d(reduced.modal, reduced.eigenvalues(0), nf_options);
        return general_normal_form(reduced.modal, reduced.eigenvalues, config.n, nf_options);
    });
    nf.inverse_strategy = config.inverse;
    report.warnings.insert(report.warnings.end(), nf.warnings.begin(), nf.warnings.end());
    PolarNormalForm polar = polar_or_empty(nf, &report.warnings);

    FullModel model{emb, static_cast<int>(data.front().n_obs()), ssm, reduced, nf, polar, {}, 0.0};

    stage("inverse transformation", [&] {
        const Eigen::MatrixXd xi = reduce(subsample(y, 2000), ssm.tangent);
        const Eigen::MatrixXcd zeta = reduced.eigenvectors.partialPivLu().solve(xi.cast<Complex>());
        const Eigen::MatrixXcd z = inverse_transform(model.normal_form, zeta, InverseStrategy::Newton).z;
        model.training_amplitude = z.cwiseAbs().maxCoeff();
        if (config.inverse == InverseStrategy::Regression) {
            auto reg = fit_regression_inverse(model.normal_form.transform, z, config.n);
            model.normal_form.inverse_map = reg.map;
            if (reg.relative_residual > 1e-3) {
                report.warnings.push_back("regression inverse has relative residual " + fmt17(reg.relative_residual));
            }
        }
        return 0;
    });

    stage("training prediction", [&] {
        for (std::size_t i = 0; i < embedded.size(); ++i) {
            const auto& part = embedded[i];
            const double horizon = static_cast<double>(part.cols() - 1) * dt;
            Prediction pred = predict_decay(model, part.col(0), horizon);
            const double e = nmte(part, pred.trajectory.samples);
            (i < n_train ? report.training_nmte : report.test_nmte).push_back(e);
        }
        return 0;
    });
    model.training_nmte = report.training_nmte;

    report.singular_values = ssm.singular_values;
    report.energy = ssm.energy;
    report.reconstruction_error = ssm.reconstruction_error;
    report.principal_angle = ssm.principal_angle;
    report.dynamics_residual = dyn.relative_residual;
    report.eigenvector_condition = reduced.condition;
    report.conjugacy_residual = model.normal_form.conjugacy_residual;
    report.resonances = model.normal_form.resonances;
    report.resonance_phases = polar.resonance_phases;
    return {std::move(model), std::move(report)};
}

std::string FitReport::to_text() const {
    std::ostringstream out;
    out.precision(6);
    out << "timelag k: " << k << "\n";
    out << "transient start (samples):";
    for (auto s : transient_start) out << " " << s;
    out << "\nleading singular values:";
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(singular_values.size(), 8); ++i) out << " " << singular_values(i);
    out << "\nenergy captured: " << energy << "\n";
    out << "manifold reconstruction error: " << reconstruction_error << "\n";
    out << "principal angle to SVD subspace (rad): " << principal_angle << "\n";
    out << "reduced dynamics relative residual: " << dynamics_residual << "\n";
    out << "eigenvector condition number: " << eigenvector_condition << "\n";
    out << "conjugacy residual: " << conjugacy_residual << "\n";
    out << "resonant monomials:";
    for (const auto& r : resonances) {
        out << " [row " << r.row + 1 << ": (";
        for (std::size_t i = 0; i < r.exponent.size(); ++i) out << (i ? "," : "") << r.exponent[i];
        out << ")]";
    }
    out << "\nresonance relations:";
    if (resonance_phases.empty()) out << " none";
    for (const auto& q : resonance_phases) {
        out << " (";
        for (std::size_t i = 0; i < q.size(); ++i) out << (i ? "," : "") << q[i];
        out << ")";
    }
    out << "\ntraining NMTE:";
    for (double e : training_nmte) out << " " << e;
    out << "\n";
    if (!test_nmte.empty()) {
        out << "test NMTE:";
        for (double e : test_nmte) out << " " << e;
        out << "\n";
    }
    for (const auto& w : warnings) out << "warning: " << w << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Archive

Provenance make_provenance(const RunConfig& config) {
    Provenance p;
    p.config_hash = config_hash(config);
    const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
    p.timestamp = epoch && *epoch ? std::string(epoch) : std::string("unset");
    return p;
}

namespace {

double unhex(const json& j) {
    if (!j.is_string()) throw DataError("archive: expected a hex-float string");
    double v = 0.0;
    if (!parse_double(j.get<std::string>(), v)) throw DataError("archive: malformed number '" + j.get<std::string>() + "'");
    return v;
}

json encode(const Eigen::MatrixXd& m) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(hexd(m(i, j)));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

json encode(const Eigen::MatrixXcd& m) {
    return {{"re", encode(Eigen::MatrixXd(m.real()))}, {"im", encode(Eigen::MatrixXd(m.imag()))}};
}

Eigen::MatrixXd decode_real(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw DataError("archive: matrix size does not match its data");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = unhex(data[static_cast<std::size_t>(i * cols + k)]);
    return m;
}

Eigen::MatrixXcd decode_complex(const json& j) {
    const Eigen::MatrixXd re = decode_real(j.at("re"));
    const Eigen::MatrixXd im = decode_real(j.at("im"));
    if (re.rows() != im.rows() || re.cols() != im.cols()) throw DataError("archive: complex parts differ in shape");
    Eigen::MatrixXcd m(re.rows(), re.cols());
    m.real() = re;
    m.imag() = im;
    return m;
}

template <typename Scalar>
json encode_map(const PolynomialMap<Scalar>& map) {
    using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    return {{"dim", map.input_dim()},
            {"order_lo", map.basis().order_lo()},
            {"order_hi", map.basis().order_hi()},
            {"coefficients", encode(M(map.coefficients()))}};
}

MonomialBasis decode_basis(const json& j) {
    return MonomialBasis(j.at("dim").get<int>(), j.at("order_lo").get<int>(), j.at("order_hi").get<int>());
}

RealMap decode_real_map(const json& j) {
    MonomialBasis b = decode_basis(j);
    Eigen::MatrixXd c = decode_real(j.at("coefficients"));
    if (c.cols() != static_cast<Eigen::Index>(b.size())) throw DataError("archive: coefficient count mismatch");
    return RealMap(b, c);
}

ComplexMap decode_complex_map(const json& j) {
    MonomialBasis b = decode_basis(j);
    Eigen::MatrixXcd c = decode_complex(j.at("coefficients"));
    if (c.cols() != static_cast<Eigen::Index>(b.size())) throw DataError("archive: coefficient count mismatch");
    return ComplexMap(b, c);
}

json encode_vector(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(hexd(x));
    return out;
}

std::vector<double> decode_vector(const json& j) {
    std::vector<double> out;
    for (const auto& x : j) out.push_back(unhex(x));
    return out;
}

}  // namespace

std::string save_archive(const FullModel& model, const Provenance& provenance) {
    check_consistency(model);
    json j;
    j["format"] = "fastssm-model";
    j["version"] = kArchiveVersion;
    j["monomial_ordering"] = kMonomialOrdering;
    j["provenance"] = {{"config_hash", provenance.config_hash},
                       {"tool_version", provenance.tool_version},
                       {"timestamp", provenance.timestamp}};
    j["embedding"] = {{"p", model.embedding.p}, {"k", model.embedding.k}, {"dt", hexd(model.embedding.dt)}};
    j["n_obs"] = model.n_obs;
    const SsmModel& s = model.ssm;
    j["ssm"] = {{"tangent", encode(s.tangent)},
                {"column_scale", encode(Eigen::MatrixXd(s.column_scale))},
                {"parametrization", encode_map(s.parametrization)},
                {"singular_values", encode(Eigen::MatrixXd(s.singular_values))},
                {"energy", hexd(s.energy)},
                {"reconstruction_error", hexd(s.reconstruction_error)},
                {"principal_angle", hexd(s.principal_angle)},
                {"warnings", s.warnings}};
    const ReducedModel& r = model.reduced;
    j["reduced"] = {{"dynamics", encode_map(r.dynamics)},
                    {"eigenvectors", encode(r.eigenvectors)},
                    {"eigenvalues", encode(Eigen::MatrixXcd(r.eigenvalues))},
                    {"modal", encode_map(r.modal)},
                    {"condition", hexd(r.condition)},
                    {"residual", hexd(r.residual)}};
    const NormalFormModel& n = model.normal_form;
    json resonances = json::array();
    for (const auto& t : n.resonances) {
        resonances.push_back({{"row", t.row}, {"exponent", t.exponent}, {"detuning", hexd(t.detuning)}});
    }
    j["normal_form"] = {{"transform", encode_map(n.transform)},
                        {"normal_form", encode_map(n.normal_form)},
                        {"eigenvalues", encode(Eigen::MatrixXcd(n.eigenvalues))},
                        {"resonances", resonances},
                        {"tol_res", hexd(n.tol_res)},
                        {"full_complex_criterion", n.full_complex_criterion},
                        {"conjugacy_residual", hexd(n.conjugacy_residual)},
                        {"inverse_strategy", to_string(n.inverse_strategy)},
                        {"inverse_map", n.inverse_map ? encode_map(*n.inverse_map) : json(nullptr)},
                        {"warnings", n.warnings}};
    j["diagnostics"] = {{"training_nmte", encode_vector(model.training_nmte)},
                        {"training_amplitude", hexd(model.training_amplitude)}};
    return j.dump(1) + "\n";
}

FullModel load_archive(const std::string& text, Provenance* provenance) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("archive: not valid JSON (") + e.what() + ")");
    }
    try {
        if (!j.is_object() || j.value("format", "") != "fastssm-model") throw DataError("archive: not a fastssm model");
        const int version = j.at("version").get<int>();
        if (version != kArchiveVersion) {
            throw DataError("archive: unsupported version " + std::to_string(version) + " (this build reads version " +
                            std::to_string(kArchiveVersion) + ")");
        }
        if (j.at("monomial_ordering").get<std::string>() != kMonomialOrdering) {
            throw DataError("archive: unsupported monomial ordering '" + j.at("monomial_ordering").get<std::string>() +
                            "'");
        }
        if (provenance) {
            const auto& p = j.at("provenance");
            provenance->config_hash = p.at("config_hash").get<std::string>();
            provenance->tool_version = p.at("tool_version").get<std::string>();
            provenance->timestamp = p.at("timestamp").get<std::string>();
        }
        EmbeddingConfig emb{j.at("embedding").at("p").get<int>(), j.at("embedding").at("k").get<int>(),
                            unhex(j.at("embedding").at("dt"))};
        const auto& s = j.at("ssm");
        SsmModel ssm{decode_real(s.at("tangent")),
                     decode_real(s.at("column_scale")),
                     decode_real_map(s.at("parametrization")),
                     decode_real(s.at("singular_values")),
                     unhex(s.at("energy")),
                     unhex(s.at("reconstruction_error")),
                     unhex(s.at("principal_angle")),
                     s.at("warnings").get<Warnings>()};
        const auto& r = j.at("reduced");
        ReducedModel reduced{decode_real_map(r.at("dynamics")),
                             decode_complex(r.at("eigenvectors")),
                             decode_complex(r.at("eigenvalues")),
                             decode_complex_map(r.at("modal")),
                             unhex(r.at("condition")),
                             unhex(r.at("residual"))};
        const auto& n = j.at("normal_form");
        NormalFormModel nf{decode_complex_map(n.at("transform")), decode_complex_map(n.at("normal_form")),
                           decode_complex(n.at("eigenvalues"))};
        for (const auto& t : n.at("resonances")) {
            nf.resonances.push_back(
                {t.at("row").get<int>(), t.at("exponent").get<MultiIndex>(), unhex(t.at("detuning"))});
        }
        nf.tol_res = unhex(n.at("tol_res"));
        nf.full_complex_criterion = n.at("full_complex_criterion").get<bool>();
        nf.conjugacy_residual = unhex(n.at("conjugacy_residual"));
        nf.inverse_strategy = inverse_strategy_from_string(n.at("inverse_strategy").get<std::string>());
        if (!n.at("inverse_map").is_null()) nf.inverse_map = decode_complex_map(n.at("inverse_map"));
        nf.warnings = n.at("warnings").get<Warnings>();
        PolarNormalForm polar = polar_or_empty(nf, nullptr);
        FullModel model{emb, j.at("n_obs").get<int>(), ssm, reduced, nf, polar,
                        decode_vector(j.at("diagnostics").at("training_nmte")),
                        unhex(j.at("diagnostics").at("training_amplitude"))};
        check_consistency(model);
        return model;
    } catch (const json::exception& e) {
        throw DataError(std::string("archive: malformed content (") + e.what() + ")");
    } catch (const ShapeError& e) {
        throw DataError(std::string("archive: inconsistent model (") + e.what() + ")");
    } catch (const ConfigError& e) {
        throw DataError(std::string("archive: ") + e.what());
    }
}

void save_archive_file(const std::string& path, const FullModel& model, const Provenance& provenance) {
    write_file(path, save_archive(model, provenance));
}

FullModel load_archive_file(const std::string& path, Provenance* provenance) {
    try {
        return load_archive(read_file(path), provenance);
    } catch (const DataError& e) {
        const std::string what = e.what();
        if (what.rfind("cannot open", 0) == 0) throw;
        throw DataError(path + ": " + what);
    }
}

// ---------------------------------------------------------------------------
// Curves

std::string backbone_csv(const Backbone& curve, const std::string& hash) {
    std::ostringstream out;
    out << "# fastssm " << kVersion << " backbone\n";
    out << "# config_hash: " << hash << "\n";
    out << "# amplitude functional: " << curve.alpha.to_string() << "\n";
    out << "rho,omega_rad_s,amplitude\n";
    for (std::size_t i = 0; i < curve.rho.size(); ++i) {
        out << fmt17(curve.rho[i]) << "," << fmt17(curve.omega[i]) << "," << fmt17(curve.amplitude[i]) << "\n";
    }
    return out.str();
}

std::string frc_csv(const Frc& curve, const std::string& hash) {
    std::ostringstream out;
    out << "# fastssm " << kVersion << " forced response\n";
    out << "# config_hash: " << hash << "\n";
    for (const auto& d : curve.diagnostics) out << "# " << d << "\n";
    out << "omega_rad_s,rho0,psi0_rad,amplitude,stable,branch,f\n";
    for (const auto& p : curve.points) {
        out << fmt17(p.omega) << "," << fmt17(p.rho) << "," << fmt17(p.psi) << "," << fmt17(p.amplitude) << ","
            << (p.stable ? 1 : 0) << "," << (p.branch > 0 ? "+" : "-") << "," << fmt17(curve.f) << "\n";
    }
    return out.str();
}

}  // namespace fastssm
