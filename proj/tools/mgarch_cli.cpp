// mgarch_cli: simulate, fit, diagnose, forecast-eval, factor-fit, backtest and mc-study.

#include "mgarch/mgarch.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;
using namespace mgarch;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitOther = 1;

struct Globals {
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string out_dir = ".";
    std::string config;
};

std::string out_path(const Globals& g, const std::string& name) {
    std::filesystem::create_directories(g.out_dir);
    return (std::filesystem::path(g.out_dir) / name).string();
}

void write_json(const Globals& g, const std::string& name, const json& j) {
    io::write_text_file(out_path(g, name), j.dump(2) + "\n");
}

std::string fmt(double v, int prec = 6) {
    if (!std::isfinite(v)) {
        return "NA";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::string full(double v) { return std::isfinite(v) ? io::detail::format_double(v) : "NA"; }

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------------------
// --config: a JSON object whose keys are long option names. Global keys are placed before the
// subcommand, the rest right after it, so flags given on the command line take precedence.

bool is_global_key(const std::string& k) { return k == "seed" || k == "threads" || k == "out-dir"; }

std::string config_value(const json& v, const std::string& key) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_number_integer() || v.is_number_unsigned()) {
        return v.dump();
    }
    if (v.is_number_float()) {
        return io::detail::format_double(v.get<double>());
    }
    if (v.is_array()) {
        std::string s;
        for (const auto& e : v) {
            if (!e.is_primitive() || e.is_boolean() || e.is_null()) {
                throw invalid_input("config key '" + key + "': arrays must hold numbers or strings");
            }
            s += (s.empty() ? "" : ",") + config_value(e, key);
        }
        return s;
    }
    throw invalid_input("config key '" + key + "': unsupported value " + v.dump());
}

std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    std::size_t cmd = args.size();
    const std::vector<std::string> valued{"--seed", "--threads", "--out-dir", "--config"};
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--config=", 0) == 0) {
            path = a.substr(9);
        } else if (a == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
        }
        if (std::find(valued.begin(), valued.end(), a) != valued.end()) {
            ++i;
            continue;
        }
        if (!a.empty() && a[0] != '-') {
            cmd = i;
            break;
        }
    }
    if (path.empty()) {
        return args;
    }
    const json cfg = io::read_json_file(path);
    if (!cfg.is_object()) {
        throw invalid_input("config '" + path + "' must be a JSON object of option names");
    }
    std::vector<std::string> global;
    std::vector<std::string> local;
    for (const auto& [key, value] : cfg.items()) {
        if (key.empty() || key[0] == '-') {
            throw invalid_input("config key '" + key + "': write option names without leading dashes");
        }
        std::vector<std::string>& dst = is_global_key(key) ? global : local;
        if (value.is_boolean()) {
            if (value.get<bool>()) {
                dst.push_back("--" + key);
            }
            continue;
        }
        dst.push_back("--" + key + "=" + config_value(value, key));
    }
    std::vector<std::string> out = global;
    out.insert(out.end(), args.begin(), args.begin() + static_cast<std::ptrdiff_t>(std::min(cmd + 1, args.size())));
    if (cmd < args.size()) {
        out.insert(out.end(), local.begin(), local.end());
        out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(cmd + 1), args.end());
    } else if (!local.empty()) {
        throw invalid_input("config '" + path + "' has command options but no command was given");
    }
    return out;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string theta;
    std::string design = "estimation";
    int power_case = 1;
    int d = 0;
    std::string law = "normal";
    double dof = 15.0;
    std::size_t T = 0;
    std::size_t burn_in = 500;
    std::uint64_t stream = 0;
    std::string out = "panel.csv";
};

InnovationLaw make_law(const std::string& name, double dof, Eigen::Index m, Eigen::Index n) {
    if (name == "normal") {
        return InnovationLaw::normal(m, n);
    }
    if (name == "t") {
        return InnovationLaw::student(m, n, dof);
    }
    throw invalid_input("unknown innovation law '" + name + "' (expected normal|t)");
}

designs::PowerCase power_case(int c) {
    if (c != 1 && c != 2) {
        throw invalid_input("--case must be 1 or 2");
    }
    return c == 1 ? designs::PowerCase::arch : designs::PowerCase::garch;
}

int run_simulate(const Globals& g, const SimulateArgs& a) {
    Theta th;
    if (!a.theta.empty()) {
        th = io::theta_from_json(io::read_json_file(a.theta));
    } else if (a.design == "estimation") {
        th = designs::estimation_design();
    } else if (a.design == "power") {
        th = designs::power_design(power_case(a.power_case), a.d);
    } else {
        throw invalid_input("unknown design '" + a.design + "' (expected estimation|power)");
    }
    const InnovationLaw law = make_law(a.law, a.dof, th.m(), th.n());
    SimulateOptions so;
    so.seed = g.seed;
    so.stream = a.stream;
    so.burn_in = a.burn_in;
    so.on_warning = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
    const MatrixPanel panel = simulate(th, a.T, law, so);
    io::save_panel(out_path(g, a.out), panel);
    json j;
    j["command"] = "simulate";
    j["theta"] = io::theta_to_json(th);
    j["T"] = a.T;
    j["law"] = a.law;
    if (a.law == "t") {
        j["dof"] = a.dof;
    }
    j["seed"] = g.seed;
    j["stream"] = a.stream;
    j["burn_in"] = a.burn_in;
    j["panel"] = a.out;
    write_json(g, "simulate.json", j);
    std::cout << "simulated T = " << a.T << " observations of " << th.m() << " x " << th.n() << " matrices -> "
              << out_path(g, a.out) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string data;
    bool demean = false;
    std::string structure = "diagonal";
    int arch = 1;
    int garch = 1;
    int multistarts = 5;
    int max_iter = 500;
    double tol = 1e-6;
    bool no_sandwich = false;
    std::string start;
    std::string out = "fit.json";
};

FitOptions fit_options(const Globals& g, const FitArgs& a) {
    FitOptions fo;
    fo.structure = structure_from_string(a.structure);
    fo.order = {a.arch, a.garch};
    check_order(fo.order);
    fo.multistarts = a.multistarts;
    fo.max_iter = a.max_iter;
    fo.tol = a.tol;
    fo.seed = g.seed;
    fo.compute_sandwich = !a.no_sandwich;
    if (!a.start.empty()) {
        fo.start = io::theta_from_json(io::read_json_file(a.start));
    }
    return fo;
}

void print_fit(const FitResult& f) {
    const auto names = param_names(ThetaShape::of(f.theta_hat));
    const Vector est = to_natural(f.theta_hat);
    std::printf("%-16s %14s %14s\n", "parameter", "estimate", "std.error");
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        std::printf("%-16s %14s %14s\n", names[i].c_str(), fmt(est(k)).c_str(),
                    f.active[i] ? fmt(f.std_errors(k)).c_str() : "inactive");
    }
    std::printf("neg. log-likelihood %s, converged %s, gradient norm %.3g, starts %d\n", fmt(f.neg_loglik).c_str(),
                f.converged ? "yes" : "no", f.gradient_norm, f.multistart_best_of);
    if (f.boundary) {
        std::printf("warning: estimate lies near the boundary of the stationary region\n");
    }
    if (!f.has_sandwich && !f.sandwich_error.empty()) {
        std::printf("warning: no standard errors (%s)\n", f.sandwich_error.c_str());
    }
}

int run_fit(const Globals& g, const FitArgs& a) {
    const FitOptions fo = fit_options(g, a);
    const MatrixPanel panel = io::load_panel(a.data, a.demean);
    const FitResult f = fit(panel, fo);
    json j = io::fit_to_json(f);
    j["command"] = "fit";
    j["data"] = a.data;
    j["demean"] = a.demean;
    write_json(g, a.out, j);
    print_fit(f);
    return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
    std::string data;
    std::string fit;
    bool demean = false;
    std::vector<int> lags{2, 4, 6, 8};
    std::string omega = "eta";
    std::string out = "diagnose.json";
};

DiagnoseOptions diagnose_options(const std::string& omega) {
    if (omega == "eta") {
        return {OmegaLeading::eta_squared};
    }
    if (omega == "kappa") {
        return {OmegaLeading::kappa_squared};
    }
    throw invalid_input("--omega must be eta or kappa");
}

int run_diagnose(const Globals& g, const DiagnoseArgs& a) {
    const DiagnoseOptions dopt = diagnose_options(a.omega);
    const Theta th = io::theta_from_json(io::read_json_file(a.fit));
    const PreparedPanel data(io::load_panel(a.data, a.demean));
    for (int L : a.lags) {
        if (L < 1 || static_cast<std::size_t>(L) >= data.size()) {
            throw invalid_input("--lags: every L must satisfy 1 <= L < T");
        }
    }
    const FitResult f = inference_at(th, data);
    const PortmanteauParts parts = portmanteau_parts(data, f);
    json j;
    j["command"] = "diagnose";
    j["data"] = a.data;
    j["tests"] = json::array();
    std::ostringstream csv;
    csv << "L,Q,df,p_value\n";
    std::printf("%4s %12s %10s\n", "L", "Q_T(L)", "p-value");
    for (int L : a.lags) {
        const DiagnosticReport r = portmanteau(parts, L, dopt);
        j["tests"].push_back({{"L", L}, {"Q", r.Q}, {"p_value", r.p_value}, {"R_hat", io::to_json(r.R_hat)}});
        csv << L << ',' << full(r.Q) << ',' << L << ',' << full(r.p_value) << '\n';
        std::printf("%4d %12s %10s\n", L, fmt(r.Q, 4).c_str(), fmt(r.p_value, 3).c_str());
    }
    j["kappa_hat"] = parts.kappa;
    j["omega_leading"] = a.omega;
    write_json(g, a.out, j);
    io::write_text_file(out_path(g, "diagnose.csv"), csv.str());
    return 0;
}

// ---------------------------------------------------------------------------
// forecast-eval

struct ForecastArgs {
    std::string data;
    bool demean = false;
    std::size_t test_size = 0;
    std::vector<std::string> models{"matrix_garch",         "univariate_garch", "diag_bekk_vt_full",
                                    "diag_bekk_vt_column", "diag_bekk_vt_row",  "riskmetrics"};
    std::string benchmark = "matrix_garch";
    double lambda = 0.94;
    std::string structure = "diagonal";
    int multistarts = 1;
};

int run_forecast_eval(const Globals& g, const ForecastArgs& a) {
    std::vector<Model> models;
    for (const auto& s : a.models) {
        models.push_back(model_from_string(s));
    }
    const Model bench = model_from_string(a.benchmark);
    if (std::find(models.begin(), models.end(), bench) == models.end()) {
        models.insert(models.begin(), bench);
    }
    const MatrixPanel panel = io::load_panel(a.data, a.demean);
    if (a.test_size < 10 || a.test_size + 2 > panel.size()) {
        throw invalid_input("--test-size must be at least 10 and leave at least 2 training observations");
    }
    const std::size_t n_train = panel.size() - a.test_size;
    ForecastOptions fo;
    fo.lambda = a.lambda;
    fo.fit.structure = structure_from_string(a.structure);
    fo.fit.multistarts = a.multistarts;
    fo.fit.compute_sandwich = false;
    fo.fit.seed = g.seed;
    const std::vector<Matrix> realized(panel.data().begin() + static_cast<std::ptrdiff_t>(n_train),
                                       panel.data().end());

    std::vector<Losses> losses;
    json j;
    j["command"] = "forecast-eval";
    j["n_train"] = n_train;
    j["n_test"] = a.test_size;
    j["benchmark"] = to_string(bench);
    j["models"] = json::array();
    for (Model m : models) {
        const CovForecasts f = baseline_forecasts(panel, m, n_train, fo);
        losses.push_back(entry_losses(entry_variances(f, panel.rows(), panel.cols()), realized));
        for (const auto& msg : f.failures) {
            std::cerr << "warning: " << msg << "\n";
        }
        json mj{{"model", to_string(m)}, {"converged", f.converged}, {"failures", f.failures}};
        j["models"].push_back(mj);
    }
    const std::size_t bi = static_cast<std::size_t>(std::find(models.begin(), models.end(), bench) - models.begin());

    std::ostringstream csv;
    csv << "model,MSE,MAE,QLIKE,MSE_sum,MAE_sum,QLIKE_sum,dm_p_MSE,dm_p_MAE,dm_p_QLIKE,stars_MSE,stars_MAE,"
           "stars_QLIKE\n";
    std::printf("%-22s %16s %16s %16s\n", "model", "MSE", "MAE", "QLIKE");
    for (std::size_t k = 0; k < models.size(); ++k) {
        const Losses& l = losses[k];
        std::array<double, 3> p{std::nan(""), std::nan(""), std::nan("")};
        std::array<std::string, 3> st;
        if (k != bi) {
            const std::array<std::pair<const std::vector<double>*, const std::vector<double>*>, 3> series{
                {{&l.mse_series, &losses[bi].mse_series},
                 {&l.mae_series, &losses[bi].mae_series},
                 {&l.qlike_series, &losses[bi].qlike_series}}};
            for (std::size_t s = 0; s < 3; ++s) {
                if (s == 2 && !(l.qlike_defined && losses[bi].qlike_defined)) {
                    continue;
                }
                const DmResult dm = dm_test(*series[s].first, *series[s].second);
                if (dm.defined) {
                    p[s] = dm.p_value;
                    // stars only when the benchmark is the more accurate forecaster
                    st[s] = dm.stat > 0.0 ? stars(dm.p_value) : "";
                }
            }
        }
        auto& mj = j["models"][k];
        mj["MSE"] = l.mse;
        mj["MAE"] = l.mae;
        mj["QLIKE"] = nullable(l.qlike);
        mj["MSE_sum"] = l.mse_sum;
        mj["MAE_sum"] = l.mae_sum;
        mj["QLIKE_sum"] = nullable(l.qlike_sum);
        mj["dm_p"] = {{"MSE", nullable(p[0])}, {"MAE", nullable(p[1])}, {"QLIKE", nullable(p[2])}};
        mj["stars"] = {{"MSE", st[0]}, {"MAE", st[1]}, {"QLIKE", st[2]}};
        csv << to_string(models[k]) << ',' << full(l.mse) << ',' << full(l.mae) << ',' << full(l.qlike) << ','
            << full(l.mse_sum) << ',' << full(l.mae_sum) << ',' << full(l.qlike_sum) << ',' << full(p[0]) << ','
            << full(p[1]) << ',' << full(p[2]) << ',' << st[0] << ',' << st[1] << ',' << st[2] << '\n';
        std::printf("%-22s %13s%-3s %13s%-3s %13s%-3s\n", to_string(models[k]), fmt(l.mse, 4).c_str(), st[0].c_str(),
                    fmt(l.mae, 4).c_str(), st[1].c_str(), fmt(l.qlike, 4).c_str(), st[2].c_str());
    }
    std::printf("*, **, ***: the DM test finds %s more accurate at the 10%%, 5%%, 1%% level\n", to_string(bench));
    write_json(g, "forecast_eval.json", j);
    io::write_text_file(out_path(g, "forecast_eval.csv"), csv.str());
    return 0;
}

// ---------------------------------------------------------------------------
// factor-fit

struct FactorArgs {
    std::string data;
    bool demean = false;
    int k1 = 0;
    int k2 = 0;
    int k_max = 0;
    bool no_rotate = false;
    int multistarts = 5;
    std::string out = "factor_fit.json";
};

int run_factor_fit(const Globals& g, const FactorArgs& a) {
    if (a.k1 < 0 || a.k2 < 0 || a.k_max < 0) {
        throw invalid_input("--k1, --k2 and --k-max must be non-negative");
    }
    const MatrixPanel panel = io::load_panel(a.data, a.demean);
    FactorOptions fo;
    fo.k1 = a.k1;
    fo.k2 = a.k2;
    fo.k_max = a.k_max;
    fo.rotate = !a.no_rotate;
    fo.garch.multistarts = a.multistarts;
    fo.garch.seed = g.seed;
    const FactorFit f = factor_fit(panel, fo);
    json j;
    j["command"] = "factor-fit";
    j["k1"] = f.k1;
    j["k2"] = f.k2;
    j["R"] = io::to_json(f.R_load);
    j["C"] = io::to_json(f.C_load);
    j["sigma_e_diagonal"] = f.sigma_e_diagonal;
    j["sigma_e"] = io::to_json(f.sigma_e);
    j["garch"] = io::fit_to_json(f.garch);
    j["warnings"] = f.warnings;
    j["factors"] = "factors.csv";
    write_json(g, a.out, j);
    io::save_panel(out_path(g, "factors.csv"), f.factors);
    std::printf("factor numbers k1 = %ld, k2 = %ld\n", static_cast<long>(f.k1), static_cast<long>(f.k2));
    for (const auto& w : f.warnings) {
        std::printf("warning: %s\n", w.c_str());
    }
    print_fit(f.garch);
    return 0;
}

// ---------------------------------------------------------------------------
// backtest

struct BacktestArgs {
    std::string data;
    std::vector<std::string> engines{"mf_garch", "riskmetrics", "equal_weights", "sample"};
    std::size_t T_train = 0;
    std::size_t T_test = 0;
    bool constrained = false;
    int refit_every = 1;
    double ppy = 252.0;
    double lambda = 0.94;
    int k1 = 0;
    int k2 = 0;
    int multistarts = 1;
};

int run_backtest(const Globals& g, const BacktestArgs& a) {
    std::vector<Engine> engines;
    for (const auto& s : a.engines) {
        engines.push_back(engine_from_string(s));
    }
    const MatrixPanel panel = io::load_panel(a.data, false);
    std::vector<BacktestResult> results;
    json j;
    j["command"] = "backtest";
    j["constrained"] = a.constrained;
    j["engines"] = json::array();
    for (Engine e : engines) {
        BacktestOptions bo;
        bo.engine = e;
        bo.T_train = a.T_train;
        bo.T_test = a.T_test;
        bo.constrained = a.constrained;
        bo.refit_every = a.refit_every;
        bo.periods_per_year = a.ppy;
        bo.lambda = a.lambda;
        bo.factor.k1 = a.k1;
        bo.factor.k2 = a.k2;
        bo.factor.garch.multistarts = a.multistarts;
        bo.factor.garch.compute_sandwich = false;
        bo.factor.garch.seed = g.seed;
        results.push_back(rolling_backtest(panel, bo));
        const BacktestResult& r = results.back();
        for (const auto& msg : r.messages) {
            std::cerr << "warning (" << to_string(e) << "): " << msg << "\n";
        }
        j["engines"].push_back({{"engine", to_string(e)},
                                {"AV", r.AV},
                                {"SD", r.SD},
                                {"IR", r.IR},
                                {"flagged", std::count(r.flagged.begin(), r.flagged.end(), true)},
                                {"messages", r.messages}});
    }
    std::ostringstream metrics;
    metrics << "engine,AV,SD,IR,flagged\n";
    std::printf("%-14s %12s %12s %10s\n", "engine", "AV", "SD", "IR");
    for (std::size_t k = 0; k < engines.size(); ++k) {
        const auto& r = results[k];
        metrics << to_string(engines[k]) << ',' << full(r.AV) << ',' << full(r.SD) << ',' << full(r.IR) << ','
                << std::count(r.flagged.begin(), r.flagged.end(), true) << '\n';
        std::printf("%-14s %12s %12s %10s\n", to_string(engines[k]), fmt(r.AV, 3).c_str(), fmt(r.SD, 3).c_str(),
                    fmt(r.IR, 3).c_str());
    }
    std::ostringstream cum;
    cum << "time";
    for (Engine e : engines) {
        cum << ',' << to_string(e);
    }
    cum << '\n';
    const auto& labels = panel.time_labels();
    const std::size_t start = panel.size() - a.T_test;
    for (std::size_t t = 0; t < a.T_test; ++t) {
        cum << (labels.empty() ? std::to_string(start + t + 1) : labels[start + t]);
        for (const auto& r : results) {
            cum << ',' << full(r.cumulative[t]);
        }
        cum << '\n';
    }
    write_json(g, "backtest.json", j);
    io::write_text_file(out_path(g, "backtest_metrics.csv"), metrics.str());
    io::write_text_file(out_path(g, "cumulative_returns.csv"), cum.str());
    return 0;
}

// ---------------------------------------------------------------------------
// mc-study

struct McArgs {
    std::string design = "table1";
    std::size_t reps = 0;
    std::size_t T = 0;
    std::size_t burn_in = 0;
    int power_case = 1;
    std::vector<int> d{0, 2, 4, 6, 8, 10};
    std::vector<int> lags{2, 4, 6, 8};
    double alpha = 0.05;
    std::string omega = "eta";
    int multistarts = 1;
};

int mc_estimation(const Globals& g, const McArgs& a, const InnovationLaw& law, const std::string& label) {
    study::EstimationStudyOptions o;
    o.law = law;
    o.T = a.T == 0 ? 1000 : a.T;
    o.reps = a.reps;
    o.seed = g.seed;
    o.burn_in = a.burn_in;
    o.threads = g.threads;
    o.fit.multistarts = a.multistarts;
    const study::EstimationStudy s = study::estimation_study(o);
    std::ostringstream csv;
    csv << "parameter,true,bias,SE,AE,SD,coverage95\n";
    json j;
    j["command"] = "mc-study";
    j["design"] = a.design;
    j["innovations"] = label;
    j["T"] = o.T;
    j["reps"] = a.reps;
    j["used"] = s.used;
    j["failed"] = s.failed;
    j["failures"] = s.failures;
    j["seed"] = g.seed;
    j["burn_in"] = a.burn_in;
    j["rows"] = json::array();
    std::printf("%s innovations, T = %zu, %zu of %zu replications used\n", label.c_str(), o.T, s.used, a.reps);
    std::printf("%-14s %8s %9s %9s %9s\n", "parameter", "true", "bias", "SE", "AE");
    for (std::size_t i = 0; i < s.names.size(); ++i) {
        if (!s.active[i]) {
            continue;
        }
        const auto k = static_cast<Eigen::Index>(i);
        csv << s.names[i] << ',' << full(s.truth(k)) << ',' << full(s.bias(k)) << ',' << full(s.se(k)) << ','
            << full(s.ae(k)) << ',' << full(s.sd(k)) << ',' << full(s.coverage(k)) << '\n';
        j["rows"].push_back({{"parameter", s.names[i]},
                             {"true", s.truth(k)},
                             {"bias", s.bias(k)},
                             {"SE", s.se(k)},
                             {"AE", nullable(s.ae(k))},
                             {"SD", s.sd(k)},
                             {"coverage95", s.coverage(k)}});
        std::printf("%-14s %8s %9s %9s %9s\n", s.names[i].c_str(), fmt(s.truth(k), 3).c_str(),
                    fmt(s.bias(k), 4).c_str(), fmt(s.se(k), 4).c_str(), fmt(s.ae(k), 4).c_str());
    }
    write_json(g, "mc_" + a.design + ".json", j);
    io::write_text_file(out_path(g, "mc_" + a.design + ".csv"), csv.str());
    return 0;
}

int mc_power(const Globals& g, const McArgs& a) {
    study::PowerStudyOptions o;
    o.which = power_case(a.power_case);
    o.d_values = a.d;
    o.lags = a.lags;
    o.T = a.T == 0 ? 2000 : a.T;
    o.reps = a.reps;
    o.seed = g.seed;
    o.burn_in = a.burn_in;
    o.alpha = a.alpha;
    o.threads = g.threads;
    o.diagnose = diagnose_options(a.omega);
    o.fit.multistarts = a.multistarts;
    const study::PowerStudy s = study::power_study(o);
    std::ostringstream csv;
    csv << "case,d,L,rejection,mean_Q,used,failed\n";
    json j;
    j["command"] = "mc-study";
    j["design"] = "power";
    j["case"] = a.power_case;
    j["T"] = o.T;
    j["reps"] = a.reps;
    j["alpha"] = a.alpha;
    j["seed"] = g.seed;
    j["points"] = json::array();
    j["failures"] = s.failures;
    std::printf("case %d, T = %zu, level %.2f\n%4s %4s %10s %10s\n", a.power_case, o.T, a.alpha, "d", "L",
                "rejection", "mean Q");
    for (const auto& p : s.points) {
        csv << a.power_case << ',' << p.d << ',' << p.L << ',' << full(p.rejection) << ',' << full(p.mean_Q) << ','
            << p.used << ',' << p.failed << '\n';
        j["points"].push_back({{"d", p.d},
                               {"L", p.L},
                               {"rejection", p.rejection},
                               {"mean_Q", p.mean_Q},
                               {"used", p.used},
                               {"failed", p.failed}});
        std::printf("%4d %4d %10s %10s\n", p.d, p.L, fmt(p.rejection, 3).c_str(), fmt(p.mean_Q, 3).c_str());
    }
    write_json(g, "mc_power.json", j);
    io::write_text_file(out_path(g, "mc_power.csv"), csv.str());
    return 0;
}

int run_mc(const Globals& g, const McArgs& a) {
    if (a.reps == 0) {
        throw invalid_input("--reps must be positive");
    }
    if (a.design == "table1") {
        return mc_estimation(g, a, InnovationLaw::normal(3, 3), "MN");
    }
    if (a.design == "table2") {
        return mc_estimation(g, a, InnovationLaw::student(3, 3, 15.0), "SMT15");
    }
    if (a.design == "table3") {
        return mc_estimation(g, a, InnovationLaw::student(3, 3, 25.0), "SMT25");
    }
    if (a.design == "power") {
        return mc_power(g, a);
    }
    throw invalid_input("unknown design '" + a.design + "' (expected table1|table2|table3|power)");
}

// ---------------------------------------------------------------------------

template <class Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const invalid_input& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args;
    if (const int rc = guarded([&] {
            args = expand_config(argc, argv);
            return 0;
        });
        rc != 0) {
        return rc;
    }

    CLI::App app{"Matrix GARCH toolkit"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads for mc-study")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "Directory for result files")->capture_default_str();
    app.add_option("--config", g.config, "JSON file of option values (keys are long option names)");

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Simulate a matrix GARCH panel");
    sim->add_option("--T", sa.T, "Number of observations")->required()->check(CLI::PositiveNumber);
    sim->add_option("--theta", sa.theta, "Theta JSON (overrides --design)")->check(CLI::ExistingFile);
    sim->add_option("--design", sa.design, "estimation|power")->capture_default_str();
    sim->add_option("--case", sa.power_case, "Power design case (1 or 2)")->capture_default_str();
    sim->add_option("--d", sa.d, "Power design strength")->check(CLI::NonNegativeNumber)->capture_default_str();
    sim->add_option("--law", sa.law, "normal|t")->capture_default_str();
    sim->add_option("--dof", sa.dof, "Degrees of freedom of the matrix t")->capture_default_str();
    sim->add_option("--burn-in", sa.burn_in, "Discarded initial draws")->capture_default_str();
    sim->add_option("--stream", sa.stream, "Random stream index")->capture_default_str();
    sim->add_option("--out", sa.out, "Output panel CSV")->capture_default_str();

    FitArgs fa;
    auto add_fit_opts = [](CLI::App* c, FitArgs& f) {
        c->add_option("--data", f.data, "Long CSV panel")->required()->check(CLI::ExistingFile);
        c->add_flag("--demean", f.demean, "Remove the sample mean of every entry");
        c->add_option("--structure", f.structure, "diagonal|full")->capture_default_str();
        c->add_option("--arch", f.arch, "ARCH order (1 or 2)")->capture_default_str();
        c->add_option("--garch", f.garch, "GARCH order (0 to 2)")->capture_default_str();
        c->add_option("--multistarts", f.multistarts, "Number of starts")->capture_default_str();
        c->add_option("--max-iter", f.max_iter, "Iteration cap per start")->capture_default_str();
        c->add_option("--tol", f.tol, "Gradient tolerance")->capture_default_str();
        c->add_flag("--no-sandwich", f.no_sandwich, "Skip standard errors");
        c->add_option("--start", f.start, "Theta JSON warm start")->check(CLI::ExistingFile);
        c->add_option("--out", f.out, "Output JSON")->capture_default_str();
    };
    auto* fitc = app.add_subcommand("fit", "Quasi maximum likelihood fit with sandwich standard errors");
    add_fit_opts(fitc, fa);

    DiagnoseArgs da;
    auto* diag = app.add_subcommand("diagnose", "Portmanteau test Q_T(L) for a fitted model");
    diag->add_option("--data", da.data, "Long CSV panel")->required()->check(CLI::ExistingFile);
    diag->add_option("--fit", da.fit, "Fit or theta JSON")->required()->check(CLI::ExistingFile);
    diag->add_flag("--demean", da.demean, "Remove the sample mean of every entry");
    diag->add_option("--lags", da.lags, "Lag menu, e.g. 2,4,6")->delimiter(',')->capture_default_str();
    diag->add_option("--omega", da.omega, "Leading term of Omega: eta|kappa")->capture_default_str();
    diag->add_option("--out", da.out, "Output JSON")->capture_default_str();

    ForecastArgs ea;
    auto* fev = app.add_subcommand("forecast-eval", "Out-of-sample variance forecast comparison");
    fev->add_option("--data", ea.data, "Long CSV panel")->required()->check(CLI::ExistingFile);
    fev->add_flag("--demean", ea.demean, "Remove the sample mean of every entry");
    fev->add_option("--test-size", ea.test_size, "Number of held-out observations")->required();
    fev->add_option("--models", ea.models, "Comma-separated model list")->delimiter(',')->capture_default_str();
    fev->add_option("--benchmark", ea.benchmark, "Model the DM stars refer to")->capture_default_str();
    fev->add_option("--lambda", ea.lambda, "RiskMetrics decay")->capture_default_str();
    fev->add_option("--structure", ea.structure, "Matrix GARCH structure")->capture_default_str();
    fev->add_option("--multistarts", ea.multistarts, "Starts per fit")->capture_default_str();

    FactorArgs ka;
    auto* fac = app.add_subcommand("factor-fit", "Matrix factor GARCH fit");
    fac->add_option("--data", ka.data, "Long CSV panel")->required()->check(CLI::ExistingFile);
    fac->add_flag("--demean", ka.demean, "Remove the sample mean of every entry");
    fac->add_option("--k1", ka.k1, "Row factors (0 selects by eigenvalue ratio)")->capture_default_str();
    fac->add_option("--k2", ka.k2, "Column factors (0 selects by eigenvalue ratio)")->capture_default_str();
    fac->add_option("--k-max", ka.k_max, "Largest factor number considered")->capture_default_str();
    fac->add_flag("--no-rotate", ka.no_rotate, "Skip varimax");
    fac->add_option("--multistarts", ka.multistarts, "Starts of the factor GARCH fit")->capture_default_str();
    fac->add_option("--out", ka.out, "Output JSON")->capture_default_str();

    BacktestArgs ba;
    auto* bt = app.add_subcommand("backtest", "Rolling minimum-variance portfolio backtest");
    bt->add_option("--data", ba.data, "Long CSV panel of returns")->required()->check(CLI::ExistingFile);
    bt->add_option("--engines", ba.engines, "mf_garch,riskmetrics,equal_weights,sample")
        ->delimiter(',')
        ->capture_default_str();
    bt->add_option("--T-train", ba.T_train, "Estimation window")->required();
    bt->add_option("--T-test", ba.T_test, "Test periods")->required();
    bt->add_flag("--constrained", ba.constrained, "Long-only weights");
    bt->add_option("--refit-every", ba.refit_every, "Refit cadence of mf_garch")->capture_default_str();
    bt->add_option("--ppy", ba.ppy, "Periods per year")->capture_default_str();
    bt->add_option("--lambda", ba.lambda, "RiskMetrics decay")->capture_default_str();
    bt->add_option("--k1", ba.k1, "Row factors (0 selects)")->capture_default_str();
    bt->add_option("--k2", ba.k2, "Column factors (0 selects)")->capture_default_str();
    bt->add_option("--multistarts", ba.multistarts, "Starts of the factor GARCH fit")->capture_default_str();

    McArgs ma;
    auto* mc = app.add_subcommand("mc-study", "Monte Carlo studies of the estimator and the portmanteau test");
    mc->add_option("--design", ma.design, "table1|table2|table3|power")->capture_default_str();
    mc->add_option("--reps", ma.reps, "Replications")->required();
    mc->add_option("--T", ma.T, "Sample size (default 1000 for tables, 2000 for power)");
    mc->add_option("--burn-in", ma.burn_in, "Discarded initial draws")->capture_default_str();
    mc->add_option("--case", ma.power_case, "Power case (1 or 2)")->capture_default_str();
    mc->add_option("--d", ma.d, "Power strengths")->delimiter(',')->capture_default_str();
    mc->add_option("--lags", ma.lags, "Lag menu")->delimiter(',')->capture_default_str();
    mc->add_option("--alpha", ma.alpha, "Test level")->capture_default_str();
    mc->add_option("--omega", ma.omega, "Leading term of Omega: eta|kappa")->capture_default_str();
    mc->add_option("--multistarts", ma.multistarts, "Starts per fit")->capture_default_str();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    return guarded([&] {
        if (*sim) {
            return run_simulate(g, sa);
        }
        if (*fitc) {
            return run_fit(g, fa);
        }
        if (*diag) {
            return run_diagnose(g, da);
        }
        if (*fev) {
            return run_forecast_eval(g, ea);
        }
        if (*fac) {
            return run_factor_fit(g, ka);
        }
        if (*bt) {
            return run_backtest(g, ba);
        }
        return run_mc(g, ma);
    });
}
