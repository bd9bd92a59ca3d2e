#pragma once

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "gridopt/forecast.hpp"
#include "gridopt/io_formats.hpp"
#include "gridopt/parallel.hpp"

namespace gridopt::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  std::string subcommand;
  std::string config_path;
  std::string out_dir = ".";
  int workers = 0;          // 0: resolve from GRIDOPT_WORKERS, else 1
  std::uint64_t seed = 1;
  bool seed_overridden = false;
  json config;
};

/// Collects the inputs/outputs of one run for the replay manifest.
struct RunContext {
  RunConfig cfg;
  std::vector<std::pair<std::string, std::string>> input_hashes;
  std::vector<std::string> outputs;

  std::string out_path(const std::string& name) const {
    return (fs::path(cfg.out_dir) / name).string();
  }

  std::string track_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open input file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::uint64_t h = detail::fnv1a64(bytes);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    input_hashes.push_back({path, buf});
    return path;
  }

  void track_output(const std::string& path) { outputs.push_back(path); }
};

namespace detail_cli {

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ParseError(std::string(path) + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError("config field '" + key + "': " + e.what());
  }
}

template <typename T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw InputError("config is missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError("config field '" + key + "': " + e.what());
  }
}

inline ADMMParams admm_from_json(const json& j) {
  ADMMParams p;
  if (!j.contains("admm")) {
    // Tight defaults for file-driven runs: ranking results should not move
    // with the stopping tolerance.
    p.eps_abs = 1e-6;
    p.eps_rel = 1e-6;
    p.max_iter = 100000;
    return p;
  }
  const json& a = j.at("admm");
  p.penalty = get_or(a, "penalty", 1.0);
  p.eps_abs = get_or(a, "eps_abs", 1e-6);
  p.eps_rel = get_or(a, "eps_rel", 1e-6);
  p.max_iter = get_or(a, "max_iter", 100000);
  p.adapt_penalty = get_or(a, "adapt_penalty", true);
  p.relaxation = get_or(a, "relaxation", 1.6);
  return p;
}

inline GridSpec grid_from_json(const json& j) {
  GridSpec g;
  auto axis = [&](const char* key, GridAxis base) {
    if (!j.contains(key)) return base;
    const json& a = j.at(key);
    GridAxis out;
    out.lower = require<double>(a, "lower");
    out.upper = require<double>(a, "upper");
    out.steps = get_or(a, "steps", 8);
    out.log_scale = get_or(a, "log_scale", true);
    return out;
  };
  GridSpec defaults;
  g.gamma = axis("gamma", defaults.gamma);
  g.c = axis("c", defaults.c);
  g.epsilon = axis("epsilon", defaults.epsilon);
  return g;
}

inline Network load_network(RunContext& ctx, const json& cfg) {
  std::string buses = require<std::string>(cfg, "buses");
  std::string branches = require<std::string>(cfg, "branches");
  ctx.track_input(buses);
  ctx.track_input(branches);
  return parse_feeder(buses, branches);
}

/// Optional per-bus load scaling {"<bus id>": factor}.
inline void apply_scenario(const json& cfg, const Network& net, LoadProfile& loads) {
  if (!cfg.contains("scenario")) return;
  for (const auto& [key, factor] : cfg.at("scenario").items()) {
    int idx = net.bus_index(std::stol(key));
    double f = factor.get<double>();
    loads[idx].p_kw *= f;
    loads[idx].q_kvar *= f;
  }
}

inline void apply_scenario3(const json& cfg, const Network& net, PhaseLoadProfile& loads) {
  if (!cfg.contains("scenario")) return;
  for (const auto& [key, factor] : cfg.at("scenario").items()) {
    int idx = net.bus_index(std::stol(key));
    double f = factor.get<double>();
    for (int ph = 0; ph < 3; ++ph) {
      loads[idx].p_kw[ph] *= f;
      loads[idx].q_kvar[ph] *= f;
    }
  }
}

}  // namespace detail_cli

// ---------------------------------------------------------------------------
// Subcommand bodies. Each returns the summary JSON it wrote.
// ---------------------------------------------------------------------------

inline json run_tune(RunContext& ctx) {
  using namespace detail_cli;
  const json& cfg = ctx.cfg.config;
  TimeSeries series = read_time_series(ctx.track_input(require<std::string>(cfg, "series")));
  int window = get_or(cfg, "window", 24);
  int horizon = get_or(cfg, "horizon", 1);
  double train_fraction = get_or(cfg, "train_fraction", 0.8);
  int n_train = static_cast<int>(series.size() * train_fraction);
  if (n_train <= window + horizon) throw InputError("training prefix too short");

  // Tuning operates on the scaled series so the default grid applies.
  std::vector<double> train(series.values.begin(), series.values.begin() + n_train);
  double lo = *std::min_element(train.begin(), train.end());
  double hi = *std::max_element(train.begin(), train.end());
  double scale = hi > lo ? hi - lo : 1.0;
  std::vector<double> normalized;
  for (double v : train) normalized.push_back((v - lo) / scale);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  make_lag_dataset(normalized, window, horizon, x, y);

  TuneConfig tc;
  tc.keep = get_or(cfg, "keep", 2);
  tc.swarm_size = get_or(cfg, "swarm_size", 8);
  tc.pso_iters = get_or(cfg, "pso_iters", 10);
  tc.skip_pso = get_or(cfg, "skip_pso", false);
  tc.split = get_or(cfg, "split", 1.0 / 6.0);
  tc.seed = ctx.cfg.seed;
  tc.workers = ctx.cfg.workers;
  TuneResult result = optimize_hyperparams(x, y, grid_from_json(cfg), tc);

  json out;
  out["gamma"] = result.best.gamma;
  out["c"] = result.best.c;
  out["epsilon"] = result.best.epsilon;
  out["risk"] = result.risk;
  out["gta_risk"] = result.gta_risk;
  out["window"] = window;
  out["horizon"] = horizon;
  std::ofstream f(ctx.out_path("hyperparams.json"));
  f << out.dump(2) << '\n';
  ctx.track_output(ctx.out_path("hyperparams.json"));
  return out;
}

inline json run_forecast(RunContext& ctx) {
  using namespace detail_cli;
  const json& cfg = ctx.cfg.config;
  TimeSeries series = read_time_series(ctx.track_input(require<std::string>(cfg, "series")));
  int window = get_or(cfg, "window", 24);
  int horizon = get_or(cfg, "horizon", 1);
  double train_fraction = get_or(cfg, "train_fraction", 0.8);
  int n_train = static_cast<int>(series.size() * train_fraction);
  if (n_train <= window + horizon) throw InputError("training prefix too short");

  HyperParams hyper;
  if (cfg.contains("hyper")) {
    const json& h = cfg.at("hyper");
    hyper = {require<double>(h, "gamma"), require<double>(h, "c"),
             require<double>(h, "epsilon")};
  } else {
    // Two-step search on the training prefix.
    std::vector<double> train(series.values.begin(), series.values.begin() + n_train);
    double lo = *std::min_element(train.begin(), train.end());
    double hi = *std::max_element(train.begin(), train.end());
    double scale = hi > lo ? hi - lo : 1.0;
    std::vector<double> normalized;
    for (double v : train) normalized.push_back((v - lo) / scale);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    make_lag_dataset(normalized, window, horizon, x, y);
    TuneConfig tc;
    tc.keep = get_or(cfg, "keep", 2);
    tc.swarm_size = get_or(cfg, "swarm_size", 6);
    tc.pso_iters = get_or(cfg, "pso_iters", 6);
    tc.skip_pso = get_or(cfg, "skip_pso", false);
    tc.split = get_or(cfg, "split", 1.0 / 6.0);
    tc.seed = ctx.cfg.seed;
    tc.workers = ctx.cfg.workers;
    hyper = optimize_hyperparams(x, y, grid_from_json(cfg), tc).best;
  }

  std::vector<double> train(series.values.begin(), series.values.begin() + n_train);
  ForecastPipeline pipe = train_forecaster(train, window, horizon, hyper);
  ForecastResult all = forecast_sliding(pipe, series, horizon, window);
  ForecastResult holdout;
  for (const auto& row : all.rows)
    if (row.origin >= n_train) holdout.rows.push_back(row);
  if (holdout.rows.empty()) throw InputError("no holdout region to forecast");

  write_forecast(holdout, series, ctx.out_path("forecast.csv"));
  ctx.track_output(ctx.out_path("forecast.csv"));
  ErrorMetrics em = error_metrics(holdout.predictions(), holdout.actuals());
  json out;
  out["mape_percent"] = em.mape_percent;
  out["nrmse_percent"] = em.nrmse_percent;
  out["skipped_mape_terms"] = em.skipped_mape_terms;
  out["hyper"] = {{"gamma", hyper.gamma}, {"c", hyper.c}, {"epsilon", hyper.epsilon}};
  out["holdout_points"] = holdout.rows.size();
  std::ofstream f(ctx.out_path("forecast_metrics.json"));
  f << out.dump(2) << '\n';
  ctx.track_output(ctx.out_path("forecast_metrics.json"));
  return out;
}

inline json run_reconfig(RunContext& ctx) {
  using namespace detail_cli;
  const json& cfg = ctx.cfg.config;
  Network net = load_network(ctx, cfg);
  LoadProfile loads = balanced_loads_from_network(net);
  apply_scenario(cfg, net, loads);

  auto t0 = std::chrono::steady_clock::now();
  ReconfigReport report = reconfigure(net, loads, admm_from_json(cfg), ctx.cfg.workers);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_reconfig_report_csv(report, net, ctx.out_path("reconfig_report.csv"));
  ctx.track_output(ctx.out_path("reconfig_report.csv"));
  json out = reconfig_summary_json(report, net, wall);
  std::ofstream f(ctx.out_path("reconfig_summary.json"));
  f << out.dump(2) << '\n';
  ctx.track_output(ctx.out_path("reconfig_summary.json"));
  return out;
}

inline json run_opf3(RunContext& ctx) {
  using namespace detail_cli;
  const json& cfg = ctx.cfg.config;
  Network net = load_network(ctx, cfg);
  PhaseLoadProfile loads = phase_loads_from_network(net);
  apply_scenario3(cfg, net, loads);

  std::vector<double> headroom(net.buses.size(), 0.0);
  if (cfg.contains("headroom_kw"))
    for (const auto& [key, kw] : cfg.at("headroom_kw").items())
      headroom[net.bus_index(std::stol(key))] = kw.get<double>();

  Opf3Options options;
  options.interval_minutes = get_or(cfg, "interval_minutes", 5.0);
  options.price_rt = get_or(cfg, "price_rt", 0.0);

  ThreePhaseBfm bfm = build_unbalanced_bfm(net, loads, headroom, options);
  IterationTrace trace;
  std::unique_ptr<CsvWriter> trace_writer;
  if (get_or(cfg, "trace", false)) {
    trace_writer = std::make_unique<CsvWriter>(ctx.out_path("admm_trace.csv"));
    trace_writer->row({"iter", "primal_residual", "dual_residual", "objective"});
    trace = [&](int iter, double pri, double dua, double obj) {
      trace_writer->row({std::to_string(iter), format_double(pri), format_double(dua),
                         format_double(obj)});
    };
    ctx.track_output(ctx.out_path("admm_trace.csv"));
  }
  OPF3Result result = solve_unbalanced_opf(bfm, admm_from_json(cfg), trace);
  if (!result.converged)
    throw DivergenceError("three-phase OPF did not converge", result.iterations);

  write_opf3_result_csv(result, net, ctx.out_path("opf3_result.csv"));
  ctx.track_output(ctx.out_path("opf3_result.csv"));
  json out = opf3_summary_json(result);
  std::ofstream f(ctx.out_path("opf3_summary.json"));
  f << out.dump(2) << '\n';
  ctx.track_output(ctx.out_path("opf3_summary.json"));
  return out;
}

inline json run_fit_errors(RunContext& ctx) {
  using namespace detail_cli;
  const json& cfg = ctx.cfg.config;
  std::vector<double> samples =
      read_samples_csv(ctx.track_input(require<std::string>(cfg, "samples")));

  EMConfig em_cfg;
  em_cfg.seed = ctx.cfg.seed;
  em_cfg.max_iter = get_or(cfg, "em_max_iter", 300);
  EmFitReport gsm = em_fit(samples, 1, em_cfg);
  int fixed_k = get_or(cfg, "k", 3);
  EmFitReport fixed = em_fit(samples, fixed_k, em_cfg);

  GAEMConfig ga;
  ga.population_size = get_or(cfg, "population_size", 24);
  ga.generations = get_or(cfg, "generations", 20);
  ga.k_min = get_or(cfg, "k_min", 1);
  ga.k_max = get_or(cfg, "k_max", 6);
  ga.em_steps_per_child = get_or(cfg, "em_steps_per_child", 5);
  ga.crossover_prob = get_or(cfg, "crossover_prob", 0.8);
  ga.mutation_prob = get_or(cfg, "mutation_prob", 0.08);
  ga.seed = ctx.cfg.seed;
  ga.workers = ctx.cfg.workers;
  GaemReport gaem = gaem_fit(samples, ga);

  save_gmm_json(gaem.model, ctx.out_path("error_model.json"));
  ctx.track_output(ctx.out_path("error_model.json"));
  write_gaem_trace_csv(gaem, ctx.out_path("fit_report.csv"));
  ctx.track_output(ctx.out_path("fit_report.csv"));

  json out;
  out["eta_gsm_percent"] = eta_ratio(gsm.model, samples);
  out["eta_gmm_percent"] = eta_ratio(fixed.model, samples);
  out["eta_gaem_percent"] = eta_ratio(gaem.model, samples);
  out["selected_k"] = gaem.model.k();
  out["fixed_k"] = fixed_k;
  out["samples"] = samples.size();
  std::ofstream f(ctx.out_path("eta_report.json"));
  f << out.dump(2) << '\n';
  ctx.track_output(ctx.out_path("eta_report.json"));
  return out;
}

namespace detail_cli {

inline ForecastInputs inputs_from_config(RunContext& ctx, const json& cfg) {
  ForecastInputs inp;
  read_forecasts_csv(ctx.track_input(require<std::string>(cfg, "forecasts")), inp);
  inp.error_model_r = load_gmm_json(ctx.track_input(require<std::string>(cfg, "error_model")));
  if (cfg.contains("load_error")) {
    inp.error_model_l.mu = get_or(cfg.at("load_error"), "mu", 0.0);
    inp.error_model_l.sigma = get_or(cfg.at("load_error"), "sigma", 0.0);
  }
  return inp;
}

inline ChanceParams chance_from_config(const json& cfg) {
  ChanceParams cp;
  cp.gamma = detail_cli::get_or(cfg, "gamma", 0.97);
  cp.alpha = detail_cli::get_or(cfg, "alpha", 0.8);
  cp.renewable_share = detail_cli::get_or(cfg, "renewable_share", 0.8);
  cp.r1_fraction = detail_cli::get_or(cfg, "r1_fraction", 0.975);
  std::string q = detail_cli::get_or<std::string>(cfg, "quantile_source", "mixture");
  if (q == "mixture")
    cp.quantile_source = QuantileSource::MixtureExact;
  else if (q == "normal")
    cp.quantile_source = QuantileSource::NormalMomentMatched;
  else
    throw InputError("quantile_source must be 'mixture' or 'normal'");
  return cp;
}

}  // namespace detail_cli

inline json run_schedule(RunContext& ctx) {
  using namespace detail_cli;
  const json& cfg = ctx.cfg.config;
  MarketPrices prices = read_prices_csv(ctx.track_input(require<std::string>(cfg, "prices")));
  ForecastInputs inp = inputs_from_config(ctx, cfg);
  ChanceParams cp = chance_from_config(cfg);

  SolveOptions opts;
  opts.use_ca = get_or(cfg, "use_ca", true);
  opts.n_samples = get_or(cfg, "n_samples", 2000);
  opts.seed = ctx.cfg.seed;
  opts.g_da_max = get_or(cfg, "g_da_max", 1e9);
  opts.workers = ctx.cfg.workers;

  Schedule sched = schedule_day(inp, prices, cp, opts);
  write_schedule_csv(sched, ctx.out_path("schedule.csv"));
  ctx.track_output(ctx.out_path("schedule.csv"));

  json out;
  out["f_sub"] = sched.f_sub;
  out["all_feasible"] = sched.all_feasible;
  out["use_ca"] = opts.use_ca;
  int n_validate = get_or(cfg, "n_validate", 20000);
  ValidationResult v = monte_carlo_validate(sched, inp, cp, n_validate,
                                            substream_seed(ctx.cfg.seed, "cli_validate"));
  out["empirical_gamma"] = v.empirical_gamma;
  out["empirical_alpha"] = v.empirical_alpha;
  out["gamma"] = cp.gamma;
  out["alpha"] = cp.alpha;
  std::ofstream f(ctx.out_path("schedule_summary.json"));
  f << out.dump(2) << '\n';
  ctx.track_output(ctx.out_path("schedule_summary.json"));
  return out;
}

inline json run_validate(RunContext& ctx) {
  using namespace detail_cli;
  const json& cfg = ctx.cfg.config;
  Schedule sched = read_schedule_csv(ctx.track_input(require<std::string>(cfg, "schedule")));
  ForecastInputs inp = inputs_from_config(ctx, cfg);
  ChanceParams cp = chance_from_config(cfg);
  int n = get_or(cfg, "n", 100000);
  ValidationResult v = monte_carlo_validate(sched, inp, cp, n, ctx.cfg.seed);

  json out;
  out["empirical_gamma"] = v.empirical_gamma;
  out["empirical_alpha"] = v.empirical_alpha;
  out["per_hour_gamma"] = v.per_hour_gamma;
  out["per_hour_alpha"] = v.per_hour_alpha;
  out["n"] = n;
  std::ofstream f(ctx.out_path("validation.json"));
  f << out.dump(2) << '\n';
  ctx.track_output(ctx.out_path("validation.json"));
  return out;
}

inline json run_regress(RunContext& ctx) {
  using namespace detail_cli;
  const json& cfg = ctx.cfg.config;
  RegressionData data =
      read_regression_csv(ctx.track_input(require<std::string>(cfg, "data")));
  int constant_columns = 0;
  if (get_or(cfg, "normalize", true)) data = normalize_minmax(data, &constant_columns);

  RegressionFit ols = ols_fit(data);
  RegressionFit fgls = fgls_fit(data);
  auto fit_json = [&](const RegressionFit& fit) {
    json j;
    j["intercept"] = fit.intercept;
    std::vector<double> coef(fit.coefficients.data(),
                             fit.coefficients.data() + fit.coefficients.size());
    j["coefficients"] = coef;
    j["squared_error"] = fit.squared_error;
    return j;
  };
  json out;
  out["ols"] = fit_json(ols);
  out["fgls"] = fit_json(fgls);
  out["labels"] = data.labels;
  out["normalized"] = get_or(cfg, "normalize", true);
  out["constant_columns"] = constant_columns;
  std::ofstream f(ctx.out_path("regress_report.json"));
  f << out.dump(2) << '\n';
  ctx.track_output(ctx.out_path("regress_report.json"));
  return out;
}

inline json run_pipeline_once(RunContext& ctx, const std::string& pipeline) {
  if (pipeline == "reconfig") return run_reconfig(ctx);
  if (pipeline == "tune") return run_tune(ctx);
  throw InputError("benchmark pipeline must be 'reconfig' or 'tune'");
}

inline json run_benchmark(RunContext& ctx) {
  using namespace detail_cli;
  const json& cfg = ctx.cfg.config;
  std::string pipeline = require<std::string>(cfg, "pipeline");
  int max_workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<int> counts = {1, 2, 4, max_workers};
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());

  CsvWriter timing(ctx.out_path("benchmark.csv"));
  timing.row({"pipeline", "workers", "wall_seconds", "speedup_vs_1"});
  ctx.track_output(ctx.out_path("benchmark.csv"));

  double base_wall = 0.0;
  std::vector<std::string> artifact_hashes;
  json summary;
  summary["pipeline"] = pipeline;
  for (int w : counts) {
    RunContext sub = ctx;
    sub.cfg.workers = w;
    sub.outputs.clear();
    auto t0 = std::chrono::steady_clock::now();
    run_pipeline_once(sub, pipeline);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (w == 1) base_wall = wall;
    // Hash the CSV artifacts (timing-carrying JSON summaries excluded).
    std::string combined;
    for (const auto& path : sub.outputs) {
      if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
        std::ifstream in(path, std::ios::binary);
        combined.append((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
      }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(combined)));
    artifact_hashes.push_back(buf);
    timing.row({pipeline, std::to_string(w), format_double(wall),
                format_double(base_wall > 0 ? base_wall / wall : 0.0)});
    summary["wall_seconds_" + std::to_string(w)] = wall;
    if (w == 4 && base_wall > 0) summary["speedup_4_over_1"] = base_wall / wall;
  }
  bool identical = true;
  for (const auto& h : artifact_hashes) identical = identical && h == artifact_hashes.front();
  summary["outputs_identical"] = identical;
  std::ofstream f(ctx.out_path("benchmark_summary.json"));
  f << summary.dump(2) << '\n';
  ctx.track_output(ctx.out_path("benchmark_summary.json"));
  return summary;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline void write_manifest(const RunContext& ctx, double wall_ms) {
  json j;
  j["subcommand"] = ctx.cfg.subcommand;
  j["config"] = ctx.cfg.config_path;
  j["seed"] = ctx.cfg.seed;
  j["workers"] = ctx.cfg.workers;
  j["version"] = kVersion;
  j["wall_ms"] = wall_ms;
  json inputs = json::object();
  for (const auto& [path, hash] : ctx.input_hashes) inputs[path] = hash;
  j["inputs"] = inputs;
  j["outputs"] = ctx.outputs;
  std::ofstream f(ctx.out_path("run_manifest.json"));
  f << j.dump(2) << '\n';
}

inline int main(int argc, char** argv) {
  CLI::App app{"gridopt: distribution-grid forecasting, reconfiguration, OPF and scheduling"};
  app.require_subcommand(1);

  RunConfig cfg;
  static const std::vector<std::string> names = {"forecast", "tune",     "reconfig",
                                                 "opf3",     "fit-errors", "schedule",
                                                 "validate", "regress",  "benchmark"};
  for (const auto& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", cfg.config_path, "JSON run configuration")->required();
    sub->add_option("--workers", cfg.workers, "worker threads (default GRIDOPT_WORKERS or 1)");
    auto* seed_opt = sub->add_option("--seed", cfg.seed, "root random seed");
    sub->add_option("--out", cfg.out_dir, "output directory");
    sub->callback([&cfg, name, seed_opt] {
      cfg.subcommand = name;
      cfg.seed_overridden = seed_opt->count() > 0;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    json err;
    err["error"] = {{"kind", "usage"}, {"message", e.what()}};
    std::printf("%s\n", err.dump().c_str());
    return 1;
  }

  auto t0 = std::chrono::steady_clock::now();
  RunContext ctx;
  try {
    cfg.config = detail_cli::load_json_file(cfg.config_path);
    if (!cfg.seed_overridden)
      cfg.seed = detail_cli::get_or<std::uint64_t>(cfg.config, "seed", 1);
    if (cfg.workers < 1)
      cfg.workers = resolve_workers(detail_cli::get_or(cfg.config, "workers", 0));
    fs::create_directories(cfg.out_dir);
    ctx.cfg = cfg;
    ctx.track_input(cfg.config_path);

    json summary;
    if (cfg.subcommand == "forecast") summary = run_forecast(ctx);
    else if (cfg.subcommand == "tune") summary = run_tune(ctx);
    else if (cfg.subcommand == "reconfig") summary = run_reconfig(ctx);
    else if (cfg.subcommand == "opf3") summary = run_opf3(ctx);
    else if (cfg.subcommand == "fit-errors") summary = run_fit_errors(ctx);
    else if (cfg.subcommand == "schedule") summary = run_schedule(ctx);
    else if (cfg.subcommand == "validate") summary = run_validate(ctx);
    else if (cfg.subcommand == "regress") summary = run_regress(ctx);
    else if (cfg.subcommand == "benchmark") summary = run_benchmark(ctx);

    double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    write_manifest(ctx, wall_ms);
    std::printf("%s\n", summary.dump(2).c_str());
    return 0;
  } catch (const ParseError& e) {
    json err;
    err["error"] = {{"kind", "input"}, {"message", e.what()}};
    std::printf("%s\n", err.dump().c_str());
    return 2;
  } catch (const ValidationError& e) {
    json err;
    err["error"] = {{"kind", "input"}, {"message", e.what()}};
    std::printf("%s\n", err.dump().c_str());
    return 2;
  } catch (const TopologyError& e) {
    json err;
    err["error"] = {{"kind", "input"}, {"message", e.what()}};
    std::printf("%s\n", err.dump().c_str());
    return 2;
  } catch (const InputError& e) {
    json err;
    err["error"] = {{"kind", "input"}, {"message", e.what()}};
    std::printf("%s\n", err.dump().c_str());
    return 2;
  } catch (const ConfigError& e) {
    json err;
    err["error"] = {{"kind", "input"}, {"message", e.what()}};
    std::printf("%s\n", err.dump().c_str());
    return 2;
  } catch (const CapacityError& e) {
    json err;
    err["error"] = {{"kind", "input"}, {"message", e.what()}};
    std::printf("%s\n", err.dump().c_str());
    return 2;
  } catch (const Error& e) {
    // Numerical family: divergence, infeasibility, rank deficiency.
    json err;
    err["error"] = {{"kind", "numerical"}, {"message", e.what()}};
    std::printf("%s\n", err.dump().c_str());
    return 3;
  }
}

}  // namespace gridopt::cli
