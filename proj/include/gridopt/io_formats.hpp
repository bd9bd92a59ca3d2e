#pragma once

#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "gridopt/csv.hpp"
#include "gridopt/gaem.hpp"
#include "gridopt/gmm.hpp"
#include "gridopt/opf3.hpp"
#include "gridopt/reconfig.hpp"
#include "gridopt/regression.hpp"
#include "gridopt/scheduler.hpp"

namespace gridopt {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Mixture model JSON: {k, weights[], means[][], covariances[][][]}
// ---------------------------------------------------------------------------

inline json gmm_to_json(const GMMModel& m) {
  m.validate();
  json j;
  j["k"] = m.k();
  j["weights"] = m.weights;
  json means = json::array();
  json covs = json::array();
  for (int n = 0; n < m.k(); ++n) {
    json mu = json::array();
    for (int d = 0; d < m.dim(); ++d) mu.push_back(m.means[n](d));
    means.push_back(mu);
    json cov = json::array();
    for (int r = 0; r < m.dim(); ++r) {
      json row = json::array();
      for (int c = 0; c < m.dim(); ++c) row.push_back(m.covariances[n](r, c));
      cov.push_back(row);
    }
    covs.push_back(cov);
  }
  j["means"] = means;
  j["covariances"] = covs;
  return j;
}

inline GMMModel gmm_from_json(const json& j) {
  GMMModel m;
  int k = j.at("k").get<int>();
  m.weights = j.at("weights").get<std::vector<double>>();
  for (int n = 0; n < k; ++n) {
    const auto& mu = j.at("means").at(n);
    Eigen::VectorXd mean(mu.size());
    for (std::size_t d = 0; d < mu.size(); ++d) mean(d) = mu.at(d).get<double>();
    m.means.push_back(mean);
    const auto& cov = j.at("covariances").at(n);
    Eigen::MatrixXd sigma(cov.size(), cov.size());
    for (std::size_t r = 0; r < cov.size(); ++r)
      for (std::size_t c = 0; c < cov.at(r).size(); ++c)
        sigma(r, c) = cov.at(r).at(c).get<double>();
    m.covariances.push_back(sigma);
  }
  m.validate();
  return m;
}

inline void save_gmm_json(const GMMModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << gmm_to_json(m).dump(2) << '\n';
}

inline GMMModel load_gmm_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  json j;
  try {
    in >> j;
    return gmm_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Market data: prices and hourly forecasts
// ---------------------------------------------------------------------------

inline MarketPrices read_prices_csv(const std::string& path) {
  CsvFile file = read_csv(path);
  if (file.header != std::vector<std::string>{"hour", "rho_da", "rho_rt", "rho_r", "rho_s"})
    throw ParseError(path + ": expected header 'hour,rho_da,rho_rt,rho_r,rho_s'");
  MarketPrices prices;
  for (const auto& row : file.rows) {
    if (row.fields.size() != 5)
      throw ParseError(path + ":" + std::to_string(row.line) + ": expected 5 fields");
    prices.rho_da.push_back(parse_double(row.fields[1], path, row.line));
    prices.rho_rt.push_back(parse_double(row.fields[2], path, row.line));
    prices.rho_r.push_back(parse_double(row.fields[3], path, row.line));
    prices.rho_s.push_back(parse_double(row.fields[4], path, row.line));
  }
  prices.validate();
  return prices;
}

/// Reads `hour,g_r,g_dl` into the forecast arrays of a ForecastInputs shell.
inline void read_forecasts_csv(const std::string& path, ForecastInputs& inp) {
  CsvFile file = read_csv(path);
  if (file.header != std::vector<std::string>{"hour", "g_r", "g_dl"})
    throw ParseError(path + ": expected header 'hour,g_r,g_dl'");
  inp.g_r_forecast.clear();
  inp.g_dl_forecast.clear();
  for (const auto& row : file.rows) {
    if (row.fields.size() != 3)
      throw ParseError(path + ":" + std::to_string(row.line) + ": expected 3 fields");
    inp.g_r_forecast.push_back(parse_double(row.fields[1], path, row.line));
    inp.g_dl_forecast.push_back(parse_double(row.fields[2], path, row.line));
  }
}

// ---------------------------------------------------------------------------
// Result emission
// ---------------------------------------------------------------------------

inline void write_reconfig_report_csv(const ReconfigReport& report, const Network& net,
                                      const std::string& path) {
  CsvWriter out(path);
  out.row({"config_id", "open_switches", "loss_kw", "feasible"});
  for (std::size_t i = 0; i < report.evaluations.size(); ++i) {
    const auto& eval = report.evaluations[i];
    out.row({std::to_string(i), open_switch_labels(net, eval.config),
             eval.feasible ? format_double(eval.loss_kw) : "inf",
             eval.feasible ? "1" : "0"});
  }
}

inline json reconfig_summary_json(const ReconfigReport& report, const Network& net,
                                  double wall_seconds) {
  json j;
  j["baseline_loss_kw"] = report.baseline_loss_kw;
  j["best_loss_kw"] = report.best_loss_kw;
  j["reduction_percent"] = report.reduction_percent;
  j["best_open_switches"] = open_switch_labels(net, report.best_config());
  j["configurations"] = report.evaluations.size();
  j["wall_seconds"] = wall_seconds;
  j["workers"] = report.workers;
  return j;
}

inline void write_opf3_result_csv(const OPF3Result& result, const Network& net,
                                  const std::string& path) {
  CsvWriter out(path);
  out.row({"bus", "phase", "v2", "branch_P", "branch_Q", "l", "rank1_gap"});
  for (const auto& f : result.flows) {
    out.row({std::to_string(net.buses[f.child_bus].id),
             std::string(1, phase_letter(static_cast<Phase>(f.phase))),
             format_double(result.voltages[f.child_bus][f.phase]), format_double(f.p),
             format_double(f.q), format_double(f.l), format_double(f.rank1_gap)});
  }
}

inline json opf3_summary_json(const OPF3Result& result) {
  json j;
  j["line_loss_kwh"] = result.line_loss_kwh;
  j["fee_cost"] = result.fee_cost;
  j["exact"] = result.exact;
  j["max_rank1_gap"] = result.max_rank1_gap;
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["interval_minutes"] = result.interval_minutes;
  return j;
}

inline void write_schedule_csv(const Schedule& sched, const std::string& path) {
  CsvWriter out(path);
  out.row({"hour", "g_da", "g_w", "g_rt", "delta", "cost"});
  for (std::size_t t = 0; t < sched.hours.size(); ++t) {
    const auto& h = sched.hours[t];
    if (!h.feasible) {
      out.row({std::to_string(t), "inf", "inf", "inf", "-", "inf"});
      continue;
    }
    out.row({std::to_string(t), format_double(h.g_da), format_double(h.g_w),
             format_double(h.g_rt), h.delta ? "1" : "0", format_double(h.expected_cost)});
  }
}

inline Schedule read_schedule_csv(const std::string& path) {
  CsvFile file = read_csv(path);
  if (file.header != std::vector<std::string>{"hour", "g_da", "g_w", "g_rt", "delta", "cost"})
    throw ParseError(path + ": expected header 'hour,g_da,g_w,g_rt,delta,cost'");
  Schedule sched;
  for (const auto& row : file.rows) {
    if (row.fields.size() != 6)
      throw ParseError(path + ":" + std::to_string(row.line) + ": expected 6 fields");
    HourDecision h;
    if (row.fields[1] == "inf") {
      h.feasible = false;
      sched.all_feasible = false;
    } else {
      h.feasible = true;
      h.g_da = parse_double(row.fields[1], path, row.line);
      h.g_w = parse_double(row.fields[2], path, row.line);
      h.g_rt = parse_double(row.fields[3], path, row.line);
      h.delta = row.fields[4] == "1";
      h.expected_cost = parse_double(row.fields[5], path, row.line);
      sched.f_sub += h.expected_cost;
    }
    sched.hours.push_back(h);
  }
  return sched;
}

inline void write_gaem_trace_csv(const GaemReport& report, const std::string& path) {
  CsvWriter out(path);
  out.row({"generation", "best_mdl", "best_k"});
  for (std::size_t g = 0; g < report.best_mdl_trace.size(); ++g)
    out.row({std::to_string(g), format_double(report.best_mdl_trace[g]),
             std::to_string(report.best_k_trace[g])});
}

/// Plain one-column sample file (`value` header) used for error-model fits.
inline std::vector<double> read_samples_csv(const std::string& path) {
  CsvFile file = read_csv(path);
  if (file.header != std::vector<std::string>{"value"})
    throw ParseError(path + ": expected header 'value'");
  std::vector<double> out;
  for (const auto& row : file.rows)
    out.push_back(parse_double(row.fields[0], path, row.line));
  return out;
}

inline void write_samples_csv(const std::vector<double>& samples, const std::string& path) {
  CsvWriter out(path);
  out.row({"value"});
  for (double v : samples) out.row({format_double(v)});
}

/// Regression data CSV: `t,y,x1..xk`.
inline RegressionData read_regression_csv(const std::string& path) {
  CsvFile file = read_csv(path);
  if (file.header.size() < 3 || file.header[0] != "t" || file.header[1] != "y")
    throw ParseError(path + ": expected header 't,y,x1,...'");
  const int k = static_cast<int>(file.header.size()) - 2;
  const int n = static_cast<int>(file.rows.size());
  RegressionData d;
  d.y.resize(n);
  d.x.resize(n, k);
  for (int i = 0; i < n; ++i) {
    const auto& row = file.rows[i];
    if (static_cast<int>(row.fields.size()) != k + 2)
      throw ParseError(path + ":" + std::to_string(row.line) + ": bad field count");
    d.y(i) = parse_double(row.fields[1], path, row.line);
    for (int c = 0; c < k; ++c)
      d.x(i, c) = parse_double(row.fields[c + 2], path, row.line);
  }
  for (std::size_t c = 2; c < file.header.size(); ++c) d.labels.push_back(file.header[c]);
  return d;
}

}  // namespace gridopt
