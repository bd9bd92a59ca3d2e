#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gridopt/bfm_balanced.hpp"
#include "gridopt/parallel.hpp"

namespace gridopt {

struct ConfigEvaluation {
  SwitchConfig config;
  bool feasible = false;
  double loss_kw = std::numeric_limits<double>::infinity();
  double relaxation_tightness = 0.0;
  std::string note;  // why infeasible, when applicable
};

/// Builds and solves one configuration. Non-radial or non-converged cases are
/// marked infeasible instead of aborting the sweep.
inline ConfigEvaluation evaluate_config(const Network& net, const SwitchConfig& cfg,
                                        const LoadProfile& loads, const ADMMParams& params) {
  ConfigEvaluation eval;
  eval.config = cfg;
  if (!is_radial(net, cfg)) {
    eval.note = "non-radial";
    return eval;
  }
  try {
    BalancedBfm bfm = build_balanced_bfm(net, cfg, loads);
    OPFResultBalanced res = solve_balanced_opf(bfm, params);
    if (!res.converged) {
      eval.note = "no convergence";
      return eval;
    }
    eval.feasible = true;
    eval.loss_kw = res.total_loss_kw;
    eval.relaxation_tightness = res.relaxation_tightness;
  } catch (const Error& e) {
    eval.note = e.what();
  }
  return eval;
}

struct ReconfigReport {
  std::vector<ConfigEvaluation> evaluations;  // enumeration order
  int best_index = -1;
  int baseline_index = -1;
  double baseline_loss_kw = 0.0;
  double best_loss_kw = 0.0;
  double reduction_percent = 0.0;
  int workers = 1;

  const SwitchConfig& best_config() const { return evaluations[best_index].config; }
};

/// Enumerates all radial switch configurations, evaluates each under the
/// forecast loads (parallel map over a bounded pool) and selects the
/// lowest-loss configuration. Ties break on the lexicographically smallest
/// configuration encoding, which is the enumeration order itself.
inline ReconfigReport reconfigure(const Network& net, const LoadProfile& forecast_loads,
                                  const ADMMParams& params, int workers = 1) {
  std::vector<SwitchConfig> configs = enumerate_radial_configs(net);
  if (configs.empty()) throw InfeasibleError("no radial switch configuration exists");

  ReconfigReport report;
  report.workers = workers;
  report.evaluations = parallel_map<ConfigEvaluation>(
      configs.size(), workers,
      [&](std::size_t i) { return evaluate_config(net, configs[i], forecast_loads, params); });

  SwitchConfig baseline = net.initial_config();
  std::string baseline_enc = encode_config(baseline);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (encode_config(configs[i]) == baseline_enc) report.baseline_index = static_cast<int>(i);
    const auto& eval = report.evaluations[i];
    if (!eval.feasible) continue;
    if (report.best_index < 0 || eval.loss_kw < report.evaluations[report.best_index].loss_kw)
      report.best_index = static_cast<int>(i);
  }
  if (report.best_index < 0)
    throw InfeasibleError("every radial configuration was infeasible");

  report.best_loss_kw = report.evaluations[report.best_index].loss_kw;
  if (report.baseline_index >= 0 && report.evaluations[report.baseline_index].feasible) {
    report.baseline_loss_kw = report.evaluations[report.baseline_index].loss_kw;
    report.reduction_percent =
        (report.baseline_loss_kw - report.best_loss_kw) / report.baseline_loss_kw * 100.0;
  } else {
    report.baseline_loss_kw = std::numeric_limits<double>::quiet_NaN();
    report.reduction_percent = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

/// Open switches of a configuration as "from-to" labels.
inline std::string open_switch_labels(const Network& net, const SwitchConfig& cfg) {
  std::string out;
  for (const auto& [idx, closed] : cfg.states) {
    if (closed) continue;
    if (!out.empty()) out += ';';
    out += std::to_string(net.branches[idx].from_bus) + "-" +
           std::to_string(net.branches[idx].to_bus);
  }
  return out.empty() ? "none" : out;
}

}  // namespace gridopt
