#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gridopt/csv.hpp"
#include "gridopt/gmm.hpp"
#include "gridopt/parallel.hpp"
#include "gridopt/rng.hpp"
#include "gridopt/stats.hpp"

namespace gridopt {

/// Hourly market prices in $/kWh. Per hour the ordering
/// resale < renewable < day-ahead < real-time must hold.
struct MarketPrices {
  std::vector<double> rho_da;
  std::vector<double> rho_rt;
  std::vector<double> rho_r;
  std::vector<double> rho_s;

  int horizon() const { return static_cast<int>(rho_da.size()); }

  void validate() const {
    if (rho_da.empty() || rho_rt.size() != rho_da.size() || rho_r.size() != rho_da.size() ||
        rho_s.size() != rho_da.size())
      throw ValidationError("price arrays must share one horizon");
    for (std::size_t t = 0; t < rho_da.size(); ++t)
      if (!(rho_s[t] < rho_r[t] && rho_r[t] < rho_da[t] && rho_da[t] < rho_rt[t]))
        throw ValidationError("hour " + std::to_string(t) +
                              ": need resale < renewable < day-ahead < real-time price");
  }
};

/// Load forecast error: single Gaussian on the relative error.
struct LoadErrorModel {
  double mu = 0.0;
  double sigma = 0.0;
};

struct ForecastInputs {
  std::vector<double> g_r_forecast;   // hourly renewable forecast, kWh
  std::vector<double> g_dl_forecast;  // hourly load forecast, kWh
  GMMModel error_model_r;             // 1-D mixture over the relative renewable error
  LoadErrorModel error_model_l;

  int horizon() const { return static_cast<int>(g_dl_forecast.size()); }

  void validate() const {
    if (g_dl_forecast.empty() || g_r_forecast.size() != g_dl_forecast.size())
      throw ValidationError("forecast arrays must share one horizon");
    for (double v : g_r_forecast)
      if (v < 0.0) throw ValidationError("negative renewable forecast");
    for (double v : g_dl_forecast)
      if (v < 0.0) throw ValidationError("negative load forecast");
    error_model_r.validate();
    if (error_model_r.dim() != 1) throw ValidationError("renewable error model must be 1-D");
    if (error_model_l.sigma < 0.0) throw ValidationError("negative load error sigma");
  }
};

/// How the renewable-error quantile enters the deterministic reformulation:
/// the exact mixture quantile, or the printed normal form on moment-matched
/// parameters.
enum class QuantileSource { MixtureExact, NormalMomentMatched };

struct ChanceParams {
  double gamma = 0.97;          // load coverage probability
  double alpha = 0.8;           // renewable utilization probability
  double renewable_share = 0.8; // rho in the utilization constraint (not the ADMM penalty)
  double r1_fraction = 0.975;   // share of renewables allocated to the substation level
  QuantileSource quantile_source = QuantileSource::MixtureExact;

  void validate() const {
    if (!(gamma >= 0.5 && gamma < 1.0)) throw ConfigError("gamma must be in [0.5, 1)");
    if (!(alpha >= 0.5 && alpha < 1.0)) throw ConfigError("alpha must be in [0.5, 1)");
    if (!(renewable_share > 0.0 && renewable_share < 1.0))
      throw ConfigError("renewable_share must be in (0, 1)");
    if (!(r1_fraction > 0.0 && r1_fraction <= 1.0))
      throw ConfigError("r1_fraction must be in (0, 1]");
  }
};

struct HourlyBounds {
  double gw_plus_gda_min = 0.0;  // load coverage floor on G_W + G_DA
  double gw_min = 0.0;           // renewable utilization floor on G_W
};

/// Deterministic reformulation of the two chance constraints for hour t:
/// the load side uses the normal quantile on (mu2, sigma2); the renewable
/// side uses the configured quantile source on the fitted mixture.
inline HourlyBounds deterministic_bounds(const ForecastInputs& inp, const ChanceParams& cp,
                                         int t) {
  cp.validate();
  inp.validate();
  if (t < 0 || t >= inp.horizon()) throw InputError("hour index out of range");
  const double g_dl = inp.g_dl_forecast[t];
  const double g_r = inp.g_r_forecast[t];
  const double g_r1 = cp.r1_fraction * g_r;

  HourlyBounds b;
  double z_gamma = normal_quantile(cp.gamma);
  b.gw_plus_gda_min =
      z_gamma * inp.error_model_l.sigma * g_dl + g_dl + inp.error_model_l.mu * g_dl;

  const double rho = cp.renewable_share;
  if (cp.quantile_source == QuantileSource::MixtureExact) {
    double q = mixture_quantile(inp.error_model_r, cp.alpha);
    b.gw_min = rho * g_r1 * (1.0 + q);
  } else {
    double mu1 = 0.0, sigma1 = 0.0;
    moment_match(inp.error_model_r, mu1, sigma1);
    b.gw_min = normal_quantile(cp.alpha) * rho * sigma1 * g_r + rho * g_r1 + rho * mu1 * g_r1;
  }
  return b;
}

struct HourDecision {
  double g_da = 0.0;
  double g_w = 0.0;    // committed renewable usage
  double g_rt = 0.0;   // balance remainder at the raw forecast values (signed)
  bool delta = true;   // 1 = deficit side (buy at RT price)
  double expected_cost = 0.0;
  bool feasible = false;
  std::string note;
};

struct SolveOptions {
  bool use_ca = true;     // resell surplus at rho_s; otherwise surplus is lost
  int n_samples = 2000;   // error draws in the sample-average cost
  std::uint64_t seed = 1;
  double g_da_min = 0.0;
  double g_da_max = 1e9;  // generous default feeder capacity, kWh
  int workers = 1;
};

namespace sched_detail {

struct ErrorDraws {
  std::vector<double> e_r;  // relative renewable errors
  std::vector<double> e_l;  // relative load errors
};

inline ErrorDraws draw_errors(const ForecastInputs& inp, int n, std::uint64_t seed, int hour) {
  ErrorDraws d;
  d.e_r = sample_1d(inp.error_model_r, n, substream_seed(seed, "sched_renewable", hour));
  Rng rng = substream(seed, "sched_load", hour);
  d.e_l.reserve(n);
  for (int i = 0; i < n; ++i)
    d.e_l.push_back(inp.error_model_l.mu + inp.error_model_l.sigma * rng.normal());
  return d;
}

/// Sample-average cost of purchasing g_da for one hour: the real-time
/// deviation settles the balance per draw; a surplus is resold at rho_s
/// under corrective action, otherwise forfeited.
inline double expected_cost(double g_da, double g_w, const ForecastInputs& inp,
                            const MarketPrices& prices, const ChanceParams& cp, int t,
                            const ErrorDraws& draws, bool use_ca) {
  const double g_r_f = inp.g_r_forecast[t];
  const double g_dl_f = inp.g_dl_forecast[t];
  double total = 0.0;
  for (std::size_t i = 0; i < draws.e_r.size(); ++i) {
    double g_r = g_r_f * (1.0 + draws.e_r[i]);
    double g_r1 = cp.r1_fraction * g_r;
    double delivered = std::min(g_w, g_r1);  // usage bounded by the realization
    double g_dl = g_dl_f * (1.0 + draws.e_l[i]);
    double g_rt = g_dl - g_da - delivered;
    double cost = prices.rho_da[t] * g_da + prices.rho_r[t] * g_r;
    if (g_rt >= 0.0)
      cost += prices.rho_rt[t] * g_rt;
    else if (use_ca)
      cost += prices.rho_s[t] * g_rt;  // negative: resale revenue
    total += cost;
  }
  return total / static_cast<double>(draws.e_r.size());
}

}  // namespace sched_detail

/// Chooses the day-ahead purchase for hour t by minimizing the sample-average
/// expected cost over the feasible interval (coarse grid then golden-section,
/// keeping the best evaluated point). The renewable commitment g_w is the
/// nominal availability raised to the alpha-floor when that binds.
inline HourDecision solve_hour(const ForecastInputs& inp, const MarketPrices& prices,
                               const ChanceParams& cp, const HourlyBounds& bounds, int t,
                               const SolveOptions& opts = {}) {
  prices.validate();
  if (opts.n_samples < 1) throw InputError("n_samples must be >= 1");
  HourDecision dec;

  double mu1 = 0.0, sigma1 = 0.0;
  moment_match(inp.error_model_r, mu1, sigma1);
  double nominal_avail = cp.r1_fraction * inp.g_r_forecast[t] * (1.0 + mu1);
  dec.g_w = std::max(bounds.gw_min, nominal_avail);

  double lo = std::max(opts.g_da_min, bounds.gw_plus_gda_min - dec.g_w);
  lo = std::max(lo, 0.0);
  double hi = opts.g_da_max;
  if (lo > hi) {
    dec.feasible = false;
    dec.note = "infeasible hour " + std::to_string(t) +
               ": load-coverage floor " + format_double(bounds.gw_plus_gda_min) +
               " exceeds capacity " + format_double(hi) + " plus committed renewables";
    return dec;
  }

  sched_detail::ErrorDraws draws =
      sched_detail::draw_errors(inp, opts.n_samples, opts.seed, t);
  auto cost_at = [&](double g_da) {
    return sched_detail::expected_cost(g_da, dec.g_w, inp, prices, cp, t, draws, opts.use_ca);
  };

  double best_x = lo, best_f = cost_at(lo);
  const int grid_points = 200;
  for (int i = 1; i <= grid_points; ++i) {
    double x = lo + (hi - lo) * i / grid_points;
    double f = cost_at(x);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  // Golden-section refinement around the best grid point.
  {
    double step = (hi - lo) / grid_points;
    double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
    const double gr = 0.6180339887498949;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = cost_at(x1), f2 = cost_at(x2);
    while (b - a > 1e-3) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = cost_at(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = cost_at(x2);
      }
      double inner_x = f1 <= f2 ? x1 : x2;
      double inner_f = std::min(f1, f2);
      if (inner_f < best_f) {
        best_f = inner_f;
        best_x = inner_x;
      }
    }
  }

  dec.g_da = best_x;
  dec.expected_cost = best_f;
  dec.g_rt = inp.g_dl_forecast[t] - dec.g_da - dec.g_w;
  dec.delta = dec.g_da + dec.g_w <= inp.g_dl_forecast[t];  // boundary counts as deficit
  dec.feasible = true;
  return dec;
}

struct Schedule {
  std::vector<HourDecision> hours;
  std::vector<HourlyBounds> bounds;
  double f_sub = 0.0;  // sum of hourly expected costs
  bool all_feasible = true;
};

/// Day-ahead schedule: hours are uncoupled, so each solves independently.
/// Infeasible hours are reported in place without aborting the day.
inline Schedule schedule_day(const ForecastInputs& inp, const MarketPrices& prices,
                             const ChanceParams& cp, const SolveOptions& opts = {}) {
  inp.validate();
  prices.validate();
  cp.validate();
  if (prices.horizon() != inp.horizon())
    throw InputError("price and forecast horizons differ");
  const int horizon = inp.horizon();

  Schedule sched;
  sched.bounds.resize(horizon);
  for (int t = 0; t < horizon; ++t) sched.bounds[t] = deterministic_bounds(inp, cp, t);
  sched.hours = parallel_map<HourDecision>(horizon, opts.workers, [&](std::size_t t) {
    return solve_hour(inp, prices, cp, sched.bounds[t], static_cast<int>(t), opts);
  });
  for (const auto& h : sched.hours) {
    if (!h.feasible) {
      sched.all_feasible = false;
      continue;
    }
    sched.f_sub += h.expected_cost;
  }
  return sched;
}

/// Total two-level cost f_sub + beta * f_fee.
inline double total_cost(double f_sub, double fee_cost, double beta = 1.0) {
  if (!(beta > 0.0)) throw InputError("beta must be > 0");
  return f_sub + beta * fee_cost;
}

/// Real-time and scheduled shares of the hourly load, in percent.
inline std::pair<double, double> rt_share(const Schedule& sched, const ForecastInputs& inp,
                                          int t) {
  if (t < 0 || t >= static_cast<int>(sched.hours.size()))
    throw InputError("hour index out of range");
  double g_dl = inp.g_dl_forecast[t];
  if (!(g_dl > 0.0)) throw InputError("rt_share undefined for zero load");
  const auto& h = sched.hours[t];
  return {h.g_rt / g_dl * 100.0, (h.g_da + h.g_w) / g_dl * 100.0};
}

struct ValidationResult {
  double empirical_gamma = 0.0;  // freq of load covered by g_da + g_w
  double empirical_alpha = 0.0;  // freq of rho*G_R1 <= g_w
  std::vector<double> per_hour_gamma;
  std::vector<double> per_hour_alpha;
};

/// Monte-Carlo check of the two chance constraints at the scheduled decisions.
inline ValidationResult monte_carlo_validate(const Schedule& sched, const ForecastInputs& inp,
                                             const ChanceParams& cp, int n,
                                             std::uint64_t seed) {
  if (n < 10000) throw InputError("need at least 1e4 validation samples");
  ValidationResult res;
  long covered = 0, utilized = 0, total = 0;
  for (std::size_t t = 0; t < sched.hours.size(); ++t) {
    if (!sched.hours[t].feasible) continue;
    sched_detail::ErrorDraws draws =
        sched_detail::draw_errors(inp, n, substream_seed(seed, "validate", t), static_cast<int>(t));
    long hour_covered = 0, hour_utilized = 0;
    for (int i = 0; i < n; ++i) {
      double g_dl = inp.g_dl_forecast[t] * (1.0 + draws.e_l[i]);
      double g_r1 = cp.r1_fraction * inp.g_r_forecast[t] * (1.0 + draws.e_r[i]);
      if (g_dl <= sched.hours[t].g_da + sched.hours[t].g_w) ++hour_covered;
      if (cp.renewable_share * g_r1 <= sched.hours[t].g_w) ++hour_utilized;
    }
    res.per_hour_gamma.push_back(static_cast<double>(hour_covered) / n);
    res.per_hour_alpha.push_back(static_cast<double>(hour_utilized) / n);
    covered += hour_covered;
    utilized += hour_utilized;
    total += n;
  }
  if (total > 0) {
    res.empirical_gamma = static_cast<double>(covered) / total;
    res.empirical_alpha = static_cast<double>(utilized) / total;
  }
  return res;
}

}  // namespace gridopt
