#include "doctest.h"

#include <cmath>

#include "gridopt/scheduler.hpp"

using namespace gridopt;

namespace {

GMMModel point_mass(double mean) {
  GMMModel m;
  m.weights = {1.0};
  m.means = {Eigen::VectorXd::Constant(1, mean)};
  m.covariances = {Eigen::MatrixXd::Constant(1, 1, 0.0)};
  return m;
}

GMMModel gaussian_error(double mean, double sigma) {
  GMMModel m;
  m.weights = {1.0};
  m.means = {Eigen::VectorXd::Constant(1, mean)};
  m.covariances = {Eigen::MatrixXd::Constant(1, 1, sigma * sigma)};
  return m;
}

MarketPrices flat_prices(int horizon, double da = 0.05, double rt = 0.07, double r = 0.03,
                         double s = 0.02) {
  MarketPrices p;
  p.rho_da.assign(horizon, da);
  p.rho_rt.assign(horizon, rt);
  p.rho_r.assign(horizon, r);
  p.rho_s.assign(horizon, s);
  return p;
}

ForecastInputs deterministic_inputs(std::vector<double> g_r, std::vector<double> g_dl) {
  ForecastInputs inp;
  inp.g_r_forecast = std::move(g_r);
  inp.g_dl_forecast = std::move(g_dl);
  inp.error_model_r = point_mass(0.0);
  inp.error_model_l = {0.0, 0.0};
  return inp;
}

}  // namespace

TEST_CASE("deterministic bound is the raw forecast at gamma = 0.5 or zero noise") {
  ForecastInputs inp = deterministic_inputs({100.0}, {1000.0});
  ChanceParams cp;
  cp.gamma = 0.5;
  cp.alpha = 0.5;
  HourlyBounds b = deterministic_bounds(inp, cp, 0);
  CHECK(b.gw_plus_gda_min == doctest::Approx(1000.0).epsilon(1e-12));

  // Nonzero gamma but zero noise: still the forecast.
  inp.error_model_l = {0.0, 0.0};
  cp.gamma = 0.99;
  b = deterministic_bounds(inp, cp, 0);
  CHECK(b.gw_plus_gda_min == doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("deterministic bound matches the erf-inverse oracle at gamma = 0.975") {
  ForecastInputs inp = deterministic_inputs({0.0}, {1000.0});
  inp.error_model_l = {0.0, 0.05};
  ChanceParams cp;
  cp.gamma = 0.975;
  cp.alpha = 0.5;
  HourlyBounds b = deterministic_bounds(inp, cp, 0);

  // Oracle: bisection on the std::erf CDF.
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < 0.975 ? lo : hi) = mid;
  }
  double z = 0.5 * (lo + hi);
  CHECK(b.gw_plus_gda_min == doctest::Approx(1000.0 + z * 50.0).epsilon(1e-9));
  CHECK(b.gw_plus_gda_min == doctest::Approx(1098.0).epsilon(1e-4));
}

TEST_CASE("quantile sources differ only in the renewable bound") {
  ForecastInputs inp = deterministic_inputs({500.0}, {1000.0});
  inp.error_model_r = gaussian_error(0.0, 0.1);
  ChanceParams cp;
  cp.alpha = 0.9;
  cp.quantile_source = QuantileSource::MixtureExact;
  HourlyBounds exact = deterministic_bounds(inp, cp, 0);
  cp.quantile_source = QuantileSource::NormalMomentMatched;
  HourlyBounds matched = deterministic_bounds(inp, cp, 0);
  CHECK(exact.gw_plus_gda_min == matched.gw_plus_gda_min);
  // For a single Gaussian the mixture quantile equals the normal quantile;
  // the printed form scales the deviation by g_r rather than g_r1.
  double z = normal_quantile(0.9);
  double rho = cp.renewable_share, r1 = cp.r1_fraction;
  CHECK(exact.gw_min == doctest::Approx(rho * r1 * 500.0 * (1.0 + z * 0.1)).epsilon(1e-9));
  CHECK(matched.gw_min ==
        doctest::Approx(z * rho * 0.1 * 500.0 + rho * r1 * 500.0).epsilon(1e-9));
}

TEST_CASE("zero-error hour purchases exactly the uncovered load") {
  ForecastInputs inp = deterministic_inputs({200.0}, {1000.0});
  ChanceParams cp;
  cp.gamma = 0.97;
  cp.alpha = 0.8;
  HourlyBounds b = deterministic_bounds(inp, cp, 0);
  MarketPrices prices = flat_prices(1);
  SolveOptions opts;
  opts.n_samples = 64;
  HourDecision dec = solve_hour(inp, prices, cp, b, 0, opts);
  REQUIRE(dec.feasible);
  CHECK(dec.g_w == doctest::Approx(0.975 * 200.0));
  CHECK(dec.g_da == doctest::Approx(1000.0 - dec.g_w).epsilon(1e-9));
  CHECK(dec.g_rt == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(dec.delta);
}

TEST_CASE("corrective action never costs more, hour by hour") {
  ForecastInputs inp = deterministic_inputs({400.0}, {600.0});
  inp.error_model_r = gaussian_error(0.0, 0.15);
  inp.error_model_l = {0.0, 0.08};
  ChanceParams cp;
  MarketPrices prices = flat_prices(1);
  HourlyBounds b = deterministic_bounds(inp, cp, 0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SolveOptions on;
    on.seed = seed;
    SolveOptions off = on;
    off.use_ca = false;
    HourDecision with_ca = solve_hour(inp, prices, cp, b, 0, on);
    HourDecision without = solve_hour(inp, prices, cp, b, 0, off);
    REQUIRE(with_ca.feasible);
    REQUIRE(without.feasible);
    CHECK(with_ca.expected_cost <= without.expected_cost + 1e-9);
  }
}

TEST_CASE("two-atom error distribution matches exhaustive enumeration") {
  // Atoms at +-20% load error with equal probability.
  ForecastInputs inp = deterministic_inputs({0.0}, {1000.0});
  GMMModel atoms;
  atoms.weights = {0.5, 0.5};
  atoms.means = {Eigen::VectorXd::Constant(1, -0.2), Eigen::VectorXd::Constant(1, 0.2)};
  atoms.covariances = {Eigen::MatrixXd::Constant(1, 1, 1e-18),
                       Eigen::MatrixXd::Constant(1, 1, 1e-18)};
  ForecastInputs flipped = inp;  // atoms on the load side via the renewable slot? no:
  // keep the load error two-atom by modeling it through the renewable channel
  // of a zero-load... simpler: put atoms on the renewable error with a large
  // renewable forecast and zero load noise.
  ForecastInputs atom_inp = deterministic_inputs({800.0}, {1000.0});
  atom_inp.error_model_r = atoms;
  ChanceParams cp;
  cp.gamma = 0.5;
  cp.alpha = 0.5;
  MarketPrices prices = flat_prices(1);
  HourlyBounds b = deterministic_bounds(atom_inp, cp, 0);
  SolveOptions opts;
  opts.n_samples = 4000;
  HourDecision dec = solve_hour(atom_inp, prices, cp, b, 0, opts);
  REQUIRE(dec.feasible);

  // Oracle: exact two-outcome expectation minimized over a fine g_da grid.
  auto exact_cost = [&](double g_da) {
    double total = 0.0;
    for (double e : {-0.2, 0.2}) {
      double g_r = 800.0 * (1.0 + e);
      double delivered = std::min(dec.g_w, cp.r1_fraction * g_r);
      double g_rt = 1000.0 - g_da - delivered;
      double c = prices.rho_da[0] * g_da + prices.rho_r[0] * g_r;
      c += g_rt >= 0.0 ? prices.rho_rt[0] * g_rt : prices.rho_s[0] * g_rt;
      total += 0.5 * c;
    }
    return total;
  };
  double best = 1e300, best_x = 0.0;
  for (double x = 0.0; x <= 1200.0; x += 0.05) {
    double c = exact_cost(x);
    if (c < best) {
      best = c;
      best_x = x;
    }
  }
  CHECK(dec.expected_cost == doctest::Approx(best).epsilon(1e-4));
  CHECK(dec.g_da == doctest::Approx(best_x).epsilon(0.01));
  (void)flipped;
}

TEST_CASE("all-zero day schedules to zero cost and zero purchases") {
  ForecastInputs inp = deterministic_inputs(std::vector<double>(24, 0.0),
                                            std::vector<double>(24, 0.0));
  ChanceParams cp;
  Schedule s = schedule_day(inp, flat_prices(24), cp, {});
  CHECK(s.all_feasible);
  CHECK(s.f_sub == doctest::Approx(0.0).epsilon(1e-12));
  for (const auto& h : s.hours) {
    CHECK(h.g_da == doctest::Approx(0.0));
    CHECK(h.g_w == doctest::Approx(0.0));
  }
}

TEST_CASE("per-hour balance identity and delta sign rule hold on a noisy day") {
  Rng rng(5150);
  std::vector<double> g_r, g_dl;
  for (int t = 0; t < 24; ++t) {
    g_r.push_back(rng.uniform(50.0, 400.0));
    g_dl.push_back(rng.uniform(300.0, 1200.0));
  }
  ForecastInputs inp = deterministic_inputs(g_r, g_dl);
  inp.error_model_r = gaussian_error(0.02, 0.12);
  inp.error_model_l = {0.0, 0.05};
  ChanceParams cp;
  SolveOptions opts;
  opts.n_samples = 256;
  Schedule s = schedule_day(inp, flat_prices(24), cp, opts);
  REQUIRE(s.all_feasible);
  for (int t = 0; t < 24; ++t) {
    const auto& h = s.hours[t];
    CHECK(std::abs(h.g_da + h.g_rt + h.g_w - g_dl[t]) <= 1e-9);
    CHECK(h.delta == (h.g_da + h.g_w <= g_dl[t]));
    auto [rt_pct, sched_pct] = rt_share(s, inp, t);
    CHECK(rt_pct + sched_pct == doctest::Approx(100.0).epsilon(1e-9));
  }
}

TEST_CASE("total cost is non-decreasing in gamma") {
  Rng rng(777);
  std::vector<double> g_r, g_dl;
  for (int t = 0; t < 24; ++t) {
    g_r.push_back(rng.uniform(100.0, 300.0));
    g_dl.push_back(rng.uniform(500.0, 900.0));
  }
  ForecastInputs inp = deterministic_inputs(g_r, g_dl);
  inp.error_model_r = gaussian_error(0.0, 0.1);
  inp.error_model_l = {0.0, 0.06};
  SolveOptions opts;
  opts.n_samples = 512;
  double prev = -1.0;
  for (double gamma : {0.95, 0.97, 0.99}) {
    ChanceParams cp;
    cp.gamma = gamma;
    Schedule s = schedule_day(inp, flat_prices(24), cp, opts);
    REQUIRE(s.all_feasible);
    CHECK(s.f_sub >= prev);
    prev = s.f_sub;
  }
}

TEST_CASE("windy night and sunny day: resale helps exactly at surplus hours") {
  // Deterministic profile: renewables dominate at night, load peaks midday.
  std::vector<double> g_r(24), g_dl(24);
  for (int t = 0; t < 24; ++t) {
    bool night = t < 6 || t >= 22;
    g_r[t] = night ? 500.0 : (t >= 10 && t <= 16 ? 250.0 : 120.0);
    g_dl[t] = 300.0 + 500.0 * std::exp(-0.5 * (t - 13.0) * (t - 13.0) / 9.0);
    if (night) g_dl[t] = 180.0;
  }
  ForecastInputs inp = deterministic_inputs(g_r, g_dl);
  ChanceParams cp;
  cp.gamma = 0.5;
  cp.alpha = 0.5;
  SolveOptions on;
  on.n_samples = 32;
  SolveOptions off = on;
  off.use_ca = false;
  Schedule with_ca = schedule_day(inp, flat_prices(24), cp, on);
  Schedule without = schedule_day(inp, flat_prices(24), cp, off);
  REQUIRE(with_ca.all_feasible);
  REQUIRE(without.all_feasible);

  int surplus_hours = 0;
  for (int t = 0; t < 24; ++t) {
    double ca = with_ca.hours[t].expected_cost;
    double base = without.hours[t].expected_cost;
    CHECK(ca <= base + 1e-9);
    bool surplus = with_ca.hours[t].g_rt < -1e-9;
    if (surplus) {
      ++surplus_hours;
      CHECK(ca < base - 1e-9);  // resale revenue materializes
    } else {
      CHECK(ca == doctest::Approx(base).epsilon(1e-12));
    }
  }
  CHECK(surplus_hours > 0);
  CHECK(surplus_hours < 24);
  CHECK(with_ca.f_sub < without.f_sub);
}

TEST_CASE("monte_carlo_validate sees full satisfaction without noise") {
  ForecastInputs inp = deterministic_inputs({100.0, 150.0}, {500.0, 600.0});
  ChanceParams cp;
  Schedule s = schedule_day(inp, flat_prices(2), cp, {});
  ValidationResult v = monte_carlo_validate(s, inp, cp, 10000, 1);
  CHECK(v.empirical_gamma == doctest::Approx(1.0));
  CHECK(v.empirical_alpha == doctest::Approx(1.0));
}

TEST_CASE("monte_carlo_validate tracks the configured gamma when binding") {
  std::vector<double> g_r(12, 150.0), g_dl(12, 800.0);
  ForecastInputs inp = deterministic_inputs(g_r, g_dl);
  inp.error_model_r = gaussian_error(0.0, 0.08);
  inp.error_model_l = {0.0, 0.05};
  ChanceParams cp;
  cp.gamma = 0.97;
  SolveOptions opts;
  opts.n_samples = 512;
  Schedule s = schedule_day(inp, flat_prices(12), cp, opts);
  REQUIRE(s.all_feasible);
  ValidationResult v = monte_carlo_validate(s, inp, cp, 20000, 99);
  double slack = 3.0 * std::sqrt(0.97 * 0.03 / 20000.0);
  CHECK(v.empirical_gamma >= 0.97 - slack);
  for (double g : v.per_hour_gamma) CHECK(g >= 0.97 - slack);
}

TEST_CASE("a deliberately violated schedule fails validation") {
  ForecastInputs inp = deterministic_inputs({0.0}, {1000.0});
  inp.error_model_l = {0.0, 0.1};
  ChanceParams cp;
  cp.gamma = 0.97;
  Schedule s;
  HourDecision h;
  h.feasible = true;
  h.g_da = 1000.0;  // only median coverage
  h.g_w = 0.0;
  s.hours.push_back(h);
  ValidationResult v = monte_carlo_validate(s, inp, cp, 20000, 5);
  CHECK(v.empirical_gamma < 0.97);
  CHECK(v.empirical_gamma == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("infeasible hour reports the binding constraint instead of aborting") {
  ForecastInputs inp = deterministic_inputs({0.0}, {1000.0});
  ChanceParams cp;
  SolveOptions opts;
  opts.g_da_max = 500.0;  // cannot cover the 1000 kWh floor
  Schedule s = schedule_day(inp, flat_prices(1), cp, opts);
  CHECK_FALSE(s.all_feasible);
  CHECK_FALSE(s.hours[0].feasible);
  CHECK(s.hours[0].note.find("load-coverage floor") != std::string::npos);
}

TEST_CASE("price ordering and chance-parameter ranges are enforced") {
  MarketPrices bad = flat_prices(2);
  bad.rho_s[1] = bad.rho_rt[1] + 0.01;  // resale above real-time
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  ChanceParams cp;
  cp.gamma = 0.4;  // below the 0.5 floor
  CHECK_THROWS_AS(cp.validate(), ConfigError);
  cp.gamma = 0.97;
  cp.renewable_share = 1.5;
  CHECK_THROWS_AS(cp.validate(), ConfigError);
}

TEST_CASE("total_cost arithmetic") {
  CHECK(total_cost(100.0, 10.0, 1.0) == doctest::Approx(110.0));
  CHECK(total_cost(100.0, 10.0, 2.0) == doctest::Approx(120.0));
  CHECK(total_cost(100.0, 0.0, 1.0) == doctest::Approx(100.0));
  CHECK_THROWS_AS(total_cost(1.0, 1.0, 0.0), InputError);
}

TEST_CASE("rt_share input validation") {
  ForecastInputs inp = deterministic_inputs({0.0}, {0.0});
  ChanceParams cp;
  Schedule s = schedule_day(inp, flat_prices(1), cp, {});
  CHECK_THROWS_AS(rt_share(s, inp, 0), InputError);   // zero load
  CHECK_THROWS_AS(rt_share(s, inp, 5), InputError);   // bad index
}

TEST_CASE("schedule_day is invariant to the worker count") {
  std::vector<double> g_r(8, 120.0), g_dl(8, 640.0);
  ForecastInputs inp = deterministic_inputs(g_r, g_dl);
  inp.error_model_r = gaussian_error(0.0, 0.1);
  inp.error_model_l = {0.0, 0.04};
  ChanceParams cp;
  SolveOptions seq;
  seq.n_samples = 128;
  SolveOptions par = seq;
  par.workers = 4;
  Schedule a = schedule_day(inp, flat_prices(8), cp, seq);
  Schedule b = schedule_day(inp, flat_prices(8), cp, par);
  REQUIRE(a.hours.size() == b.hours.size());
  for (std::size_t t = 0; t < a.hours.size(); ++t) {
    CHECK(a.hours[t].g_da == b.hours[t].g_da);  // bitwise
    CHECK(a.hours[t].expected_cost == b.hours[t].expected_cost);
  }
}
