#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gridopt/parallel.hpp"
#include "gridopt/rng.hpp"
#include "gridopt/svr.hpp"

namespace gridopt {

/// Per-axis search range for the coarse grid traverse. Axes are ordered
/// (gamma, C, epsilon).
struct GridAxis {
  double lower = 0.0;
  double upper = 0.0;
  int steps = 2;
  bool log_scale = true;

  std::vector<double> values() const {
    if (!(lower < upper)) throw InputError("grid axis needs lower < upper");
    if (steps < 2) throw InputError("grid axis needs at least 2 steps");
    std::vector<double> out(steps);
    if (log_scale) {
      if (!(lower > 0.0)) throw InputError("log-scale axis needs positive bounds");
      double l0 = std::log(lower), l1 = std::log(upper);
      for (int i = 0; i < steps; ++i)
        out[i] = std::exp(l0 + (l1 - l0) * i / (steps - 1));
    } else {
      for (int i = 0; i < steps; ++i)
        out[i] = lower + (upper - lower) * i / (steps - 1);
    }
    return out;
  }
};

struct GridSpec {
  GridAxis gamma{std::pow(2.0, -10), std::pow(2.0, 4), 8, true};
  GridAxis c{std::pow(2.0, -2), std::pow(2.0, 10), 8, true};
  GridAxis epsilon{1e-3, 1e-1, 8, true};

  std::size_t cell_count() const {
    return static_cast<std::size_t>(gamma.steps) * c.steps * epsilon.steps;
  }
};

/// One grid cell: a center point plus the one-grid-step neighborhood used as
/// local bounds for the refinement step.
struct GtaCell {
  HyperParams center;
  std::array<double, 3> lower = {0, 0, 0};  // gamma, C, epsilon
  std::array<double, 3> upper = {0, 0, 0};
  double risk = 0.0;
  std::size_t flat_index = 0;
};

namespace detail {

inline void neighborhood(const std::vector<double>& axis, int i, double& lo, double& hi) {
  lo = i > 0 ? axis[i - 1] : axis[i];
  hi = i + 1 < static_cast<int>(axis.size()) ? axis[i + 1] : axis[i];
  if (lo == hi) {  // single direction available; widen marginally to keep a box
    lo = std::nextafter(lo, -std::numeric_limits<double>::infinity());
    hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
  }
}

}  // namespace detail

/// Exhaustive grid traverse: evaluates the validation risk at every point of
/// the Cartesian product (the parallel map phase) and keeps the `keep` best
/// cells with their neighborhoods (the reduce phase). The returned set
/// contains the global grid minimizer by construction.
inline std::vector<GtaCell> gta_search(const std::vector<std::vector<double>>& x,
                                       const std::vector<double>& y, const GridSpec& g,
                                       int keep, double split = 1.0 / 6.0, int workers = 1) {
  if (keep < 1) throw InputError("keep must be >= 1");
  if (g.cell_count() > 1000000) throw CapacityError("grid larger than 1e6 cells");
  const auto gammas = g.gamma.values();
  const auto cs = g.c.values();
  const auto epss = g.epsilon.values();
  const std::size_t total = g.cell_count();

  std::vector<double> risks = parallel_map<double>(total, workers, [&](std::size_t idx) {
    std::size_t ie = idx % epss.size();
    std::size_t ic = (idx / epss.size()) % cs.size();
    std::size_t ig = idx / (epss.size() * cs.size());
    HyperParams h{gammas[ig], cs[ic], epss[ie]};
    return risk(x, y, h, split);
  });

  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return risks[a] < risks[b]; });

  std::vector<GtaCell> cells;
  for (int k = 0; k < keep && k < static_cast<int>(total); ++k) {
    std::size_t idx = order[k];
    std::size_t ie = idx % epss.size();
    std::size_t ic = (idx / epss.size()) % cs.size();
    std::size_t ig = idx / (epss.size() * cs.size());
    GtaCell cell;
    cell.center = {gammas[ig], cs[ic], epss[ie]};
    cell.risk = risks[idx];
    cell.flat_index = idx;
    detail::neighborhood(gammas, static_cast<int>(ig), cell.lower[0], cell.upper[0]);
    detail::neighborhood(cs, static_cast<int>(ic), cell.lower[1], cell.upper[1]);
    detail::neighborhood(epss, static_cast<int>(ie), cell.lower[2], cell.upper[2]);
    cells.push_back(cell);
  }
  return cells;
}

/// Particle state for the refinement swarm.
struct Particle {
  std::array<double, 3> position = {0, 0, 0};
  std::array<double, 3> velocity = {0, 0, 0};
  std::array<double, 3> best_position = {0, 0, 0};
  double best_risk = std::numeric_limits<double>::infinity();
};

struct Swarm {
  std::vector<Particle> particles;
  std::array<double, 3> global_best = {0, 0, 0};
  double global_best_risk = std::numeric_limits<double>::infinity();
  double phi1 = 1.5;
  double phi2 = 1.5;
};

/// One synchronous swarm pass: every particle moves against the current
/// global best (velocity clamped to 20% of the cell width, position clipped
/// to the cell box), risks are evaluated, then bests are refreshed. Random
/// draws are consumed in particle-index order from `rng`; objective
/// evaluations may run in parallel without affecting the result.
inline void pso_step(Swarm& swarm, const std::function<double(const HyperParams&)>& objective,
                     const std::array<double, 3>& lower, const std::array<double, 3>& upper,
                     Rng& rng, int workers = 1) {
  for (auto& p : swarm.particles) {
    for (int d = 0; d < 3; ++d) {
      double theta1 = rng.uniform();
      double theta2 = rng.uniform();
      p.velocity[d] += swarm.phi1 * theta1 * (p.best_position[d] - p.position[d]) +
                       swarm.phi2 * theta2 * (swarm.global_best[d] - p.position[d]);
      double vmax = 0.2 * (upper[d] - lower[d]);
      p.velocity[d] = std::clamp(p.velocity[d], -vmax, vmax);
      p.position[d] = std::clamp(p.position[d] + p.velocity[d], lower[d], upper[d]);
    }
  }
  std::vector<double> risks = parallel_map<double>(
      swarm.particles.size(), workers, [&](std::size_t i) {
        const auto& pos = swarm.particles[i].position;
        return objective({pos[0], pos[1], pos[2]});
      });
  for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
    auto& p = swarm.particles[i];
    if (risks[i] < p.best_risk) {
      p.best_risk = risks[i];
      p.best_position = p.position;
    }
    if (risks[i] < swarm.global_best_risk) {
      swarm.global_best_risk = risks[i];
      swarm.global_best = p.position;
    }
  }
}

struct PsoResult {
  HyperParams best;
  double risk = std::numeric_limits<double>::infinity();
  // One trace per refined cell; each is non-increasing across iterations.
  std::vector<std::vector<double>> cell_traces;
};

/// Refines the GTA cells with one particle swarm per cell and returns the
/// best hyper-parameters found across all cells.
inline PsoResult pso_refine(const std::vector<std::vector<double>>& x,
                            const std::vector<double>& y, const std::vector<GtaCell>& cells,
                            int swarm_size, int iters, std::uint64_t seed,
                            double split = 1.0 / 6.0, int workers = 1) {
  if (cells.empty()) throw InputError("no cells to refine");
  if (swarm_size < 2) throw InputError("swarm_size must be >= 2");
  if (iters < 1) throw InputError("iters must be >= 1");

  auto objective = [&](const HyperParams& h) { return risk(x, y, h, split); };

  PsoResult out;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const GtaCell& cell = cells[ci];
    Rng rng = substream(seed, "pso_cell", ci);

    Swarm swarm;
    swarm.particles.resize(swarm_size);
    for (auto& p : swarm.particles)
      for (int d = 0; d < 3; ++d) {
        p.position[d] = rng.uniform(cell.lower[d], cell.upper[d]);
        p.velocity[d] = 0.0;
      }
    // Seed one particle at the cell center so refinement starts no worse
    // than the coarse result.
    swarm.particles[0].position = {cell.center.gamma, cell.center.c, cell.center.epsilon};

    std::vector<double> init_risks = parallel_map<double>(
        swarm.particles.size(), workers, [&](std::size_t i) {
          const auto& pos = swarm.particles[i].position;
          return objective({pos[0], pos[1], pos[2]});
        });
    for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
      auto& p = swarm.particles[i];
      p.best_risk = init_risks[i];
      p.best_position = p.position;
      if (init_risks[i] < swarm.global_best_risk) {
        swarm.global_best_risk = init_risks[i];
        swarm.global_best = p.position;
      }
    }

    std::vector<double> trace;
    for (int it = 0; it < iters; ++it) {
      pso_step(swarm, objective, cell.lower, cell.upper, rng, workers);
      trace.push_back(swarm.global_best_risk);
    }
    out.cell_traces.push_back(std::move(trace));
    if (swarm.global_best_risk < out.risk) {
      out.risk = swarm.global_best_risk;
      out.best = {swarm.global_best[0], swarm.global_best[1], swarm.global_best[2]};
    }
  }
  return out;
}

struct TuneConfig {
  int keep = 2;
  int swarm_size = 8;
  int pso_iters = 10;
  std::uint64_t seed = 1;
  double split = 1.0 / 6.0;
  bool skip_pso = false;
  int workers = 1;
};

struct TuneResult {
  HyperParams best;
  double risk = 0.0;
  double gta_risk = 0.0;  // best coarse-grid risk, for comparison
};

/// Two-step search: coarse grid traverse, then swarm refinement inside the
/// best cells. With skip_pso the best grid point is returned directly.
inline TuneResult optimize_hyperparams(const std::vector<std::vector<double>>& x,
                                       const std::vector<double>& y, const GridSpec& g,
                                       const TuneConfig& cfg = {}) {
  std::vector<GtaCell> cells = gta_search(x, y, g, cfg.keep, cfg.split, cfg.workers);
  TuneResult result;
  result.gta_risk = cells.front().risk;
  if (cfg.skip_pso) {
    result.best = cells.front().center;
    result.risk = cells.front().risk;
    return result;
  }
  PsoResult pso = pso_refine(x, y, cells, cfg.swarm_size, cfg.pso_iters, cfg.seed, cfg.split,
                             cfg.workers);
  // The swarm is seeded with the cell center, so it can only improve on the
  // coarse risk; keep the better of the two regardless.
  if (pso.risk <= result.gta_risk) {
    result.best = pso.best;
    result.risk = pso.risk;
  } else {
    result.best = cells.front().center;
    result.risk = cells.front().risk;
  }
  return result;
}

}  // namespace gridopt
