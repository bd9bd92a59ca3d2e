#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "gridopt/gmm.hpp"
#include "gridopt/parallel.hpp"

namespace gridopt {

struct GAEMConfig {
  int population_size = 50;
  double crossover_prob = 0.8;
  double mutation_prob = 0.08;
  int k_min = 1;
  int k_max = 6;
  int em_steps_per_child = 5;
  int generations = 40;
  std::uint64_t seed = 1;
  EMConfig em;
  int workers = 1;

  void validate() const {
    if (population_size < 2) throw ConfigError("population_size must be >= 2");
    if (crossover_prob < 0.0 || crossover_prob > 1.0)
      throw ConfigError("crossover_prob must be in [0,1]");
    if (mutation_prob < 0.0 || mutation_prob > 1.0)
      throw ConfigError("mutation_prob must be in [0,1]");
    if (k_min < 1 || k_max < k_min) throw ConfigError("need 1 <= k_min <= k_max");
    if (em_steps_per_child < 1) throw ConfigError("em_steps_per_child must be >= 1");
    if (generations < 1) throw ConfigError("generations must be >= 1");
  }
};

struct GaemReport {
  GMMModel model;
  std::vector<double> best_mdl_trace;  // per generation, non-increasing (elitism)
  std::vector<int> best_k_trace;
};

namespace gaem_detail {

struct Individual {
  GMMModel model;
  double mdl = std::numeric_limits<double>::infinity();
};

inline void renormalize(GMMModel& m) {
  double sum = 0.0;
  for (double w : m.weights) sum += w;
  if (sum <= 0.0) {
    for (double& w : m.weights) w = 1.0 / m.k();
  } else {
    for (double& w : m.weights) w /= sum;
  }
}

/// Whole-component crossover: the child draws components from the pooled
/// parents without replacement; the component count lands between the
/// parents' counts.
inline GMMModel crossover(const GMMModel& a, const GMMModel& b, int k_min, int k_max,
                          Rng& rng) {
  std::vector<int> pool_parent;  // 0 = a, 1 = b
  std::vector<int> pool_index;
  for (int n = 0; n < a.k(); ++n) {
    pool_parent.push_back(0);
    pool_index.push_back(n);
  }
  for (int n = 0; n < b.k(); ++n) {
    pool_parent.push_back(1);
    pool_index.push_back(n);
  }
  int k_child = std::clamp((a.k() + b.k() + 1) / 2, k_min, k_max);
  GMMModel child;
  std::vector<std::size_t> order(pool_parent.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Seeded partial shuffle.
  for (std::size_t i = 0; i < order.size(); ++i)
    std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
  for (int c = 0; c < k_child; ++c) {
    std::size_t pick = order[c % order.size()];
    const GMMModel& src = pool_parent[pick] == 0 ? a : b;
    int idx = pool_index[pick];
    child.weights.push_back(src.weights[idx]);
    child.means.push_back(src.means[idx]);
    child.covariances.push_back(src.covariances[idx]);
  }
  renormalize(child);
  return child;
}

/// Mutation: perturb a mean, rescale a covariance, or insert/delete a
/// component within [k_min, k_max].
inline void mutate(GMMModel& m, const DataMatrix& data, double floor, int k_min, int k_max,
                   Rng& rng) {
  int choice = static_cast<int>(rng.uniform_index(4));
  int n = static_cast<int>(rng.uniform_index(m.k()));
  switch (choice) {
    case 0: {  // jitter one mean by a fraction of its own spread
      for (int d = 0; d < m.dim(); ++d)
        m.means[n](d) += 0.3 * std::sqrt(m.covariances[n](d, d)) * rng.normal();
      break;
    }
    case 1: {  // rescale one covariance
      double s = rng.uniform(0.5, 2.0);
      m.covariances[n] = gmm_detail::floor_eigenvalues(m.covariances[n] * s, floor);
      break;
    }
    case 2: {  // insert a component at a random datum
      if (m.k() >= k_max) break;
      m.weights.push_back(1.0 / data.size());
      m.means.push_back(data[rng.uniform_index(data.size())]);
      m.covariances.push_back(
          gmm_detail::floor_eigenvalues(gmm_detail::sample_covariance(data), floor));
      renormalize(m);
      break;
    }
    default: {  // delete a component
      if (m.k() <= k_min) break;
      m.weights.erase(m.weights.begin() + n);
      m.means.erase(m.means.begin() + n);
      m.covariances.erase(m.covariances.begin() + n);
      renormalize(m);
      break;
    }
  }
}

inline void refine(Individual& ind, const DataMatrix& data, double floor, int steps,
                   Rng& rng) {
  int reseeds = 0;
  for (int s = 0; s < steps; ++s) gmm_detail::em_step(ind.model, data, floor, rng, reseeds);
  ind.mdl = mdl_score(ind.model, data);
}

/// Moment-preserving merge of the two components with the closest means
/// (scaled by their pooled spread): the merged component keeps the pair's
/// total weight, mean, and second moment.
inline GMMModel merge_nearest(const GMMModel& m, double floor) {
  if (m.k() < 2) return m;
  int bi = 0, bj = 1;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m.k(); ++i)
    for (int j = i + 1; j < m.k(); ++j) {
      double spread = m.covariances[i].trace() + m.covariances[j].trace();
      double d = (m.means[i] - m.means[j]).squaredNorm() / std::max(spread, 1e-12);
      if (d < best) {
        best = d;
        bi = i;
        bj = j;
      }
    }
  GMMModel out;
  double w = m.weights[bi] + m.weights[bj];
  double f1 = m.weights[bi] / w, f2 = m.weights[bj] / w;
  Eigen::VectorXd mu = f1 * m.means[bi] + f2 * m.means[bj];
  Eigen::MatrixXd cov =
      f1 * (m.covariances[bi] + (m.means[bi] - mu) * (m.means[bi] - mu).transpose()) +
      f2 * (m.covariances[bj] + (m.means[bj] - mu) * (m.means[bj] - mu).transpose());
  for (int n = 0; n < m.k(); ++n) {
    if (n == bi || n == bj) continue;
    out.weights.push_back(m.weights[n]);
    out.means.push_back(m.means[n]);
    out.covariances.push_back(m.covariances[n]);
  }
  out.weights.push_back(w);
  out.means.push_back(mu);
  out.covariances.push_back(gmm_detail::floor_eigenvalues(cov, floor));
  renormalize(out);
  return out;
}

}  // namespace gaem_detail

/// Genetic-algorithm EM: evolves a population of mixtures with varying
/// component counts, scores fitness by negative MDL, refines every offspring
/// with a few EM steps, and keeps the elite unchanged so the best MDL never
/// regresses. Returns the elite model.
inline GaemReport gaem_fit(const DataMatrix& data, const GAEMConfig& cfg = {}) {
  cfg.validate();
  if (static_cast<int>(data.size()) < 5 * cfg.k_max)
    throw InputError("need at least 5*k_max samples");
  double floor = cfg.em.covariance_floor_factor * gmm_detail::data_variance(data);
  if (!(floor > 0.0)) floor = 1e-12;

  using gaem_detail::Individual;

  // Seeded initial population spanning the k range.
  std::vector<Individual> population(cfg.population_size);
  {
    std::vector<Individual> fresh = parallel_map<Individual>(
        cfg.population_size, cfg.workers, [&](std::size_t i) {
          Rng rng = substream(cfg.seed, "gaem_init", i);
          Individual ind;
          int k = cfg.k_min + static_cast<int>(rng.uniform_index(cfg.k_max - cfg.k_min + 1));
          ind.model = gmm_detail::seeded_init(data, k, floor, rng);
          gaem_detail::refine(ind, data, floor, cfg.em_steps_per_child, rng);
          return ind;
        });
    population = std::move(fresh);
  }

  auto best_of = [&](const std::vector<Individual>& pop) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pop.size(); ++i)
      if (pop[i].mdl < pop[best].mdl) best = i;
    return best;
  };

  GaemReport report;
  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::size_t elite = best_of(population);
    std::vector<Individual> next;
    // Elitism with polishing: extra EM steps can only improve the elite's
    // likelihood, so the best MDL still never regresses.
    {
      Individual polished = population[elite];
      Rng rng = substream(cfg.seed, "gaem_elite", gen);
      gaem_detail::refine(polished, data, floor, cfg.em_steps_per_child, rng);
      next.push_back(polished.mdl <= population[elite].mdl ? polished : population[elite]);
    }

    // Parent selection and variation are drawn sequentially for determinism;
    // the EM refinement of the offspring runs in parallel.
    Rng select_rng = substream(cfg.seed, "gaem_gen", gen);
    std::vector<Individual> offspring;
    while (static_cast<int>(next.size() + offspring.size()) < cfg.population_size) {
      auto tournament = [&]() -> const Individual& {
        const Individual& c1 = population[select_rng.uniform_index(population.size())];
        const Individual& c2 = population[select_rng.uniform_index(population.size())];
        return c1.mdl <= c2.mdl ? c1 : c2;
      };
      const Individual& p1 = tournament();
      const Individual& p2 = tournament();
      Individual child;
      if (select_rng.uniform() < cfg.crossover_prob)
        child.model = gaem_detail::crossover(p1.model, p2.model, cfg.k_min, cfg.k_max,
                                             select_rng);
      else
        child.model = p1.model;
      if (select_rng.uniform() < cfg.mutation_prob)
        gaem_detail::mutate(child.model, data, floor, cfg.k_min, cfg.k_max, select_rng);
      offspring.push_back(std::move(child));
    }

    std::vector<Individual> refined = parallel_map<Individual>(
        offspring.size(), cfg.workers, [&](std::size_t i) {
          Rng rng = substream(cfg.seed, "gaem_refine",
                              static_cast<std::uint64_t>(gen) * 100000 + i);
          Individual ind = offspring[i];
          gaem_detail::refine(ind, data, floor, cfg.em_steps_per_child, rng);
          return ind;
        });
    for (auto& ind : refined) next.push_back(std::move(ind));
    population = std::move(next);

    std::size_t best = best_of(population);
    report.best_mdl_trace.push_back(population[best].mdl);
    report.best_k_trace.push_back(population[best].model.k());
  }

  // Final selection: the best survivor of each component count is run to EM
  // convergence so candidates compete at their converged likelihoods, then
  // the lowest MDL wins (smaller k on ties). Likelihood only rises during
  // the polish, so the winner scores no worse than the last trace entry.
  std::vector<Individual> finalists;
  for (int k = cfg.k_min; k <= cfg.k_max; ++k) {
    const Individual* best = nullptr;
    for (const auto& ind : population)
      if (ind.model.k() == k && (!best || ind.mdl < best->mdl)) best = &ind;
    if (best) finalists.push_back(*best);
  }
  // Merge-down ladder from the elite: agglomerating the closest pair gives a
  // strong candidate at every smaller component count.
  {
    GMMModel walk = population[best_of(population)].model;
    while (walk.k() > cfg.k_min) {
      walk = gaem_detail::merge_nearest(walk, floor);
      Individual ind;
      ind.model = walk;
      ind.mdl = mdl_score(walk, data);
      finalists.push_back(ind);
    }
  }
  std::vector<Individual> polished = parallel_map<Individual>(
      finalists.size(), cfg.workers, [&](std::size_t i) {
        Individual ind = finalists[i];
        Rng rng = substream(cfg.seed, "gaem_polish", i);
        int reseeds = 0;
        double prev = -std::numeric_limits<double>::infinity();
        for (int it = 0; it < cfg.em.max_iter; ++it) {
          double ll = gmm_detail::em_step(ind.model, data, floor, rng, reseeds);
          if (std::isfinite(prev) && std::abs(ll - prev) <= cfg.em.loglik_tol) break;
          prev = ll;
        }
        ind.mdl = mdl_score(ind.model, data);
        return ind;
      });
  std::size_t winner = 0;
  for (std::size_t i = 1; i < polished.size(); ++i)
    if (polished[i].mdl < polished[winner].mdl) winner = i;
  report.model = polished[winner].model;
  return report;
}

inline GaemReport gaem_fit(const std::vector<double>& samples, const GAEMConfig& cfg = {}) {
  return gaem_fit(to_data(samples), cfg);
}

}  // namespace gridopt
