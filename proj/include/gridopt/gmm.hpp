#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gridopt/errors.hpp"
#include "gridopt/rng.hpp"
#include "gridopt/stats.hpp"

namespace gridopt {

/// Gaussian mixture: weights sum to 1, covariances stay PSD with a floored
/// smallest eigenvalue (1e-6 of the mean per-dimension data variance).
struct GMMModel {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;

  int k() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }

  void validate() const {
    if (weights.empty() || weights.size() != means.size() ||
        weights.size() != covariances.size())
      throw ValidationError("mixture component arrays are inconsistent");
    double sum = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw ValidationError("negative mixture weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
  }
};

using DataMatrix = std::vector<Eigen::VectorXd>;

inline DataMatrix to_data(const std::vector<double>& samples) {
  DataMatrix data;
  data.reserve(samples.size());
  for (double v : samples) {
    Eigen::VectorXd x(1);
    x(0) = v;
    data.push_back(x);
  }
  return data;
}

namespace gmm_detail {

struct ComponentDensity {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd mean;
  double log_norm = 0.0;  // -q/2 log(2pi) - 1/2 log det

  void init(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
    mean = mu;
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("covariance not positive definite after flooring");
    double log_det = 0.0;
    for (int i = 0; i < cov.rows(); ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
    log_norm = -0.5 * cov.rows() * std::log(2.0 * 3.14159265358979323846) - 0.5 * log_det;
  }

  double log_density(const Eigen::VectorXd& x) const {
    Eigen::VectorXd d = x - mean;
    Eigen::VectorXd s = llt.matrixL().solve(d);
    return log_norm - 0.5 * s.squaredNorm();
  }
};

inline std::vector<ComponentDensity> densities(const GMMModel& m) {
  std::vector<ComponentDensity> out(m.k());
  for (int n = 0; n < m.k(); ++n) out[n].init(m.means[n], m.covariances[n]);
  return out;
}

/// Mean per-dimension sample variance, the scale behind the eigenvalue floor.
inline double data_variance(const DataMatrix& data) {
  const int q = static_cast<int>(data[0].size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(q);
  for (const auto& x : data) mean += x;
  mean /= static_cast<double>(data.size());
  double total = 0.0;
  for (const auto& x : data) total += (x - mean).squaredNorm();
  return total / (static_cast<double>(data.size()) * q);
}

inline Eigen::MatrixXd sample_covariance(const DataMatrix& data) {
  const int q = static_cast<int>(data[0].size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(q);
  for (const auto& x : data) mean += x;
  mean /= static_cast<double>(data.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(q, q);
  for (const auto& x : data) cov += (x - mean) * (x - mean).transpose();
  return cov / static_cast<double>(data.size());
}

inline Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& cov, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
  Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace gmm_detail

inline double log_likelihood(const DataMatrix& data, const GMMModel& m) {
  m.validate();
  auto dens = gmm_detail::densities(m);
  std::vector<double> logw(m.k());
  for (int n = 0; n < m.k(); ++n)
    logw[n] = m.weights[n] > 0.0 ? std::log(m.weights[n]) : -1e300;
  double total = 0.0;
  std::vector<double> terms(m.k());
  for (const auto& x : data) {
    double mx = -1e300;
    for (int n = 0; n < m.k(); ++n) {
      terms[n] = logw[n] + dens[n].log_density(x);
      mx = std::max(mx, terms[n]);
    }
    double s = 0.0;
    for (int n = 0; n < m.k(); ++n) s += std::exp(terms[n] - mx);
    total += mx + std::log(s);
  }
  return total;
}

inline double log_likelihood(const std::vector<double>& samples, const GMMModel& m) {
  return log_likelihood(to_data(samples), m);
}

struct EMConfig {
  int max_iter = 200;
  double loglik_tol = 1e-7;
  double covariance_floor_factor = 1e-6;  // times the mean data variance
  std::uint64_t seed = 1;

  void validate() const {
    if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (!(loglik_tol > 0.0)) throw ConfigError("loglik_tol must be > 0");
    if (!(covariance_floor_factor > 0.0)) throw ConfigError("covariance floor must be > 0");
  }
};

struct EmFitReport {
  GMMModel model;
  std::vector<double> loglik_trace;  // non-decreasing within 1e-9
  int reseed_events = 0;             // empty components re-seeded at random data
  bool converged = false;
};

namespace gmm_detail {

/// One E+M pass. Returns the log-likelihood of the model *before* the update
/// (the quantity EM makes non-decreasing). Components whose responsibility
/// mass collapses are re-seeded at a random datum.
inline double em_step(GMMModel& m, const DataMatrix& data, double floor, Rng& rng,
                      int& reseeds) {
  const int big_m = static_cast<int>(data.size());
  const int k = m.k();
  auto dens = densities(m);
  std::vector<double> logw(k);
  for (int n = 0; n < k; ++n) logw[n] = m.weights[n] > 0.0 ? std::log(m.weights[n]) : -1e300;

  Eigen::MatrixXd resp(big_m, k);
  double loglik = 0.0;
  std::vector<double> terms(k);
  for (int i = 0; i < big_m; ++i) {
    double mx = -1e300;
    for (int n = 0; n < k; ++n) {
      terms[n] = logw[n] + dens[n].log_density(data[i]);
      mx = std::max(mx, terms[n]);
    }
    double s = 0.0;
    for (int n = 0; n < k; ++n) s += std::exp(terms[n] - mx);
    loglik += mx + std::log(s);
    for (int n = 0; n < k; ++n) resp(i, n) = std::exp(terms[n] - mx) / s;
  }

  for (int n = 0; n < k; ++n) {
    double mass = resp.col(n).sum();
    if (mass < 1e-8) {
      // Collapsed component: restart it at a random datum with the sample
      // covariance and a uniform share of weight.
      ++reseeds;
      m.means[n] = data[rng.uniform_index(big_m)];
      m.covariances[n] = floor_eigenvalues(sample_covariance(data), floor);
      m.weights[n] = 1.0 / big_m;
      continue;
    }
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(m.dim());
    for (int i = 0; i < big_m; ++i) mu += resp(i, n) * data[i];
    mu /= mass;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m.dim(), m.dim());
    for (int i = 0; i < big_m; ++i) {
      Eigen::VectorXd d = data[i] - mu;
      cov += resp(i, n) * (d * d.transpose());
    }
    cov /= mass;
    m.weights[n] = mass / big_m;
    m.means[n] = mu;
    m.covariances[n] = floor_eigenvalues(cov, floor);
  }
  double wsum = 0.0;
  for (double w : m.weights) wsum += w;
  for (double& w : m.weights) w /= wsum;
  return loglik;
}

/// Spread initialization: the first mean is a random datum, each further mean
/// is drawn with probability proportional to the squared distance from the
/// nearest already-chosen mean (k-means++ seeding).
inline GMMModel seeded_init(const DataMatrix& data, int k, double floor, Rng& rng) {
  GMMModel m;
  Eigen::MatrixXd cov = floor_eigenvalues(sample_covariance(data), floor);
  std::vector<std::size_t> picks = {rng.uniform_index(data.size())};
  std::vector<double> dist2(data.size());
  while (static_cast<int>(picks.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t p : picks) best = std::min(best, (data[i] - data[p]).squaredNorm());
      dist2[i] = best;
      total += best;
    }
    std::size_t choice;
    if (total <= 0.0) {
      choice = rng.uniform_index(data.size());
    } else {
      double target = rng.uniform() * total;
      double acc = 0.0;
      choice = data.size() - 1;
      for (std::size_t i = 0; i < data.size(); ++i) {
        acc += dist2[i];
        if (acc >= target) {
          choice = i;
          break;
        }
      }
    }
    picks.push_back(choice);
  }
  for (int n = 0; n < k; ++n) {
    m.weights.push_back(1.0 / k);
    m.means.push_back(data[picks[n]]);
    m.covariances.push_back(cov);
  }
  return m;
}

}  // namespace gmm_detail

/// Fits a k-component mixture by EM until the log-likelihood improvement
/// falls below cfg.loglik_tol.
inline EmFitReport em_fit(const DataMatrix& data, int k, const EMConfig& cfg = {}) {
  cfg.validate();
  if (k < 1) throw InputError("k must be >= 1");
  if (static_cast<int>(data.size()) < 5 * k)
    throw InputError("need at least 5k samples to fit k components");
  double floor = cfg.covariance_floor_factor * gmm_detail::data_variance(data);
  if (!(floor > 0.0)) floor = 1e-12;

  Rng rng = substream(cfg.seed, "em_fit");
  EmFitReport report;
  report.model = gmm_detail::seeded_init(data, k, floor, rng);

  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iter; ++it) {
    double ll = gmm_detail::em_step(report.model, data, floor, rng, report.reseed_events);
    report.loglik_trace.push_back(ll);
    if (std::isfinite(prev) && std::abs(ll - prev) <= cfg.loglik_tol) {
      report.converged = true;
      break;
    }
    prev = ll;
  }
  return report;
}

inline EmFitReport em_fit(const std::vector<double>& samples, int k, const EMConfig& cfg = {}) {
  return em_fit(to_data(samples), k, cfg);
}

/// Minimum-description-length score: -loglik + (free parameters / 2) log M.
/// Lower is better.
inline double mdl_score(const GMMModel& m, const DataMatrix& data) {
  const int k = m.k();
  const int q = m.dim();
  double nu = (k - 1) + k * q + k * q * (q + 1) / 2.0;
  return -log_likelihood(data, m) + 0.5 * nu * std::log(static_cast<double>(data.size()));
}

inline double mdl_score(const GMMModel& m, const std::vector<double>& samples) {
  return mdl_score(m, to_data(samples));
}

inline DataMatrix sample(const GMMModel& m, int n, std::uint64_t seed) {
  m.validate();
  if (n < 1) throw InputError("sample count must be >= 1");
  // Symmetric square roots; tolerates zero-variance (point mass) components.
  std::vector<Eigen::MatrixXd> roots;
  for (const auto& cov : m.covariances) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
    if (eig.eigenvalues().minCoeff() < -1e-12)
      throw NumericalError("covariance has a negative eigenvalue");
    Eigen::VectorXd sqrt_lam = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    roots.push_back(eig.eigenvectors() * sqrt_lam.asDiagonal() *
                    eig.eigenvectors().transpose());
  }
  Rng rng = substream(seed, "gmm_sample");
  DataMatrix out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    int comp = 0;
    double acc = 0.0;
    for (int c = 0; c < m.k(); ++c) {
      acc += m.weights[c];
      if (u <= acc || c == m.k() - 1) {
        comp = c;
        break;
      }
    }
    Eigen::VectorXd z(m.dim());
    for (int d = 0; d < m.dim(); ++d) z(d) = rng.normal();
    out.push_back(m.means[comp] + roots[comp] * z);
  }
  return out;
}

inline std::vector<double> sample_1d(const GMMModel& m, int n, std::uint64_t seed) {
  if (m.dim() != 1) throw InputError("sample_1d needs a 1-D mixture");
  std::vector<double> out;
  for (const auto& x : sample(m, n, seed)) out.push_back(x(0));
  return out;
}

inline double mixture_pdf(const GMMModel& m, double x) {
  if (m.dim() != 1) throw InputError("mixture_pdf needs a 1-D mixture");
  double p = 0.0;
  for (int n = 0; n < m.k(); ++n) {
    double sigma = std::sqrt(m.covariances[n](0, 0));
    p += m.weights[n] * normal_pdf(x, m.means[n](0), sigma);
  }
  return p;
}

inline double mixture_cdf(const GMMModel& m, double x) {
  if (m.dim() != 1) throw InputError("mixture_cdf needs a 1-D mixture");
  double p = 0.0;
  for (int n = 0; n < m.k(); ++n) {
    double sigma = std::sqrt(m.covariances[n](0, 0));
    if (sigma <= 0.0)
      p += m.weights[n] * (x >= m.means[n](0) ? 1.0 : 0.0);
    else
      p += m.weights[n] * normal_cdf((x - m.means[n](0)) / sigma);
  }
  return p;
}

/// Quantile by bisection on the mixture CDF to |CDF(x) - p| <= 1e-10.
inline double mixture_quantile(const GMMModel& m, double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("quantile level must be in (0,1)");
  if (m.dim() != 1) throw InputError("mixture_quantile needs a 1-D mixture");
  double lo = m.means[0](0), hi = m.means[0](0), span = 1.0;
  for (int n = 0; n < m.k(); ++n) {
    double sigma = std::sqrt(std::max(m.covariances[n](0, 0), 0.0));
    lo = std::min(lo, m.means[n](0) - 12.0 * sigma - 1.0);
    hi = std::max(hi, m.means[n](0) + 12.0 * sigma + 1.0);
    span = std::max(span, hi - lo);
  }
  while (mixture_cdf(m, lo) > p) lo -= span;
  while (mixture_cdf(m, hi) < p) hi += span;
  for (int it = 0; it < 400; ++it) {
    double mid = 0.5 * (lo + hi);
    double c = mixture_cdf(m, mid);
    if (std::abs(c - p) <= 1e-12) return mid;
    if (c < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) return mid;
  }
  return 0.5 * (lo + hi);
}

/// Single-Gaussian moment matching, the comparison baseline and the literal
/// quantile path for the deterministic scheduler reformulation.
inline void moment_match(const GMMModel& m, double& mean, double& stddev) {
  if (m.dim() != 1) throw InputError("moment_match needs a 1-D mixture");
  mean = 0.0;
  double second = 0.0;
  for (int n = 0; n < m.k(); ++n) {
    mean += m.weights[n] * m.means[n](0);
    second += m.weights[n] * (m.covariances[n](0, 0) + m.means[n](0) * m.means[n](0));
  }
  stddev = std::sqrt(std::max(second - mean * mean, 0.0));
}

/// Residual-deviation ratio: squared difference between the fitted density
/// and the histogram envelope, normalized by the envelope's squared mass,
/// in percent. Both envelopes are normalized to unit area over the bins.
inline double eta_ratio(const GMMModel& m, const std::vector<double>& data, int bins = 100) {
  if (bins < 10) throw ConfigError("eta_ratio needs at least 10 bins");
  if (data.size() < 100) throw InputError("eta_ratio needs at least 100 samples");
  if (m.dim() != 1) throw InputError("eta_ratio needs a 1-D mixture");
  double lo = *std::min_element(data.begin(), data.end());
  double hi = *std::max_element(data.begin(), data.end());
  if (!(hi > lo)) throw InputError("degenerate data range");
  double width = (hi - lo) / bins;

  std::vector<double> hist(bins, 0.0);
  for (double v : data) {
    int b = std::min(static_cast<int>((v - lo) / width), bins - 1);
    hist[b] += 1.0;
  }
  double hist_area = 0.0, fit_area = 0.0;
  std::vector<double> fit(bins, 0.0);
  for (int b = 0; b < bins; ++b) {
    hist[b] /= data.size() * width;  // density estimate
    double center = lo + (b + 0.5) * width;
    fit[b] = mixture_pdf(m, center);
    hist_area += hist[b] * width;
    fit_area += fit[b] * width;
  }
  double num = 0.0, den = 0.0;
  for (int b = 0; b < bins; ++b) {
    double h = hist[b] / hist_area;
    double f = fit_area > 0.0 ? fit[b] / fit_area : 0.0;
    num += (f - h) * (f - h);
    den += h * h;
  }
  return num / den * 100.0;
}

}  // namespace gridopt
