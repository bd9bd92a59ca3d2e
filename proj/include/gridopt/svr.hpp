#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gridopt/errors.hpp"

namespace gridopt {

/// SVR hyper-parameter triple: RBF width gamma, trade-off C, tube width eps.
struct HyperParams {
  double gamma = 1.0;
  double c = 10.0;
  double epsilon = 0.01;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be finite and > 0");
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("C must be finite and > 0");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
      throw InputError("epsilon must be finite and >= 0");
  }
};

inline double rbf_kernel(const std::vector<double>& a, const std::vector<double>& b,
                         double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

struct SVRModel {
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> dual_coeffs;  // alpha_i - alpha_i^*, one per support vector
  double bias = 0.0;
  HyperParams hyper;
  // Trainer diagnostics.
  double kkt_violation = 0.0;
  int iterations = 0;
};

inline double predict(const SVRModel& m, const std::vector<double>& x) {
  if (!m.support_vectors.empty() && m.support_vectors.front().size() != x.size())
    throw InputError("feature dimension mismatch: model has " +
                     std::to_string(m.support_vectors.front().size()) + ", input has " +
                     std::to_string(x.size()));
  double f = m.bias;
  for (std::size_t i = 0; i < m.support_vectors.size(); ++i)
    f += m.dual_coeffs[i] * rbf_kernel(m.support_vectors[i], x, m.hyper.gamma);
  return f;
}

/// Trains epsilon-insensitive SVR by pairwise dual coordinate ascent (SMO with
/// maximal-violating-pair selection). The 2n dual variables are the paired
/// (alpha, alpha*) boxes in [0, C]; iteration stops when the KKT violation
/// m - M drops below `tol`.
inline SVRModel train_svr(const std::vector<std::vector<double>>& x,
                          const std::vector<double>& y, const HyperParams& h,
                          double tol = 1e-3, int max_iter = 100000) {
  h.validate();
  if (x.empty() || y.empty()) throw InputError("training data is empty");
  if (x.size() != y.size()) throw InputError("feature/target size mismatch");
  if (x.size() < 2) throw InputError("need at least 2 training points");
  const int n = static_cast<int>(x.size());
  const std::size_t dim = x[0].size();
  for (const auto& xi : x) {
    if (xi.size() != dim) throw InputError("inconsistent feature dimensions");
    for (double v : xi)
      if (!std::isfinite(v)) throw InputError("non-finite feature value");
  }
  for (double v : y)
    if (!std::isfinite(v)) throw InputError("non-finite target value");

  // Dense kernel matrix; training sets here are small enough to cache fully.
  std::vector<double> kmat(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double k = rbf_kernel(x[i], x[j], h.gamma);
      kmat[static_cast<std::size_t>(i) * n + j] = k;
      kmat[static_cast<std::size_t>(j) * n + i] = k;
    }
  auto kern = [&](int i, int j) { return kmat[static_cast<std::size_t>(i) * n + j]; };

  // beta[t]: t < n is alpha_i, t >= n is alpha*_i; sign s_t = +1 / -1.
  std::vector<double> beta(2 * n, 0.0);
  std::vector<double> qnet(n, 0.0);  // sum_j K_ij (alpha_j - alpha*_j)
  auto sign = [&](int t) { return t < n ? 1.0 : -1.0; };
  auto samp = [&](int t) { return t < n ? t : t - n; };
  auto grad = [&](int t) {
    return sign(t) * qnet[samp(t)] + h.epsilon - sign(t) * y[samp(t)];
  };

  const double c = h.c;
  double violation = 0.0;
  int iter = 0;
  for (iter = 0; iter < max_iter; ++iter) {
    // Maximal violating pair over I_up / I_low.
    int ti = -1, tj = -1;
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 2 * n; ++t) {
      double g = -sign(t) * grad(t);
      bool in_up = sign(t) > 0 ? beta[t] < c : beta[t] > 0;
      bool in_low = sign(t) > 0 ? beta[t] > 0 : beta[t] < c;
      if (in_up && g > m_up) {
        m_up = g;
        ti = t;
      }
      if (in_low && g < m_low) {
        m_low = g;
        tj = t;
      }
    }
    violation = m_up - m_low;
    if (violation <= tol || ti < 0 || tj < 0) break;

    int i = samp(ti), j = samp(tj);
    double quad = kern(i, i) + kern(j, j) - 2.0 * kern(i, j);
    if (quad <= 1e-12) quad = 1e-12;
    double delta = violation / quad;
    // Move beta[ti] by s_i*delta and beta[tj] by -s_j*delta, clipped to boxes.
    double cap_i = sign(ti) > 0 ? c - beta[ti] : beta[ti];
    double cap_j = sign(tj) > 0 ? beta[tj] : c - beta[tj];
    delta = std::min({delta, cap_i, cap_j});
    if (delta <= 0.0) break;
    beta[ti] += sign(ti) * delta;
    beta[tj] -= sign(tj) * delta;
    // Net coefficient of sample i rises by delta, of sample j falls by delta.
    for (int r = 0; r < n; ++r) qnet[r] += delta * (kern(r, i) - kern(r, j));
  }

  // Bias from the free variables, else the KKT midpoint.
  double b = 0.0;
  int free_count = 0;
  double m_up = -std::numeric_limits<double>::infinity();
  double m_low = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 2 * n; ++t) {
    double g = -sign(t) * grad(t);
    bool in_up = sign(t) > 0 ? beta[t] < c : beta[t] > 0;
    bool in_low = sign(t) > 0 ? beta[t] > 0 : beta[t] < c;
    if (in_up) m_up = std::max(m_up, g);
    if (in_low) m_low = std::min(m_low, g);
    if (beta[t] > 0.0 && beta[t] < c) {
      b += g;
      ++free_count;
    }
  }
  if (free_count > 0)
    b /= free_count;
  else if (std::isfinite(m_up) && std::isfinite(m_low))
    b = 0.5 * (m_up + m_low);

  SVRModel model;
  model.hyper = h;
  model.bias = b;
  model.kkt_violation = std::max(violation, 0.0);
  model.iterations = iter;
  for (int i = 0; i < n; ++i) {
    double net = beta[i] - beta[n + i];
    if (net != 0.0) {
      model.support_vectors.push_back(x[i]);
      model.dual_coeffs.push_back(net);
    }
  }
  return model;
}

/// Validation risk of a hyper-parameter triple: train on the leading
/// (1 - split) fraction, report RMSE normalized by the validation standard
/// deviation. Chronological split -- no shuffling.
inline double risk(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                   const HyperParams& h, double split = 1.0 / 6.0) {
  if (!(split > 0.0 && split < 1.0)) throw InputError("split must be in (0,1)");
  const int n = static_cast<int>(x.size());
  int n_train = static_cast<int>(std::llround(n * (1.0 - split)));
  if (n_train < 2 || n_train >= n)
    throw InputError("split leaves too few training or validation points");

  std::vector<std::vector<double>> xt(x.begin(), x.begin() + n_train);
  std::vector<double> yt(y.begin(), y.begin() + n_train);
  SVRModel model = train_svr(xt, yt, h);

  double mean = 0.0;
  for (int i = n_train; i < n; ++i) mean += y[i];
  int n_val = n - n_train;
  mean /= n_val;
  double sse = 0.0, var = 0.0;
  for (int i = n_train; i < n; ++i) {
    double err = predict(model, x[i]) - y[i];
    sse += err * err;
    var += (y[i] - mean) * (y[i] - mean);
  }
  double rmse = std::sqrt(sse / n_val);
  double stddev = std::sqrt(var / n_val);
  return rmse / std::max(stddev, 1e-12);
}

}  // namespace gridopt
