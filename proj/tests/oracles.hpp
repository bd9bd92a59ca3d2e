// Test-only oracles. Everything here recomputes expected values by an
// independent route (union-find, dense Newton, naive formulas) and must not
// call into the implementation paths it checks.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Union-find spanning-forest radiality check.
// ---------------------------------------------------------------------------

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }

  /// Returns false if a and b were already connected (edge closes a cycle).
  bool unite(int a, int b) {
    int ra = find(a), rb = find(b);
    if (ra == rb) return false;
    parent_[ra] = rb;
    return true;
  }

 private:
  std::vector<int> parent_;
};

/// Spanning-forest test: edges acyclic and every node shares a component with
/// some slack, with exactly one slack per component.
inline bool radial_forest(int n, const std::vector<std::pair<int, int>>& edges,
                          const std::vector<int>& slacks) {
  UnionFind uf(n);
  for (auto [a, b] : edges)
    if (!uf.unite(a, b)) return false;  // cycle
  std::vector<int> slack_count(n, 0);
  for (int s : slacks) slack_count[uf.find(s)]++;
  for (int i = 0; i < n; ++i)
    if (slack_count[uf.find(i)] != 1) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Newton-Raphson AC power flow on a single-phase equivalent. Finite-difference
// Jacobian; dense solve. Loads are consumption-positive in per-unit.
// ---------------------------------------------------------------------------

struct PfBranch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
};

struct PfResult {
  bool converged = false;
  std::vector<std::complex<double>> v;      // bus voltages
  std::vector<double> branch_l;             // squared current magnitude per branch
  std::vector<std::complex<double>> s_from; // sending-end complex power per branch
  double total_loss = 0.0;                  // pu, sum of r * l
};

/// Solves the power flow with all slack buses held at 1.0 pu angle 0.
/// `p_inj`/`q_inj` are net injections (generation - load) at non-slack buses.
inline PfResult newton_power_flow(int n, const std::vector<PfBranch>& branches,
                                  const std::vector<bool>& is_slack,
                                  const std::vector<double>& p_inj,
                                  const std::vector<double>& q_inj,
                                  int max_iter = 60, double tol = 1e-12) {
  using cd = std::complex<double>;
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : branches) {
    cd adm = 1.0 / cd(br.r, br.x);
    y(br.from, br.from) += adm;
    y(br.to, br.to) += adm;
    y(br.from, br.to) -= adm;
    y(br.to, br.from) -= adm;
  }

  std::vector<int> pq;
  for (int i = 0; i < n; ++i)
    if (!is_slack[i]) pq.push_back(i);
  const int m = static_cast<int>(pq.size());

  // State: angles then magnitudes of non-slack buses.
  Eigen::VectorXd state = Eigen::VectorXd::Zero(2 * m);
  for (int k = 0; k < m; ++k) state(m + k) = 1.0;

  auto voltages = [&](const Eigen::VectorXd& st) {
    std::vector<cd> v(n, cd(1.0, 0.0));
    for (int k = 0; k < m; ++k) v[pq[k]] = std::polar(st(m + k), st(k));
    return v;
  };

  auto mismatch = [&](const Eigen::VectorXd& st) {
    auto v = voltages(st);
    Eigen::VectorXd f(2 * m);
    for (int k = 0; k < m; ++k) {
      cd s_calc = 0.0;
      for (int j = 0; j < n; ++j) s_calc += v[pq[k]] * std::conj(y(pq[k], j) * v[j]);
      f(k) = s_calc.real() - p_inj[pq[k]];
      f(m + k) = s_calc.imag() - q_inj[pq[k]];
    }
    return f;
  };

  PfResult res;
  if (m > 0) {
    bool ok = false;
    for (int it = 0; it < max_iter; ++it) {
      Eigen::VectorXd f = mismatch(state);
      if (f.lpNorm<Eigen::Infinity>() < tol) {
        ok = true;
        break;
      }
      Eigen::MatrixXd jac(2 * m, 2 * m);
      const double h = 1e-7;
      for (int c = 0; c < 2 * m; ++c) {
        Eigen::VectorXd pert = state;
        pert(c) += h;
        jac.col(c) = (mismatch(pert) - f) / h;
      }
      state -= jac.colPivHouseholderQr().solve(f);
    }
    // Final polish check.
    ok = ok || mismatch(state).lpNorm<Eigen::Infinity>() < 1e-8;
    res.converged = ok;
  } else {
    res.converged = true;
  }

  auto v = voltages(state);
  res.v = v;
  for (const auto& br : branches) {
    cd adm = 1.0 / cd(br.r, br.x);
    cd i_line = (v[br.from] - v[br.to]) * adm;
    double l = std::norm(i_line);
    res.branch_l.push_back(l);
    res.s_from.push_back(v[br.from] * std::conj(i_line));
    res.total_loss += br.r * l;
  }
  return res;
}

}  // namespace oracle
