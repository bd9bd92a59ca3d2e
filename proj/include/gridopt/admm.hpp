#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <functional>
#include <vector>

#include "gridopt/conic.hpp"
#include "gridopt/errors.hpp"

namespace gridopt {

struct ADMMParams {
  double penalty = 1.0;    // ADMM penalty rho (distinct from the renewable share)
  double eps_abs = 1e-4;
  double eps_rel = 1e-3;
  int max_iter = 5000;
  bool adapt_penalty = true;  // residual balancing: x2 / /2 when ratio exceeds 10
  double relaxation = 1.6;    // over-relaxation factor in [1, 2)

  void validate() const {
    if (!(penalty > 0.0)) throw InputError("ADMM penalty must be > 0");
    if (!(eps_abs > 0.0) || !(eps_rel > 0.0)) throw InputError("ADMM tolerances must be > 0");
    if (max_iter < 1) throw InputError("ADMM max_iter must be >= 1");
    if (!(relaxation >= 1.0 && relaxation < 2.0))
      throw InputError("relaxation must be in [1, 2)");
  }
};

/// Iteration snapshot: primal copies, consensus copies, scaled multipliers.
struct ADMMState {
  Eigen::VectorXd x;       // affine-feasible copy (Ax = b holds exactly)
  Eigen::VectorXd z;       // cone/box-feasible copy
  Eigen::VectorXd lambda;  // dual multipliers for x - z = 0
  int iter = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

struct Solution {
  Eigen::VectorXd values;  // the affine-feasible copy x
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  double max_rank1_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

/// Per-iteration observer: (iter, primal residual, dual residual, objective).
using IterationTrace = std::function<void(int, double, double, double)>;

/// Two-block ADMM for a ConicProgram.
///
/// Splitting: f1(x) = c'x + indicator{Ax = b}, f2(z) = indicator{box, cones},
/// coupled by x - z = 0. The x-update is a closed-form projection onto the
/// affine set (one sparse Cholesky factorization of A*A', reused across
/// penalty changes); the z-update applies the separable box clamps and cone
/// projections; the dual update is lambda += rho (x - z). Equality rows are
/// normalized to unit 2-norm on entry.
inline Solution admm_solve(const ConicProgram& prog, const ADMMParams& params,
                           ADMMState* final_state = nullptr,
                           const IterationTrace& trace = {}) {
  params.validate();
  const int n = prog.num_vars();
  const int m = prog.num_rows();
  if (n == 0) throw NumericalError("program has no variables");

  // Row-equilibrated equality system.
  Eigen::SparseMatrix<double> a(m, n);
  Eigen::VectorXd b(m);
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < m; ++i) {
      const auto& row = prog.rows()[i];
      double norm2 = 0.0;
      for (const auto& [v, coef] : row.terms) norm2 += coef * coef;
      double scale = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 1.0;
      for (const auto& [v, coef] : row.terms) trip.emplace_back(i, v, coef * scale);
      b(i) = row.rhs * scale;
    }
    a.setFromTriplets(trip.begin(), trip.end());
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> gram;
  if (m > 0) {
    Eigen::SparseMatrix<double> g = a * Eigen::SparseMatrix<double>(a.transpose());
    Eigen::SparseMatrix<double> eye(m, m);
    eye.setIdentity();
    g += 1e-10 * eye;
    gram.compute(g);
    if (gram.info() != Eigen::Success)
      throw NumericalError("equality system factorization failed");
  }

  Eigen::VectorXd c(n);
  for (int i = 0; i < n; ++i) c(i) = prog.objective()[i];
  const auto& lo = prog.lower();
  const auto& hi = prog.upper();

  auto project_affine = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    if (m == 0) return w;
    Eigen::VectorXd nu = gram.solve(a * w - b);
    return w - a.transpose() * nu;
  };

  double rho = params.penalty;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);  // scaled dual: lambda / rho

  Solution sol;
  double r_norm = 0.0, s_norm = 0.0;
  int iter = 0;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  for (iter = 1; iter <= params.max_iter; ++iter) {
    x = project_affine(z - u - c / rho);

    Eigen::VectorXd z_prev = z;
    // Over-relaxed consensus input.
    Eigen::VectorXd x_hat = params.relaxation * x + (1.0 - params.relaxation) * z_prev;
    z = x_hat + u;
    for (int i = 0; i < n; ++i) {
      if (z(i) < lo[i]) z(i) = lo[i];
      if (z(i) > hi[i]) z(i) = hi[i];
    }
    for (const auto& blk : prog.soc_blocks()) {
      double t = z(blk.vars[0]);
      Eigen::VectorXd vec(blk.vars.size() - 1);
      for (std::size_t k = 1; k < blk.vars.size(); ++k) vec(k - 1) = z(blk.vars[k]);
      auto [tp, vp] = project_soc(t, vec);
      z(blk.vars[0]) = tp;
      for (std::size_t k = 1; k < blk.vars.size(); ++k) z(blk.vars[k]) = vp(k - 1);
    }
    for (const auto& blk : prog.psd_blocks()) {
      Eigen::MatrixXcd mat = blk.unpack(z);
      blk.pack(project_psd(mat), z);
    }

    u += x_hat - z;

    r_norm = (x - z).norm();
    s_norm = rho * (z - z_prev).norm();
    if (!x.allFinite() || !z.allFinite() || !u.allFinite())
      throw DivergenceError("ADMM produced a non-finite iterate", iter);

    double obj = c.dot(x);
    if (trace) trace(iter, r_norm, s_norm, obj);

    double eps_pri = sqrt_n * params.eps_abs +
                     params.eps_rel * std::max(x.norm(), z.norm());
    double eps_dua = sqrt_n * params.eps_abs + params.eps_rel * rho * u.norm();
    if (r_norm <= eps_pri && s_norm <= eps_dua) {
      sol.converged = true;
      break;
    }

    // Residual balancing at a fixed cadence; adapting every iteration breaks
    // the contraction and produces limit cycles.
    if (params.adapt_penalty && iter % 50 == 0) {
      if (r_norm > 10.0 * s_norm && rho < 1e6) {
        rho *= 2.0;
        u *= 0.5;
      } else if (s_norm > 10.0 * r_norm && rho > 1e-6) {
        rho *= 0.5;
        u *= 2.0;
      }
    }
  }
  if (iter > params.max_iter) iter = params.max_iter;

  sol.values = x;
  sol.objective = c.dot(x);
  sol.iterations = iter;
  sol.primal_residual = r_norm;
  sol.dual_residual = s_norm;
  sol.max_rank1_gap = 0.0;
  for (const auto& blk : prog.psd_blocks())
    sol.max_rank1_gap = std::max(sol.max_rank1_gap, rank1_gap(blk.unpack(x)));

  if (final_state) {
    final_state->x = x;
    final_state->z = z;
    final_state->lambda = rho * u;
    final_state->iter = iter;
    final_state->primal_residual = r_norm;
    final_state->dual_residual = s_norm;
  }
  return sol;
}

}  // namespace gridopt
