#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gridopt/errors.hpp"

namespace gridopt {

/// Euclidean projection of (t, u) onto the second-order cone ||u|| <= t.
inline std::pair<double, Eigen::VectorXd> project_soc(double t, const Eigen::VectorXd& u) {
  double nu = u.norm();
  if (nu <= t) return {t, u};
  if (nu <= -t) return {0.0, Eigen::VectorXd::Zero(u.size())};
  double s = 0.5 * (t + nu);
  return {s, (s / nu) * u};
}

/// Frobenius-nearest PSD matrix: symmetrize, clip negative eigenvalues to 0.
inline Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw NumericalError("project_psd: matrix must be square");
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

/// Real symmetric embedding [[X, -Y], [Y, X]] of a complex Hermitian matrix
/// M = X + iY. One real eigen-solver then serves both cones.
inline Eigen::MatrixXd hermitian_embedding(const Eigen::MatrixXcd& m) {
  const auto n = m.rows();
  Eigen::MatrixXd e(2 * n, 2 * n);
  Eigen::MatrixXd x = m.real();
  Eigen::MatrixXd y = m.imag();
  e.topLeftCorner(n, n) = x;
  e.bottomRightCorner(n, n) = x;
  e.topRightCorner(n, n) = -y;
  e.bottomLeftCorner(n, n) = y;
  return e;
}

inline Eigen::MatrixXcd project_psd(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) throw NumericalError("project_psd: matrix must be square");
  Eigen::MatrixXcd herm = 0.5 * (m + m.adjoint());
  const auto n = herm.rows();
  Eigen::MatrixXd proj = project_psd(hermitian_embedding(herm));
  Eigen::MatrixXd x = 0.5 * (proj.topLeftCorner(n, n) + proj.bottomRightCorner(n, n));
  Eigen::MatrixXd y = 0.5 * (proj.bottomLeftCorner(n, n) - proj.topRightCorner(n, n));
  Eigen::MatrixXcd out(n, n);
  out.real() = x;
  out.imag() = y;
  return out;
}

/// Ratio of second-largest to largest eigenvalue of a PSD matrix; 0 for the
/// zero (or 1x1) matrix. Values near 0 certify rank-1 exactness.
inline double rank1_gap(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw NumericalError("rank1_gap: matrix must be square");
  if (m.rows() <= 1) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const auto& lam = eig.eigenvalues();  // ascending
  double l1 = lam(lam.size() - 1);
  double l2 = std::max(lam(lam.size() - 2), 0.0);
  if (l1 <= 0.0) return 0.0;
  return l2 / l1;
}

inline double rank1_gap(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) throw NumericalError("rank1_gap: matrix must be square");
  if (m.rows() <= 1) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (m + m.adjoint()));
  const auto& lam = eig.eigenvalues();
  double l1 = lam(lam.size() - 1);
  double l2 = std::max(lam(lam.size() - 2), 0.0);
  if (l1 <= 0.0) return 0.0;
  return l2 / l1;
}

enum class ConeTag { SOC, PSD };

/// Second-order cone membership over variable indices: vars[0] is the scalar
/// t, the remainder is the vector part u.
struct SocBlock {
  std::vector<int> vars;
};

/// Complex Hermitian PSD membership over packed variable indices. Layout for
/// an n x n block: the n real diagonal entries first, then for each pair
/// i < j (row-major) two entries holding sqrt(2)*Re(M_ij) and
/// sqrt(2)*Im(M_ij). The sqrt(2) scaling makes the packed Euclidean norm
/// equal the Frobenius norm, so clipping eigenvalues is the exact projection
/// in variable space.
struct PsdBlock {
  int n = 0;
  std::vector<int> vars;

  static int packed_size(int n) { return n + n * (n - 1); }

  Eigen::MatrixXcd unpack(const Eigen::VectorXd& values) const {
    Eigen::MatrixXcd m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = values(vars[i]);
    int k = n;
    const double inv_sqrt2 = 0.70710678118654752440;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double re = values(vars[k++]) * inv_sqrt2;
        double im = values(vars[k++]) * inv_sqrt2;
        m(i, j) = {re, im};
        m(j, i) = {re, -im};
      }
    return m;
  }

  void pack(const Eigen::MatrixXcd& m, Eigen::VectorXd& values) const {
    const double sqrt2 = 1.41421356237309504880;
    for (int i = 0; i < n; ++i) values(vars[i]) = m(i, i).real();
    int k = n;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        values(vars[k++]) = sqrt2 * m(i, j).real();
        values(vars[k++]) = sqrt2 * m(i, j).imag();
      }
  }
};

struct EqualityRow {
  std::vector<std::pair<int, double>> terms;
  double rhs = 0.0;
};

/// A linear-objective conic program over named real variable blocks:
///
///   minimize    c'x
///   subject to  A x = b,  lb <= x <= ub,  cone blocks in SOC / PSD.
///
/// Box bounds and cone memberships must not overlap on a coordinate; builders
/// couple them through auxiliary variables and equality rows instead.
class ConicProgram {
 public:
  int add_variables(const std::string& name, int count) {
    if (count < 1) throw NumericalError("variable block '" + name + "' needs count >= 1");
    int start = num_vars_;
    blocks_.emplace_back(name, start, count);
    num_vars_ += count;
    lower_.resize(num_vars_, -std::numeric_limits<double>::infinity());
    upper_.resize(num_vars_, std::numeric_limits<double>::infinity());
    objective_.resize(num_vars_, 0.0);
    in_cone_.resize(num_vars_, 0);
    return start;
  }

  int add_variable(const std::string& name) { return add_variables(name, 1); }

  void add_objective_term(int var, double coeff) {
    check_var(var);
    objective_[var] += coeff;
  }

  void set_bounds(int var, double lo, double hi) {
    check_var(var);
    if (lo > hi) throw NumericalError("box bound with lo > hi on variable " + var_name(var));
    if (in_cone_[var])
      throw NumericalError("variable " + var_name(var) + " is in a cone block and cannot be boxed");
    lower_[var] = lo;
    upper_[var] = hi;
  }

  int add_equality(std::vector<std::pair<int, double>> terms, double rhs) {
    for (const auto& [v, coef] : terms) {
      check_var(v);
      (void)coef;
    }
    rows_.push_back({std::move(terms), rhs});
    return static_cast<int>(rows_.size()) - 1;
  }

  void add_soc(std::vector<int> vars) {
    if (vars.empty()) throw NumericalError("SOC block needs at least the scalar t");
    for (int v : vars) mark_cone(v);
    socs_.push_back({std::move(vars)});
  }

  void add_psd(int n, std::vector<int> vars) {
    if (static_cast<int>(vars.size()) != PsdBlock::packed_size(n))
      throw NumericalError("PSD block of order " + std::to_string(n) + " needs " +
                           std::to_string(PsdBlock::packed_size(n)) + " packed variables");
    for (int v : vars) mark_cone(v);
    psds_.push_back({n, std::move(vars)});
  }

  int num_vars() const { return num_vars_; }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<EqualityRow>& rows() const { return rows_; }
  const std::vector<double>& objective() const { return objective_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<SocBlock>& soc_blocks() const { return socs_; }
  const std::vector<PsdBlock>& psd_blocks() const { return psds_; }

  std::string var_name(int var) const {
    for (const auto& [name, start, count] : blocks_)
      if (var >= start && var < start + count)
        return count == 1 ? name : name + "[" + std::to_string(var - start) + "]";
    return "v" + std::to_string(var);
  }

  /// Start index of a named block, or -1.
  int find_block(const std::string& name) const {
    for (const auto& [bname, start, count] : blocks_)
      if (bname == name) return start;
    return -1;
  }

 private:
  void check_var(int var) const {
    if (var < 0 || var >= num_vars_)
      throw NumericalError("variable index " + std::to_string(var) + " out of range");
  }

  void mark_cone(int v) {
    check_var(v);
    if (in_cone_[v])
      throw NumericalError("variable " + var_name(v) + " assigned to two cone blocks");
    if (std::isfinite(lower_[v]) || std::isfinite(upper_[v]))
      throw NumericalError("variable " + var_name(v) + " is boxed and in a cone block");
    in_cone_[v] = 1;
  }

  int num_vars_ = 0;
  std::vector<std::tuple<std::string, int, int>> blocks_;
  std::vector<double> objective_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<EqualityRow> rows_;
  std::vector<SocBlock> socs_;
  std::vector<PsdBlock> psds_;
  std::vector<char> in_cone_;
};

}  // namespace gridopt
