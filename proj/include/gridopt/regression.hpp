#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "gridopt/errors.hpp"

namespace gridopt {

struct RegressionData {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  // columns are explanatory variables
  std::vector<std::string> labels;

  void validate() const {
    if (y.size() == 0 || x.rows() != y.size())
      throw ValidationError("response and explanatory lengths differ");
    if (!y.allFinite() || !x.allFinite())
      throw ValidationError("regression data contains non-finite entries");
    if (!labels.empty() && static_cast<int>(labels.size()) != x.cols())
      throw ValidationError("label count does not match column count");
  }
};

enum class RegressionMethod { OLS, FGLS };

struct RegressionFit {
  Eigen::VectorXd coefficients;  // per explanatory column
  double intercept = 0.0;
  double squared_error = 0.0;    // sum (y - yhat)^2 on the original scale
  RegressionMethod method = RegressionMethod::OLS;
};

inline double predict(const RegressionFit& fit, const Eigen::VectorXd& row) {
  if (row.size() != fit.coefficients.size())
    throw InputError("feature dimension does not match the fit");
  return fit.intercept + fit.coefficients.dot(row);
}

/// Per-column min-max scaling to [0, 1]. Constant columns map to zero and are
/// counted as warnings.
inline RegressionData normalize_minmax(const RegressionData& d, int* constant_columns = nullptr) {
  d.validate();
  RegressionData out = d;
  int warnings = 0;
  auto scale_vec = [&warnings](Eigen::VectorXd v) {
    double lo = v.minCoeff(), hi = v.maxCoeff();
    if (hi > lo)
      v = (v.array() - lo) / (hi - lo);
    else {
      v.setZero();
      ++warnings;
    }
    return v;
  };
  out.y = scale_vec(out.y);
  for (int c = 0; c < out.x.cols(); ++c) out.x.col(c) = scale_vec(out.x.col(c));
  if (constant_columns) *constant_columns = warnings;
  return out;
}

namespace regression_detail {

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  return a;
}

inline RegressionFit weighted_fit(const RegressionData& d, const Eigen::VectorXd& weights,
                                  RegressionMethod method) {
  Eigen::MatrixXd a = with_intercept(d.x);
  Eigen::VectorXd sw = weights.cwiseSqrt();
  Eigen::MatrixXd aw = sw.asDiagonal() * a;
  Eigen::VectorXd yw = sw.asDiagonal() * d.y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aw);
  if (qr.rank() < a.cols())
    throw NumericalError("design matrix is rank deficient (collinear columns)");
  Eigen::VectorXd beta = qr.solve(yw);

  RegressionFit fit;
  fit.method = method;
  fit.intercept = beta(0);
  fit.coefficients = beta.tail(a.cols() - 1);
  Eigen::VectorXd resid = d.y - a * beta;
  fit.squared_error = resid.squaredNorm();
  return fit;
}

}  // namespace regression_detail

/// Ordinary least squares with an intercept.
inline RegressionFit ols_fit(const RegressionData& d) {
  d.validate();
  return regression_detail::weighted_fit(d, Eigen::VectorXd::Ones(d.y.size()),
                                         RegressionMethod::OLS);
}

/// Feasible generalized least squares: OLS residuals feed a log-variance
/// regression on the explanatory columns, whose fitted values become inverse
/// weights for a final weighted solve. The skedastic form is
/// log(resid^2 + floor) linear in X. squared_error stays on the original
/// unweighted scale so the two methods are comparable.
inline RegressionFit fgls_fit(const RegressionData& d) {
  d.validate();
  RegressionFit stage1 = ols_fit(d);
  Eigen::MatrixXd a = regression_detail::with_intercept(d.x);
  Eigen::VectorXd beta1(a.cols());
  beta1(0) = stage1.intercept;
  beta1.tail(d.x.cols()) = stage1.coefficients;
  Eigen::VectorXd resid = d.y - a * beta1;

  // Stage 2: estimate per-observation variance.
  Eigen::VectorXd log_r2 = (resid.array().square() + 1e-12).log();
  RegressionData vard;
  vard.y = log_r2;
  vard.x = d.x;
  RegressionFit varfit = ols_fit(vard);
  Eigen::VectorXd betav(a.cols());
  betav(0) = varfit.intercept;
  betav.tail(d.x.cols()) = varfit.coefficients;
  Eigen::VectorXd log_sigma2 = a * betav;

  // Stage 3: weighted solve with weights 1/sigma_hat^2 (clamped for safety).
  Eigen::VectorXd weights(d.y.size());
  for (int i = 0; i < weights.size(); ++i) {
    double s2 = std::exp(std::clamp(log_sigma2(i), -40.0, 40.0));
    weights(i) = 1.0 / std::max(s2, 1e-12);
  }
  RegressionFit fit = regression_detail::weighted_fit(d, weights, RegressionMethod::FGLS);
  return fit;
}

}  // namespace gridopt
