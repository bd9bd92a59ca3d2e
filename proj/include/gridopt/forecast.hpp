#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gridopt/csv.hpp"
#include "gridopt/svr.hpp"
#include "gridopt/tuning.hpp"

namespace gridopt {

struct TimeSeries {
  std::vector<std::string> timestamps;  // ISO-8601, kept as text
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Reads `timestamp,value` CSV.
inline TimeSeries read_time_series(const std::string& path) {
  CsvFile file = read_csv(path);
  if (file.header != std::vector<std::string>{"timestamp", "value"})
    throw ParseError(path + ": expected header 'timestamp,value'");
  TimeSeries ts;
  for (const auto& row : file.rows) {
    if (row.fields.size() != 2)
      throw ParseError(path + ":" + std::to_string(row.line) + ": expected 2 fields");
    ts.timestamps.push_back(row.fields[0]);
    ts.values.push_back(parse_double(row.fields[1], path, row.line));
  }
  return ts;
}

inline void write_time_series(const TimeSeries& ts, const std::string& path) {
  CsvWriter out(path);
  out.row({"timestamp", "value"});
  for (std::size_t i = 0; i < ts.size(); ++i)
    out.row({ts.timestamps[i], format_double(ts.values[i])});
}

/// Lag-window dataset: features are the `window` samples before the origin,
/// the target sits `horizon` steps past the last feature.
inline void make_lag_dataset(const std::vector<double>& series, int window, int horizon,
                             std::vector<std::vector<double>>& x, std::vector<double>& y) {
  if (window < 1 || horizon < 1) throw InputError("window and horizon must be >= 1");
  if (static_cast<int>(series.size()) <= window)
    throw InputError("series shorter than the lag window");
  x.clear();
  y.clear();
  for (int origin = window; origin + horizon - 1 < static_cast<int>(series.size()); ++origin) {
    std::vector<double> lags(series.begin() + (origin - window), series.begin() + origin);
    x.push_back(std::move(lags));
    y.push_back(series[origin + horizon - 1]);
  }
}

struct ForecastRow {
  int origin = 0;        // index of the first forecast step
  int horizon_step = 0;  // steps past the origin (1-based)
  double predicted = 0.0;
  double actual = 0.0;
};

struct ForecastResult {
  std::vector<ForecastRow> rows;

  std::vector<double> predictions() const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.predicted);
    return out;
  }
  std::vector<double> actuals() const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.actual);
    return out;
  }
};

/// Sliding-window evaluation of a trained model: for every admissible origin
/// the previous `window` samples feed the model to predict `horizon` steps
/// ahead. The model must have been trained on lag vectors of the same window
/// and horizon (see train_forecaster).
inline ForecastResult forecast_sliding(const SVRModel& model, const TimeSeries& series,
                                       int horizon, int window) {
  if (static_cast<int>(series.size()) <= window)
    throw InputError("window must be shorter than the series");
  if (horizon < 1) throw InputError("horizon must be >= 1");
  ForecastResult result;
  for (int origin = window; origin + horizon - 1 < static_cast<int>(series.size()); ++origin) {
    std::vector<double> lags(series.values.begin() + (origin - window),
                             series.values.begin() + origin);
    ForecastRow row;
    row.origin = origin;
    row.horizon_step = horizon;
    row.predicted = predict(model, lags);
    row.actual = series.values[origin + horizon - 1];
    result.rows.push_back(row);
  }
  return result;
}

inline void write_forecast(const ForecastResult& result, const TimeSeries& series,
                           const std::string& path) {
  CsvWriter out(path);
  out.row({"origin", "horizon_step", "predicted", "actual"});
  for (const auto& r : result.rows) {
    std::string origin = r.origin < static_cast<int>(series.timestamps.size())
                             ? series.timestamps[r.origin]
                             : std::to_string(r.origin);
    out.row({origin, std::to_string(r.horizon_step), format_double(r.predicted),
             format_double(r.actual)});
  }
}

struct ErrorMetrics {
  double mape_percent = 0.0;
  double nrmse_percent = 0.0;  // RMSE normalized by the actual range
  int skipped_mape_terms = 0;  // zero-actual terms excluded from MAPE
};

inline ErrorMetrics error_metrics(const std::vector<double>& pred,
                                  const std::vector<double>& actual) {
  if (pred.size() != actual.size()) throw InputError("prediction/actual length mismatch");
  if (pred.empty()) throw InputError("empty series");
  ErrorMetrics m;
  double mape_sum = 0.0;
  int mape_terms = 0;
  double sse = 0.0;
  double amin = actual[0], amax = actual[0];
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double err = pred[i] - actual[i];
    sse += err * err;
    amin = std::min(amin, actual[i]);
    amax = std::max(amax, actual[i]);
    if (actual[i] == 0.0) {
      ++m.skipped_mape_terms;
    } else {
      mape_sum += std::abs(err / actual[i]);
      ++mape_terms;
    }
  }
  m.mape_percent = mape_terms > 0 ? mape_sum / mape_terms * 100.0 : 0.0;
  double rmse = std::sqrt(sse / pred.size());
  double range = amax - amin;
  m.nrmse_percent = range > 0.0 ? rmse / range * 100.0 : (rmse == 0.0 ? 0.0 : 100.0);
  return m;
}

/// Scaling wrapper so raw-unit series (hundreds of kW) meet the O(1) feature
/// ranges the default grid assumes. Features and targets are affinely mapped
/// to [0, 1] using the training span; predictions are mapped back.
struct ForecastPipeline {
  SVRModel model;
  double offset = 0.0;
  double scale = 1.0;
  int window = 0;
  int horizon = 0;

  double rescale(double normalized) const { return normalized * scale + offset; }
  double normalize(double raw) const { return (raw - offset) / scale; }
};

inline ForecastPipeline train_forecaster(const std::vector<double>& series, int window,
                                         int horizon, const HyperParams& h) {
  if (static_cast<int>(series.size()) <= window + horizon)
    throw InputError("series too short for the window and horizon");
  double lo = *std::min_element(series.begin(), series.end());
  double hi = *std::max_element(series.begin(), series.end());
  ForecastPipeline pipe;
  pipe.offset = lo;
  pipe.scale = hi > lo ? hi - lo : 1.0;
  pipe.window = window;
  pipe.horizon = horizon;
  std::vector<double> normalized(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) normalized[i] = pipe.normalize(series[i]);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  make_lag_dataset(normalized, window, horizon, x, y);
  pipe.model = train_svr(x, y, h);
  return pipe;
}

inline ForecastResult forecast_sliding(const ForecastPipeline& pipe, const TimeSeries& series,
                                       int horizon, int window) {
  TimeSeries normalized = series;
  for (auto& v : normalized.values) v = pipe.normalize(v);
  ForecastResult result = forecast_sliding(pipe.model, normalized, horizon, window);
  for (auto& row : result.rows) {
    row.predicted = pipe.rescale(row.predicted);
    row.actual = pipe.rescale(row.actual);
  }
  return result;
}

}  // namespace gridopt
