#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dearfed/autodiff.hpp"
#include "dearfed/data.hpp"
#include "dearfed/model_params.hpp"
#include "dearfed/rng.hpp"

namespace dearfed {

inline constexpr std::size_t kFeatureCount = 5;

struct WindowingConfig {
  std::size_t l_back = 24;  // hourly steps per window
  std::size_t l_ahead = 1;  // hours between window starts

  void validate() const;
};

/// Min-max scaler for one client's loads, fitted on its training split.
struct Scaler {
  double min = 0.0;
  double max = 1.0;

  static Scaler fit(std::span<const double> values);
  bool degenerate() const { return !(max > min); }
  /// Degenerate range maps to 0.5.
  double normalize(double x) const { return degenerate() ? 0.5 : (x - min) / (max - min); }
  double denormalize(double y) const { return min + y * (max - min); }
};

/// One sliding window: l_back rows of (P~, I~, Dsin, Dcos, H~).
struct FeatureWindow {
  std::vector<double> x;  // row-major, l_back x 5
  double target_kw = 0.0;
  double target_norm = 0.0;  // target through the same scaler, unclipped
  double scale_min = 0.0;
  double scale_max = 1.0;

  std::size_t steps() const { return x.size() / kFeatureCount; }
  double at(std::size_t step, std::size_t feature) const { return x[step * kFeatureCount + feature]; }
  double denormalize(double y) const { return scale_min + y * (scale_max - scale_min); }
};

using WindowSet = std::vector<FeatureWindow>;

/// Windows end at indices l_back, l_back + l_ahead, ... <= T; the window ending
/// at e covers rows [e - l_back, e) and targets the load at e. P~ is clipped
/// to [0, 1]; I~ is hour-of-day / 23. Throws on gaps, listing the missing hours.
WindowSet build_windows(const LoadDataset& data, const WindowingConfig& cfg, const Scaler& scaler);
/// Scaler fitted on data itself.
WindowSet build_windows(const LoadDataset& data, const WindowingConfig& cfg);
/// Windows whose targets all lie in `data`, using the last l_back hours of
/// `history` (which must end right before data starts) as leading context.
WindowSet build_windows_after(const LoadDataset& history, const LoadDataset& data, const WindowingConfig& cfg,
                              const Scaler& scaler);

/// Single-layer LSTM (input 5, gates i, f, g, o) plus a linear head hidden -> 1.
class ForecastModel {
 public:
  ForecastModel(std::size_t hidden, Rng& rng);

  std::size_t hidden() const { return hidden_; }
  ParamList params();
  std::size_t dim() const;

  ModelParams flatten() const;
  void unflatten(const ModelParams& p);
  /// Layout every forecaster of this hidden size shares.
  static std::vector<LayoutEntry> layout_for(std::size_t hidden);

  /// Normalized predictions for a batch (B x 1).
  Var forward(Graph& g, std::span<const FeatureWindow* const> batch);
  /// Same, without the caller managing a graph.
  std::vector<double> predict_norm(std::span<const FeatureWindow* const> batch);

  Parameter w_ih;  // 5 x 4H
  Parameter w_hh;  // H x 4H
  Parameter bias;  // 1 x 4H
  Parameter head_w;  // H x 1
  Parameter head_b;  // 1 x 1

 private:
  std::size_t hidden_;
};

/// Single-step LSTM cell on explicit tensors, used for gradient checks.
struct LstmCellOut {
  Var h;
  Var c;
};
LstmCellOut lstm_cell(Graph& g, Var x, Var h, Var c, Var w_ih, Var w_hh, Var bias, std::size_t hidden);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LocalTrainConfig {
  std::size_t epochs = 1;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  double clip_norm = 5.0;  // <= 0 disables
};

struct TrainResult {
  double loss = 0.0;  // mean MSE (normalized units) over the last epoch
  std::size_t steps = 0;
};

/// Adam on the windows' MSE with fresh optimizer state. Minibatch order is
/// shuffled per epoch from rng. With 0 epochs the loss is evaluated and the
/// model untouched. Throws TrainingDiverged on a non-finite loss.
TrainResult train_local(ForecastModel& model, const WindowSet& windows, const LocalTrainConfig& cfg, Rng& rng);

/// Mean MSE in normalized units, no update.
double eval_loss(ForecastModel& model, const WindowSet& windows);

/// Next-hour demand in kW.
double predict(ForecastModel& model, const FeatureWindow& window);
std::vector<double> predict_all(ForecastModel& model, const WindowSet& windows);

/// 100 / N * sum |y - yhat| / |y|. Throws on length mismatch, empty input or y == 0.
double mape(std::span<const double> y, std::span<const double> yhat);
/// sqrt(mean (y - yhat)^2). Throws on length mismatch or empty input.
double rmse(std::span<const double> y, std::span<const double> yhat);

std::vector<double> targets_kw(const WindowSet& windows);

}  // namespace dearfed
