#include "dearfed/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>

#include "dearfed/nn.hpp"
#include "dearfed/optim.hpp"

namespace dearfed {

void WindowingConfig::validate() const {
  if (l_back < 1) throw std::invalid_argument("l_back must be >= 1");
  if (l_ahead < 1) throw std::invalid_argument("l_ahead must be >= 1");
}

Scaler Scaler::fit(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("Scaler::fit on empty series");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  Scaler s{*lo, *hi};
  if (s.degenerate()) {
    std::cerr << "warning: constant load series, normalized values fixed at 0.5\n";
  }
  return s;
}

WindowSet build_windows(const LoadDataset& data, const WindowingConfig& cfg, const Scaler& scaler) {
  cfg.validate();
  if (data.size() < cfg.l_back + 1) {
    throw std::invalid_argument(data.client_id + ": need at least " + std::to_string(cfg.l_back + 1) +
                                " hourly points, have " + std::to_string(data.size()));
  }
  std::string missing;
  std::size_t gaps = 0;
  for (std::size_t i = 1; i < data.size(); ++i) {
    if (data.hours[i] <= data.hours[i - 1]) {
      throw std::invalid_argument(data.client_id + ": timestamps not increasing at " +
                                  format_iso_hour(data.hours[i]));
    }
    for (HourStamp h = data.hours[i - 1] + 1; h < data.hours[i]; ++h) {
      if (gaps < 10) missing += (gaps ? ", " : "") + format_iso_hour(h);
      ++gaps;
    }
  }
  if (gaps > 0) {
    throw std::invalid_argument(data.client_id + ": " + std::to_string(gaps) + " missing hours: " + missing +
                                (gaps > 10 ? ", ..." : ""));
  }

  // Per-row features, computed once.
  const std::size_t T = data.size();
  std::vector<double> rows(T * kFeatureCount);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t t = 0; t < T; ++t) {
    const HourStamp h = data.hours[t];
    const DayStamp d = day_of(h);
    const double wd = weekday(d);
    double* r = rows.data() + t * kFeatureCount;
    r[0] = std::clamp(scaler.normalize(data.loads[t]), 0.0, 1.0);
    r[1] = hour_of_day(h) / 23.0;
    r[2] = std::sin(two_pi * wd / 7.0);
    r[3] = std::cos(two_pi * wd / 7.0);
    r[4] = data.is_holiday(d) ? 1.0 : 0.0;
  }

  WindowSet out;
  out.reserve((T - 1 - cfg.l_back) / cfg.l_ahead + 1);
  for (std::size_t e = cfg.l_back; e < T; e += cfg.l_ahead) {
    FeatureWindow w;
    w.x.assign(rows.begin() + static_cast<std::ptrdiff_t>((e - cfg.l_back) * kFeatureCount),
               rows.begin() + static_cast<std::ptrdiff_t>(e * kFeatureCount));
    w.target_kw = data.loads[e];
    w.target_norm = scaler.normalize(data.loads[e]);
    w.scale_min = scaler.min;
    w.scale_max = scaler.max;
    out.push_back(std::move(w));
  }
  return out;
}

WindowSet build_windows(const LoadDataset& data, const WindowingConfig& cfg) {
  return build_windows(data, cfg, Scaler::fit(data.loads));
}

WindowSet build_windows_after(const LoadDataset& history, const LoadDataset& data, const WindowingConfig& cfg,
                              const Scaler& scaler) {
  if (history.size() < cfg.l_back) {
    throw std::invalid_argument(data.client_id + ": history shorter than l_back");
  }
  LoadDataset span = history.slice(history.size() - cfg.l_back, history.size());
  span.hours.insert(span.hours.end(), data.hours.begin(), data.hours.end());
  span.loads.insert(span.loads.end(), data.loads.begin(), data.loads.end());
  return build_windows(span, cfg, scaler);
}

ForecastModel::ForecastModel(std::size_t hidden, Rng& rng)
    : w_ih("lstm.w_ih", Tensor::zeros(kFeatureCount, 4 * hidden)),
      w_hh("lstm.w_hh", Tensor::zeros(hidden, 4 * hidden)),
      bias("lstm.bias", Tensor::zeros(1, 4 * hidden)),
      head_w("head.weight", Tensor::zeros(hidden, 1)),
      head_b("head.bias", Tensor::zeros(1, 1)),
      hidden_(hidden) {
  if (hidden < 1) throw std::invalid_argument("LSTM hidden size must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  uniform_init(w_ih.value, bound, rng);
  uniform_init(w_hh.value, bound, rng);
  uniform_init(bias.value, bound, rng);
  uniform_init(head_w.value, bound, rng);
  uniform_init(head_b.value, bound, rng);
}

ParamList ForecastModel::params() { return {&w_ih, &w_hh, &bias, &head_w, &head_b}; }

std::size_t ForecastModel::dim() const {
  const std::size_t h = hidden_;
  return kFeatureCount * 4 * h + h * 4 * h + 4 * h + h + 1;
}

ModelParams ForecastModel::flatten() const {
  auto* self = const_cast<ForecastModel*>(this);
  return ModelParams::from(self->params());
}

void ForecastModel::unflatten(const ModelParams& p) {
  if (p.dim() != dim()) {
    throw ShapeError("forecaster expects " + std::to_string(dim()) + " parameters, got " + std::to_string(p.dim()));
  }
  p.assign_to(params());
}

std::vector<LayoutEntry> ForecastModel::layout_for(std::size_t hidden) {
  Rng rng(0);
  return ForecastModel(hidden, rng).flatten().layout;
}

LstmCellOut lstm_cell(Graph& g, Var x, Var h, Var c, Var w_ih, Var w_hh, Var bias, std::size_t hidden) {
  Var gates = g.add_row(g.add(g.matmul(x, w_ih), g.matmul(h, w_hh)), bias);
  Var i = g.sigmoid(g.slice_cols(gates, 0, hidden));
  Var f = g.sigmoid(g.slice_cols(gates, hidden, 2 * hidden));
  Var gg = g.tanh(g.slice_cols(gates, 2 * hidden, 3 * hidden));
  Var o = g.sigmoid(g.slice_cols(gates, 3 * hidden, 4 * hidden));
  Var c_next = g.add(g.mul(f, c), g.mul(i, gg));
  Var h_next = g.mul(o, g.tanh(c_next));
  return {h_next, c_next};
}

Var ForecastModel::forward(Graph& g, std::span<const FeatureWindow* const> batch) {
  if (batch.empty()) throw ShapeError("forecaster: empty batch");
  const std::size_t steps = batch[0]->steps();
  for (const auto* w : batch) {
    if (w->x.size() != steps * kFeatureCount || w->steps() == 0) {
      throw ShapeError("forecaster: window shape " + std::to_string(w->x.size()) + " values, expected " +
                       std::to_string(steps) + " x " + std::to_string(kFeatureCount));
    }
  }
  const std::size_t B = batch.size();
  const std::size_t H = hidden_;
  Var wi = g.param(w_ih);
  Var wh = g.param(w_hh);
  Var b = g.param(bias);
  Var h{}, c{};
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor xt = Tensor::zeros(B, kFeatureCount);
    for (std::size_t r = 0; r < B; ++r) {
      std::copy_n(batch[r]->x.data() + t * kFeatureCount, kFeatureCount, xt.data() + r * kFeatureCount);
    }
    Var x = g.constant(std::move(xt));
    if (t == 0) {
      // Zero initial state: h W_hh and f * c vanish.
      Var gates = g.add_row(g.matmul(x, wi), b);
      Var i = g.sigmoid(g.slice_cols(gates, 0, H));
      Var gg = g.tanh(g.slice_cols(gates, 2 * H, 3 * H));
      Var o = g.sigmoid(g.slice_cols(gates, 3 * H, 4 * H));
      c = g.mul(i, gg);
      h = g.mul(o, g.tanh(c));
    } else {
      auto next = lstm_cell(g, x, h, c, wi, wh, b, H);
      h = next.h;
      c = next.c;
    }
  }
  return g.add_row(g.matmul(h, g.param(head_w)), g.param(head_b));
}

std::vector<double> ForecastModel::predict_norm(std::span<const FeatureWindow* const> batch) {
  Graph g;
  Var out = forward(g, batch);
  const auto& v = g.value(out).storage();
  return {v.begin(), v.end()};
}

namespace {

Tensor target_tensor(std::span<const FeatureWindow* const> batch) {
  Tensor t = Tensor::zeros(batch.size(), 1);
  for (std::size_t i = 0; i < batch.size(); ++i) t[i] = batch[i]->target_norm;
  return t;
}

constexpr std::size_t kEvalChunk = 256;

}  // namespace

double eval_loss(ForecastModel& model, const WindowSet& windows) {
  if (windows.empty()) throw std::invalid_argument("eval_loss: no windows");
  double total = 0.0;
  for (std::size_t s = 0; s < windows.size(); s += kEvalChunk) {
    const std::size_t e = std::min(windows.size(), s + kEvalChunk);
    std::vector<const FeatureWindow*> batch;
    for (std::size_t i = s; i < e; ++i) batch.push_back(&windows[i]);
    const auto pred = model.predict_norm(batch);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - batch[i]->target_norm;
      total += d * d;
    }
  }
  return total / static_cast<double>(windows.size());
}

TrainResult train_local(ForecastModel& model, const WindowSet& windows, const LocalTrainConfig& cfg, Rng& rng) {
  if (windows.empty()) throw std::invalid_argument("train_local: no windows");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_local: batch_size must be >= 1");
  TrainResult res;
  if (cfg.epochs == 0) {
    res.loss = eval_loss(model, windows);
    if (!std::isfinite(res.loss)) throw TrainingDiverged("train_local: non-finite loss before training");
    return res;
  }
  ParamList params = model.params();
  AdamState adam(total_size(params), cfg.lr);
  std::vector<std::size_t> order(windows.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), s + cfg.batch_size);
      std::vector<const FeatureWindow*> batch;
      batch.reserve(e - s);
      for (std::size_t i = s; i < e; ++i) batch.push_back(&windows[order[i]]);
      Graph g;
      Var pred = model.forward(g, batch);
      Var loss = g.mse(pred, g.constant(target_tensor(batch)));
      const double l = g.scalar(loss);
      if (!std::isfinite(l)) {
        throw TrainingDiverged("train_local: non-finite loss " + std::to_string(l) + " at epoch " +
                               std::to_string(epoch) + ", step " + std::to_string(res.steps));
      }
      zero_grads(params);
      g.backward(loss);
      clip_grad_norm(params, cfg.clip_norm);
      try {
        adam_step(adam, params);
      } catch (const NonFiniteGradient& ex) {
        throw TrainingDiverged(std::string("train_local: ") + ex.what());
      }
      ++res.steps;
      epoch_loss += l * static_cast<double>(batch.size());
    }
    res.loss = epoch_loss / static_cast<double>(windows.size());
  }
  return res;
}

double predict(ForecastModel& model, const FeatureWindow& window) {
  const FeatureWindow* one[] = {&window};
  return window.denormalize(model.predict_norm(one)[0]);
}

std::vector<double> predict_all(ForecastModel& model, const WindowSet& windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (std::size_t s = 0; s < windows.size(); s += kEvalChunk) {
    const std::size_t e = std::min(windows.size(), s + kEvalChunk);
    std::vector<const FeatureWindow*> batch;
    for (std::size_t i = s; i < e; ++i) batch.push_back(&windows[i]);
    const auto pred = model.predict_norm(batch);
    for (std::size_t i = 0; i < pred.size(); ++i) out.push_back(batch[i]->denormalize(pred[i]));
  }
  return out;
}

double mape(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("mape: length mismatch");
  if (y.empty()) throw std::invalid_argument("mape: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) throw std::domain_error("mape: y[" + std::to_string(i) + "] is zero");
    s += std::abs(y[i] - yhat[i]) / std::abs(y[i]);
  }
  return 100.0 * s / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("rmse: length mismatch");
  if (y.empty()) throw std::invalid_argument("rmse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

std::vector<double> targets_kw(const WindowSet& windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.target_kw);
  return out;
}

}  // namespace dearfed
