#include "dearfed/qeen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dearfed/optim.hpp"

namespace dearfed {

QeenModel::QeenModel(std::vector<LayoutEntry> layout, const QeenConfig& cfg, Rng& rng)
    : layout_(std::move(layout)), cfg_(cfg) {
  std::size_t d = 0;
  for (const auto& e : layout_) d += e.size();
  if (d == 0) throw std::invalid_argument("QEEN needs a non-empty forecaster layout");
  in_mean_.assign(d, 0.0);
  in_scale_.assign(d, 1.0);
  encoder_ = Mlp("enc", {d, cfg.enc_hidden, cfg.e_dim}, rng);
  for (std::size_t k = 0; k < layout_.size(); ++k) {
    decoder_.emplace_back("dec." + std::to_string(k), cfg.e_dim, layout_[k].size(), rng);
  }
  quality_ = Mlp("qe", {cfg.e_dim, cfg.qe_hidden, 1}, rng);
}

void QeenModel::fit_input_stats(const std::vector<MarkedModel>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("QEEN corpus is empty");
  const std::size_t d = dim();
  const double n = static_cast<double>(corpus.size());
  std::fill(in_mean_.begin(), in_mean_.end(), 0.0);
  for (const auto& m : corpus) {
    if (m.w.size() != d) throw ShapeError("QEEN corpus model has " + std::to_string(m.w.size()) + " values, expected " + std::to_string(d));
    for (std::size_t j = 0; j < d; ++j) in_mean_[j] += m.w[j];
  }
  for (double& v : in_mean_) v /= n;
  std::vector<double> sd(d, 0.0);
  for (const auto& m : corpus) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (m.w[j] - in_mean_[j]) * (m.w[j] - in_mean_[j]);
  }
  for (double& v : sd) v = std::sqrt(v / n);
  // Floor tiny spreads so near-constant coordinates do not blow up.
  std::vector<double> sorted = sd;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(d / 2), sorted.end());
  const double floor = std::max(0.1 * sorted[d / 2], 1e-8);
  for (std::size_t j = 0; j < d; ++j) in_scale_[j] = std::max(sd[j], floor);
}

Tensor QeenModel::standardize(const std::vector<const std::vector<double>*>& ws) const {
  const std::size_t d = dim();
  Tensor x = Tensor::zeros(ws.size(), d);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (ws[i]->size() != d) {
      throw ShapeError("QEEN expects " + std::to_string(d) + " parameters, got " + std::to_string(ws[i]->size()));
    }
    double* row = x.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) row[j] = ((*ws[i])[j] - in_mean_[j]) / in_scale_[j];
  }
  return x;
}

Var QeenModel::encode(Graph& g, Var x_std) { return encoder_.forward(g, x_std); }

Var QeenModel::decode(Graph& g, Var e) {
  std::vector<Var> parts;
  parts.reserve(decoder_.size());
  for (auto& head : decoder_) parts.push_back(head.forward(g, e));
  return g.concat_cols(parts);
}

Var QeenModel::quality(Graph& g, Var e) { return g.sigmoid(quality_.forward(g, e)); }

std::vector<double> QeenModel::encode(std::span<const double> w) {
  const std::vector<double> copy(w.begin(), w.end());
  Graph g;
  Var e = encode(g, g.constant(standardize({&copy})));
  return g.value(e).storage();
}

std::vector<double> QeenModel::decode(std::span<const double> e) {
  if (e.size() != cfg_.e_dim) throw ShapeError("QEEN decode expects an embedding of length " + std::to_string(cfg_.e_dim));
  Graph g;
  Var out = decode(g, g.constant(Tensor::row({e.begin(), e.end()})));
  std::vector<double> w = g.value(out).storage();
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = in_mean_[j] + in_scale_[j] * w[j];
  return w;
}

double QeenModel::quality(std::span<const double> e) {
  if (e.size() != cfg_.e_dim) throw ShapeError("QEEN quality expects an embedding of length " + std::to_string(cfg_.e_dim));
  Graph g;
  return g.scalar(quality(g, g.constant(Tensor::row({e.begin(), e.end()}))));
}

QualityReport QeenModel::report(std::span<const double> w) {
  QualityReport r;
  r.embedding = encode(w);
  r.mark = quality(r.embedding);
  return r;
}

ParamList QeenModel::encoder_params() {
  ParamList out;
  encoder_.collect(out);
  return out;
}

ParamList QeenModel::decoder_params() {
  ParamList out;
  for (auto& h : decoder_) h.collect(out);
  return out;
}

ParamList QeenModel::quality_params() {
  ParamList out;
  quality_.collect(out);
  return out;
}

ParamList QeenModel::params() {
  ParamList out = encoder_params();
  for (auto* p : decoder_params()) out.push_back(p);
  for (auto* p : quality_params()) out.push_back(p);
  return out;
}

ModelParams QeenModel::to_params() const {
  auto* self = const_cast<QeenModel*>(this);
  ModelParams stats;
  stats.layout.push_back({"qeen/input.mean", 0, {dim()}});
  stats.layout.push_back({"qeen/input.scale", dim(), {dim()}});
  stats.values = in_mean_;
  stats.values.insert(stats.values.end(), in_scale_.begin(), in_scale_.end());
  return concat_params({stats, ModelParams::from(self->params(), "qeen/")});
}

void QeenModel::from_params(const ModelParams& all) {
  const ModelParams p = extract_role(all, "qeen");
  if (p.layout.size() < 2 || p.layout[0].name != "qeen/input.mean" || p.layout[1].name != "qeen/input.scale" ||
      p.layout[0].size() != dim()) {
    throw ShapeError("QEEN container does not match a forecaster of dimension " + std::to_string(dim()));
  }
  in_mean_.assign(p.values.begin(), p.values.begin() + static_cast<std::ptrdiff_t>(dim()));
  in_scale_.assign(p.values.begin() + static_cast<std::ptrdiff_t>(dim()),
                   p.values.begin() + static_cast<std::ptrdiff_t>(2 * dim()));
  ModelParams rest;
  for (std::size_t i = 2; i < p.layout.size(); ++i) {
    const auto& e = p.layout[i];
    rest.layout.push_back({e.name, rest.values.size(), e.shape});
    rest.values.insert(rest.values.end(), p.values.begin() + static_cast<std::ptrdiff_t>(e.offset),
                       p.values.begin() + static_cast<std::ptrdiff_t>(e.offset + e.size()));
  }
  rest.assign_to(params());
}

namespace {

struct BatchLoss {
  Var joint, recon, mark;
  bool has_mark = false;
};

BatchLoss build_loss(Graph& g, QeenModel& q, const std::vector<const MarkedModel*>& batch) {
  std::vector<const std::vector<double>*> ws;
  Tensor marks = Tensor::zeros(batch.size(), 1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ws.push_back(&batch[i]->w);
    marks[i] = batch[i]->mark;
  }
  Var x = g.constant(q.standardize(ws));
  Var e = q.encode(g, x);
  BatchLoss out;
  out.recon = g.mse(q.decode(g, e), x);
  const auto& cfg = q.config();
  out.joint = g.scale(out.recon, cfg.lambda1);
  if (cfg.lambda2 > 0.0) {
    out.mark = g.mse(q.quality(g, e), g.constant(std::move(marks)));
    out.joint = g.add(out.joint, g.scale(out.mark, cfg.lambda2));
    out.has_mark = true;
  }
  return out;
}

}  // namespace

std::vector<QeenEpoch> train_qeen(QeenModel& qeen, const std::vector<MarkedModel>& corpus, Rng& rng, bool keep_stats) {
  if (corpus.empty()) throw std::invalid_argument("train_qeen: corpus is empty");
  const auto& cfg = qeen.config();
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0) throw std::invalid_argument("train_qeen: loss weights must be >= 0");
  if (!keep_stats) qeen.fit_input_stats(corpus);
  ParamList trainable = qeen.encoder_params();
  for (auto* p : qeen.decoder_params()) trainable.push_back(p);
  if (cfg.lambda2 > 0.0) {
    for (auto* p : qeen.quality_params()) trainable.push_back(p);
  }
  AdamState adam(total_size(trainable), cfg.lr);
  std::vector<std::size_t> order(corpus.size());
  std::vector<QeenEpoch> history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    QeenEpoch sums;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), s + cfg.batch_size);
      std::vector<const MarkedModel*> batch;
      for (std::size_t i = s; i < e; ++i) batch.push_back(&corpus[order[i]]);
      Graph g;
      const BatchLoss l = build_loss(g, qeen, batch);
      const double n = static_cast<double>(batch.size());
      sums.joint += g.scalar(l.joint) * n;
      sums.recon += g.scalar(l.recon) * n;
      if (l.has_mark) sums.mark += g.scalar(l.mark) * n;
      zero_grads(trainable);
      g.backward(l.joint);
      clip_grad_norm(trainable, cfg.clip_norm);
      adam_step(adam, trainable);
    }
    const double n = static_cast<double>(corpus.size());
    history.push_back({sums.joint / n, sums.recon / n, sums.mark / n});
  }
  return history;
}

QeenEpoch evaluate_qeen(QeenModel& qeen, const std::vector<MarkedModel>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("evaluate_qeen: corpus is empty");
  QeenEpoch sums;
  const std::size_t chunk = 64;
  for (std::size_t s = 0; s < corpus.size(); s += chunk) {
    std::vector<const MarkedModel*> batch;
    for (std::size_t i = s; i < std::min(corpus.size(), s + chunk); ++i) batch.push_back(&corpus[i]);
    Graph g;
    const BatchLoss l = build_loss(g, qeen, batch);
    const double n = static_cast<double>(batch.size());
    sums.joint += g.scalar(l.joint) * n;
    sums.recon += g.scalar(l.recon) * n;
    if (l.has_mark) sums.mark += g.scalar(l.mark) * n;
  }
  const double n = static_cast<double>(corpus.size());
  return {sums.joint / n, sums.recon / n, sums.mark / n};
}

std::vector<double> normalize_marks(std::span<const double> marks) {
  if (marks.empty()) throw std::invalid_argument("normalize_marks: K must be >= 1");
  std::vector<double> g(marks.size());
  double total = 0.0;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    g[i] = std::clamp(1.0 - marks[i], 0.0, 1.0);
    total += g[i];
  }
  if (!(total > 0.0)) return std::vector<double>(marks.size(), 1.0 / static_cast<double>(marks.size()));
  for (double& v : g) v /= total;
  return g;
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
  double pos = 0, neg = 0, wins = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    pos += 1;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  for (bool l : labels) neg += l ? 0 : 1;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: need both classes");
  return wins / (pos * neg);
}

}  // namespace dearfed
