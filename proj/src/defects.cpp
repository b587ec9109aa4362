#include "dearfed/defects.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dearfed {

std::string to_string(DefectKind k) {
  switch (k) {
    case DefectKind::None: return "none";
    case DefectKind::Dia: return "dia";
    case DefectKind::CommNoise: return "comm_noise";
    case DefectKind::Mixed: return "mixed";
  }
  return "none";
}

DefectKind defect_kind_from_string(const std::string& s) {
  if (s == "none") return DefectKind::None;
  if (s == "dia") return DefectKind::Dia;
  if (s == "comm_noise") return DefectKind::CommNoise;
  if (s == "mixed") return DefectKind::Mixed;
  throw std::invalid_argument("unknown defect kind '" + s + "'");
}

void DefectSpec::validate() const {
  if (!(p_m >= 0.0 && p_m <= 1.0)) throw std::invalid_argument("p_m must lie in [0, 1]");
  if (!(dia_k >= 0.0 && dia_k <= 100.0)) throw std::invalid_argument("dia_k must lie in [0, 100]");
  if (!(dia_sigma >= 0.0)) throw std::invalid_argument("dia_sigma must be >= 0");
  if (std::isnan(snr_db)) throw std::invalid_argument("snr_db must not be NaN");
}

std::vector<std::size_t> defective_set(std::size_t n, double p_m, Rng& rng) {
  const auto m = static_cast<std::size_t>(std::floor(p_m * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first m entries are a uniform sample.
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::size_t dia_point_count(std::size_t T, double k) {
  return static_cast<std::size_t>(std::floor(k * static_cast<double>(T) / 100.0 + 1e-9));
}

LoadDataset inject_dia(const LoadDataset& data, double k, double mu, double sigma, Rng& rng) {
  if (!(k >= 0.0 && k <= 100.0)) throw std::invalid_argument("inject_dia: k must lie in [0, 100]");
  LoadDataset out = data;
  const std::size_t T = data.size();
  const std::size_t count = dia_point_count(T, k);
  if (count == 0) return out;
  std::vector<std::size_t> idx(T);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, T - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::normal_distribution<double> pert(mu, sigma);
  for (std::size_t i = 0; i < count; ++i) {
    const double p = sigma > 0.0 ? pert(rng) : mu;
    double& v = out.loads[idx[i]];
    v = std::max(v * (1.0 + p / 100.0), 0.01);
  }
  return out;
}

void inject_comm_noise_inplace(std::vector<double>& w, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return;
  const double ratio = std::pow(10.0, snr_db / 10.0);
  for (double& v : w) v = v + v / ratio;
}

ModelParams inject_comm_noise(const ModelParams& w, double snr_db) {
  ModelParams out = w;
  inject_comm_noise_inplace(out.values, snr_db);
  return out;
}

std::pair<LoadDataset, ModelParams> inject_mixed(const LoadDataset& data, const ModelParams& w,
                                                  const DefectSpec& spec, Rng& rng) {
  if (spec.kind != DefectKind::Mixed) throw std::invalid_argument("inject_mixed needs a mixed defect spec");
  return {inject_dia(data, spec.dia_k, spec.dia_mu, spec.dia_sigma, rng), inject_comm_noise(w, spec.snr_db)};
}

ValidationSet build_validation_set(const std::vector<LoadDataset>& audit, const WindowingConfig& cfg) {
  ValidationSet dv;
  for (const auto& client : audit) {
    for (const auto& season : seasonal_split(client)) {
      auto w = build_windows_after(season.train, season.test, cfg, Scaler::fit(season.train.loads));
      for (auto& x : w) dv.windows.push_back(std::move(x));
    }
  }
  dv.targets = targets_kw(dv.windows);
  if (dv.empty()) throw std::invalid_argument("validation set is empty");
  return dv;
}

double validation_mape(ForecastModel& model, const ValidationSet& dv) {
  if (dv.empty()) throw std::invalid_argument("validation set is empty");
  const auto pred = predict_all(model, dv.windows);
  for (double p : pred) {
    if (!std::isfinite(p)) return std::numeric_limits<double>::infinity();
  }
  return mape(dv.targets, pred);
}

double defect_mark_from_mape(double mape_percent) {
  if (!std::isfinite(mape_percent)) return 1.0;
  const double acc = std::max(0.0, 1.0 - mape_percent / 100.0);
  return std::clamp(1.0 - acc, 0.0, 1.0);
}

double defect_mark(const ModelParams& w, std::size_t hidden, const ValidationSet& dv) {
  Rng unused(0);
  ForecastModel model(hidden, unused);
  model.unflatten(w);
  return defect_mark_from_mape(validation_mape(model, dv));
}

}  // namespace dearfed
