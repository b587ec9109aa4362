#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dearfed/data.hpp"
#include "dearfed/forecast.hpp"
#include "dearfed/model_params.hpp"
#include "dearfed/rng.hpp"

namespace dearfed {

enum class DefectKind { None, Dia, CommNoise, Mixed };

std::string to_string(DefectKind k);
DefectKind defect_kind_from_string(const std::string& s);

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

struct DefectSpec {
  DefectKind kind = DefectKind::None;
  double p_m = 0.2;       // fraction of clients that are defective
  double dia_k = 30.0;    // percent of points attacked
  double dia_mu = 30.0;   // percent
  double dia_sigma = 50.0;
  double snr_db = 30.0;   // kNoNoise disables channel noise

  bool has_dia() const { return kind == DefectKind::Dia || kind == DefectKind::Mixed; }
  bool has_noise() const { return kind == DefectKind::CommNoise || kind == DefectKind::Mixed; }
  void validate() const;
};

/// floor(p_m * n) distinct client indices, sorted, drawn once per run.
std::vector<std::size_t> defective_set(std::size_t n, double p_m, Rng& rng);

/// floor(k% * T) distinct points multiplied by (1 + p / 100), p ~ N(mu, sigma^2),
/// clamped to >= 0.01 kW. Other points are untouched.
LoadDataset inject_dia(const LoadDataset& data, double k, double mu, double sigma, Rng& rng);
/// Indices inject_dia would alter, for the same rng state.
std::size_t dia_point_count(std::size_t T, double k);

/// w + w / 10^(snr_db / 10), elementwise. snr_db = +inf leaves w unchanged.
ModelParams inject_comm_noise(const ModelParams& w, double snr_db);
void inject_comm_noise_inplace(std::vector<double>& w, double snr_db);

/// inject_comm_noise(inject_dia(...)) on the same client: returns the attacked
/// data and the noisy parameters.
std::pair<LoadDataset, ModelParams> inject_mixed(const LoadDataset& data, const ModelParams& w,
                                                  const DefectSpec& spec, Rng& rng);

/// Server-side validation windows (never part of any client's training data).
struct ValidationSet {
  WindowSet windows;
  std::vector<double> targets;  // kW, cached

  bool empty() const { return windows.empty(); }
};

/// Last 7 days of each audit client, scaled by its own earlier data.
ValidationSet build_validation_set(const std::vector<LoadDataset>& audit, const WindowingConfig& cfg);

/// MAPE (percent) of a forecaster on D_V; +inf if any prediction is non-finite.
double validation_mape(ForecastModel& model, const ValidationSet& dv);

/// n = 1 - acc with acc = max(0, 1 - MAPE / 100); non-finite predictions give 1.
double defect_mark_from_mape(double mape_percent);
double defect_mark(const ModelParams& w, std::size_t hidden, const ValidationSet& dv);

}  // namespace dearfed
