#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dearfed/timeutil.hpp"

namespace dearfed {

/// One client's hourly load series.
struct LoadDataset {
  std::string client_id;
  std::vector<HourStamp> hours;
  std::vector<double> loads;      // kW, > 0
  std::vector<DayStamp> holidays;  // sorted
  int archetype = -1;              // generator label, -1 when unknown

  std::size_t size() const { return loads.size(); }
  bool is_holiday(DayStamp d) const;
  /// Throws std::invalid_argument on gaps, non-increasing hours or loads <= 0.
  void validate() const;
  /// Rows [begin, end) with the same calendar.
  LoadDataset slice(std::size_t begin, std::size_t end) const;
};

enum class Archetype { Residential = 0, Commercial = 1, Industrial = 2 };

struct FleetSpec {
  std::size_t n_clients = 20;
  std::size_t span_days = 21;
  HourStamp start = 0;  // 0 means the default start, 2019-04-08T00Z
  double base_kw = 100.0;
  double base_spread = 0.3;     // per-client base drawn from base * U(1-s, 1+s)
  double daily_amp = 0.3;       // fraction of base
  double weekly_amp = 0.1;      // fraction of base
  double noise_frac = 0.02;     // noise std as a fraction of base
  double holiday_dip = 0.15;    // load reduction on holidays
  double phase_jitter_h = 1.0;  // per-client daily phase jitter, hours
  std::size_t archetypes = 3;
  std::uint64_t seed = 7;

  HourStamp start_hour() const;
};

/// Deterministic synthetic fleet. Client i has archetype i mod archetypes.
std::vector<LoadDataset> generate_fleet(const FleetSpec& spec);

/// Server-side audit clients, one per archetype, drawn from a stream
/// disjoint from the fleet's. They are never assigned to a client.
std::vector<LoadDataset> generate_audit_clients(const FleetSpec& spec);

/// CSV schema: header "client_id,timestamp,load_kw", ISO-8601 UTC hours.
/// Clients keep first-appearance order; rows are sorted by timestamp.
/// If holidays is empty the Finnish calendar over the data span is used.
std::vector<LoadDataset> load_csv(const std::filesystem::path& path,
                                  const std::vector<DayStamp>& holidays = {});
void write_csv(const std::filesystem::path& path, const std::vector<LoadDataset>& fleet);

/// Holiday calendar file: JSON list of "YYYY-MM-DD" strings.
std::vector<DayStamp> load_holidays_json(const std::filesystem::path& path);
void write_holidays_json(const std::filesystem::path& path, const std::vector<DayStamp>& days);

struct KMeansResult {
  std::vector<int> labels;
  std::vector<std::vector<double>> centroids;
  std::vector<double> inertia;  // after every Lloyd iteration
};

/// Mean daily profile (24 values), z-scored. A flat profile maps to zeros.
std::vector<double> daily_profile_feature(const LoadDataset& data);

/// Lloyd's algorithm with k-means++ seeding on daily_profile_feature.
KMeansResult kmeans_cluster(const std::vector<LoadDataset>& datasets, std::size_t k,
                            std::size_t max_iters, std::uint64_t seed);
KMeansResult kmeans_features(const std::vector<std::vector<double>>& features, std::size_t k,
                             std::size_t max_iters, std::uint64_t seed);

struct SeasonSplit {
  std::string season;  // e.g. "2019-spring"
  LoadDataset train;
  LoadDataset test;
};

/// Meteorological seasons (DJF, MAM, JJA, SON). Per season present in the
/// data, the final 7 x 24 hours are test and the rest train.
std::vector<SeasonSplit> seasonal_split(const LoadDataset& data);

}  // namespace dearfed
