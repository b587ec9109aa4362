#include "dearfed/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dearfed/rng.hpp"

namespace dearfed {

namespace {

struct ArchetypeShape {
  double peak_hour;
  double base_scale;
  double daily_scale;
  double weekly_peak_day;  // weekday with highest load
};

ArchetypeShape shape_of(std::size_t archetype) {
  switch (archetype) {
    case 0: return {19.0, 0.6, 1.0, 5.5};  // residential: evening peak, busier weekends
    case 1: return {13.0, 1.0, 1.2, 2.0};  // commercial: midday peak, quiet weekends
    case 2: return {10.0, 1.5, 0.6, 2.0};  // industrial: flatter working-hours plateau
    default:
      return {std::fmod(19.0 + 7.0 * static_cast<double>(archetype), 24.0), 1.0, 1.0, 2.0};
  }
}

LoadDataset synth_client(const FleetSpec& spec, std::size_t archetype, Rng& rng, std::string id,
                         const std::vector<DayStamp>& holidays) {
  const ArchetypeShape shape = shape_of(archetype);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double base = spec.base_kw * shape.base_scale * (1.0 + spec.base_spread * unit(rng));
  const double peak = shape.peak_hour + spec.phase_jitter_h * unit(rng);
  std::normal_distribution<double> noise(0.0, 1.0);

  LoadDataset ds;
  ds.client_id = std::move(id);
  ds.archetype = static_cast<int>(archetype);
  ds.holidays = holidays;
  const HourStamp start = spec.start_hour();
  const std::size_t hours = spec.span_days * 24;
  ds.hours.reserve(hours);
  ds.loads.reserve(hours);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t t = 0; t < hours; ++t) {
    const HourStamp h = start + static_cast<HourStamp>(t);
    const DayStamp d = day_of(h);
    const double daily = spec.daily_amp * shape.daily_scale *
                         std::sin(two_pi * (hour_of_day(h) - peak + 6.0) / 24.0);
    const double weekly = spec.weekly_amp * std::cos(two_pi * (weekday(d) - shape.weekly_peak_day) / 7.0);
    double load = base * (1.0 + daily + weekly);
    if (ds.is_holiday(d)) load *= 1.0 - spec.holiday_dip;
    if (spec.noise_frac > 0.0) load += spec.noise_frac * base * noise(rng);
    ds.hours.push_back(h);
    ds.loads.push_back(std::max(load, 1.0));
  }
  return ds;
}

std::vector<DayStamp> span_holidays(const FleetSpec& spec) {
  const DayStamp first = day_of(spec.start_hour());
  return finnish_holidays_between(first, first + static_cast<DayStamp>(spec.span_days));
}

std::string season_of(DayStamp d) {
  const unsigned m = month_of(d);
  int y = year_of(d);
  if (m == 12) return std::to_string(y) + "-winter";
  if (m <= 2) return std::to_string(y - 1) + "-winter";
  if (m <= 5) return std::to_string(y) + "-spring";
  if (m <= 8) return std::to_string(y) + "-summer";
  return std::to_string(y) + "-autumn";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

bool LoadDataset::is_holiday(DayStamp d) const {
  return std::binary_search(holidays.begin(), holidays.end(), d);
}

void LoadDataset::validate() const {
  if (hours.size() != loads.size()) throw std::invalid_argument(client_id + ": hours/loads length differ");
  for (std::size_t i = 0; i < loads.size(); ++i) {
    if (!(loads[i] > 0.0)) {
      throw std::invalid_argument(client_id + ": non-positive load at " + format_iso_hour(hours[i]));
    }
    if (i > 0 && hours[i] != hours[i - 1] + 1) {
      if (hours[i] <= hours[i - 1]) {
        throw std::invalid_argument(client_id + ": timestamps not increasing at " + format_iso_hour(hours[i]));
      }
      throw std::invalid_argument(client_id + ": missing timestamp " + format_iso_hour(hours[i - 1] + 1));
    }
  }
}

LoadDataset LoadDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw std::out_of_range("LoadDataset::slice out of range");
  LoadDataset out;
  out.client_id = client_id;
  out.archetype = archetype;
  out.holidays = holidays;
  out.hours.assign(hours.begin() + static_cast<std::ptrdiff_t>(begin), hours.begin() + static_cast<std::ptrdiff_t>(end));
  out.loads.assign(loads.begin() + static_cast<std::ptrdiff_t>(begin), loads.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

HourStamp FleetSpec::start_hour() const { return start != 0 ? start : make_day(2019, 4, 8) * 24; }

std::vector<LoadDataset> generate_fleet(const FleetSpec& spec) {
  if (spec.n_clients < 1) throw std::invalid_argument("fleet needs at least one client");
  if (spec.archetypes < 1) throw std::invalid_argument("fleet needs at least one archetype");
  if (spec.daily_amp + spec.weekly_amp >= 1.0) {
    throw std::invalid_argument("daily_amp + weekly_amp must stay below 1 so loads remain positive");
  }
  const auto holidays = span_holidays(spec);
  std::vector<LoadDataset> fleet;
  fleet.reserve(spec.n_clients);
  for (std::size_t i = 0; i < spec.n_clients; ++i) {
    Rng rng = make_rng(spec.seed, "fleet", {i});
    char id[32];
    std::snprintf(id, sizeof id, "uc%03zu", i);
    fleet.push_back(synth_client(spec, i % spec.archetypes, rng, id, holidays));
  }
  return fleet;
}

std::vector<LoadDataset> generate_audit_clients(const FleetSpec& spec) {
  const auto holidays = span_holidays(spec);
  std::vector<LoadDataset> out;
  for (std::size_t j = 0; j < spec.archetypes; ++j) {
    Rng rng = make_rng(spec.seed, "audit", {j});
    out.push_back(synth_client(spec, j, rng, "audit" + std::to_string(j), holidays));
  }
  return out;
}

std::vector<LoadDataset> load_csv(const std::filesystem::path& path, const std::vector<DayStamp>& holidays) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": no data rows");
  const auto header = split_csv_line(line);
  int c_id = -1, c_ts = -1, c_load = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string h = trim(header[i]);
    if (h == "client_id") c_id = static_cast<int>(i);
    if (h == "timestamp") c_ts = static_cast<int>(i);
    if (h == "load_kw") c_load = static_cast<int>(i);
  }
  for (auto [idx, name] : {std::pair{c_id, "client_id"}, {c_ts, "timestamp"}, {c_load, "load_kw"}}) {
    if (idx < 0) throw std::runtime_error(path.string() + ": missing column '" + name + "'");
  }
  const std::size_t need = static_cast<std::size_t>(std::max({c_id, c_ts, c_load})) + 1;

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<HourStamp, double>>> rows;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = path.string() + " row " + std::to_string(row_no);
    if (cells.size() < need) throw std::runtime_error(where + ": missing column");
    const std::string id = trim(cells[static_cast<std::size_t>(c_id)]);
    HourStamp h;
    try {
      h = parse_iso_hour(trim(cells[static_cast<std::size_t>(c_ts)]));
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    const std::string load_text = trim(cells[static_cast<std::size_t>(c_load)]);
    double load = 0.0;
    auto [p, ec] = std::from_chars(load_text.data(), load_text.data() + load_text.size(), load);
    if (ec != std::errc() || p != load_text.data() + load_text.size()) {
      throw std::runtime_error(where + ": bad load value '" + load_text + "'");
    }
    if (!(load > 0.0)) throw std::runtime_error(where + ": non-positive load " + load_text);
    if (!rows.count(id)) order.push_back(id);
    rows[id].emplace_back(h, load);
  }
  if (order.empty()) throw std::runtime_error(path.string() + ": no data rows");

  std::vector<LoadDataset> out;
  for (const auto& id : order) {
    auto& r = rows[id];
    std::stable_sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    LoadDataset ds;
    ds.client_id = id;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i > 0 && r[i].first == r[i - 1].first) {
        throw std::runtime_error(path.string() + ": client " + id + " has duplicate timestamp " +
                                 format_iso_hour(r[i].first));
      }
      if (i > 0 && r[i].first != r[i - 1].first + 1) {
        throw std::runtime_error(path.string() + ": client " + id + " missing timestamp " +
                                 format_iso_hour(r[i - 1].first + 1));
      }
      ds.hours.push_back(r[i].first);
      ds.loads.push_back(r[i].second);
    }
    ds.holidays = holidays.empty() ? finnish_holidays_between(day_of(ds.hours.front()), day_of(ds.hours.back()))
                                   : holidays;
    std::sort(ds.holidays.begin(), ds.holidays.end());
    out.push_back(std::move(ds));
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<LoadDataset>& fleet) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "client_id,timestamp,load_kw\n";
  char buf[64];
  for (const auto& ds : fleet) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, ds.loads[i]);
      out << ds.client_id << ',' << format_iso_hour(ds.hours[i]) << ',' << std::string_view(buf, static_cast<std::size_t>(p - buf)) << '\n';
    }
  }
}

std::vector<DayStamp> load_holidays_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (!j.is_array()) throw std::runtime_error(path.string() + ": holiday calendar must be a JSON list");
  std::vector<DayStamp> out;
  for (const auto& v : j) out.push_back(parse_iso_date(v.get<std::string>()));
  std::sort(out.begin(), out.end());
  return out;
}

void write_holidays_json(const std::filesystem::path& path, const std::vector<DayStamp>& days) {
  nlohmann::json j = nlohmann::json::array();
  for (DayStamp d : days) j.push_back(format_iso_date(d));
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

std::vector<double> daily_profile_feature(const LoadDataset& data) {
  std::vector<double> sum(24, 0.0), count(24, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int h = hour_of_day(data.hours[i]);
    sum[static_cast<std::size_t>(h)] += data.loads[i];
    count[static_cast<std::size_t>(h)] += 1.0;
  }
  for (std::size_t h = 0; h < 24; ++h) sum[h] = count[h] > 0 ? sum[h] / count[h] : 0.0;
  double mean = 0.0;
  for (double v : sum) mean += v;
  mean /= 24.0;
  double var = 0.0;
  for (double v : sum) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / 24.0);
  for (double& v : sum) v = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? (v - mean) / sd : 0.0;
  return sum;
}

KMeansResult kmeans_features(const std::vector<std::vector<double>>& x, std::size_t k, std::size_t max_iters,
                             std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > x.size()) throw std::invalid_argument("kmeans: k exceeds number of points");
  Rng rng = make_rng(seed, "kmeans");
  KMeansResult res;

  // k-means++ seeding.
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  res.centroids.push_back(x[pick(rng)]);
  std::vector<double> d2(x.size());
  while (res.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : res.centroids) best = std::min(best, sq_dist(x[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t chosen = 0;
    if (total <= 0.0) {
      chosen = pick(rng);  // all points coincide with centroids
    } else {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (chosen = 0; chosen + 1 < x.size(); ++chosen) {
        if (u < d2[chosen]) break;
        u -= d2[chosen];
      }
    }
    res.centroids.push_back(x[chosen]);
  }

  res.labels.assign(x.size(), -1);
  for (std::size_t it = 0; it < std::max<std::size_t>(max_iters, 1); ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      int best = 0;
      double bd = sq_dist(x[i], res.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(x[i], res.centroids[c]);
        if (d < bd) { bd = d; best = static_cast<int>(c); }
      }
      if (res.labels[i] != best) changed = true;
      res.labels[i] = best;
    }
    // Update step; an empty cluster keeps its centroid.
    const std::size_t dim = x[0].size();
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto& s = sums[static_cast<std::size_t>(res.labels[i])];
      for (std::size_t j = 0; j < dim; ++j) s[j] += x[i][j];
      ++counts[static_cast<std::size_t>(res.labels[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) res.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
    double after = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) after += sq_dist(x[i], res.centroids[static_cast<std::size_t>(res.labels[i])]);
    res.inertia.push_back(after);
    if (!changed && it > 0) break;
  }
  return res;
}

KMeansResult kmeans_cluster(const std::vector<LoadDataset>& datasets, std::size_t k, std::size_t max_iters,
                            std::uint64_t seed) {
  std::vector<std::vector<double>> feats;
  feats.reserve(datasets.size());
  for (const auto& d : datasets) feats.push_back(daily_profile_feature(d));
  if (feats.empty()) throw std::invalid_argument("kmeans: no datasets");
  return kmeans_features(feats, k, max_iters, seed);
}

std::vector<SeasonSplit> seasonal_split(const LoadDataset& data) {
  std::vector<SeasonSplit> out;
  std::size_t begin = 0;
  while (begin < data.size()) {
    const std::string season = season_of(day_of(data.hours[begin]));
    std::size_t end = begin;
    while (end < data.size() && season_of(day_of(data.hours[end])) == season) ++end;
    if (end - begin < 8 * 24) {
      throw std::invalid_argument(data.client_id + ": season " + season + " has " + std::to_string(end - begin) +
                                  " hours, need at least 8 days");
    }
    const std::size_t cut = end - 7 * 24;
    out.push_back({season, data.slice(begin, cut), data.slice(cut, end)});
    begin = end;
  }
  if (out.empty()) throw std::invalid_argument(data.client_id + ": empty dataset");
  return out;
}

}  // namespace dearfed
