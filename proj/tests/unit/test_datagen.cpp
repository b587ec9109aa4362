#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "dearfed/data.hpp"
#include "dearfed/timeutil.hpp"

using namespace dearfed;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / "dearfed_unit";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << content;
  return p;
}

std::string csv_rows(const std::string& id, HourStamp start, std::size_t n, std::size_t skip = SIZE_MAX) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == skip) continue;
    s += id + "," + format_iso_hour(start + static_cast<HourStamp>(i)) + "," + std::to_string(10.0 + i) + "\n";
  }
  return s;
}

}  // namespace

TEST_CASE("calendar arithmetic") {
  CHECK(make_day(1970, 1, 1) == 0);
  CHECK(format_iso_date(make_day(2020, 2, 29)) == "2020-02-29");
  CHECK(parse_iso_date("2019-04-08") == make_day(2019, 4, 8));
  CHECK(weekday(make_day(2019, 4, 8)) == 0);
  CHECK(weekday(make_day(2024, 12, 29)) == 6);
  CHECK(format_iso_hour(parse_iso_hour("2019-04-08T05:00:00Z")) == "2019-04-08T05:00:00Z");
  CHECK(parse_iso_hour("2019-04-08 05:00") == parse_iso_hour("2019-04-08T05:00:00"));
  CHECK_THROWS(parse_iso_hour("2019-04-08T05:30:00Z"));
  CHECK(hour_of_day(-1) == 23);
  CHECK(format_iso_date(easter_sunday(2019)) == "2019-04-21");
  CHECK(format_iso_date(easter_sunday(2024)) == "2024-03-31");
  const auto h = finnish_holidays(2019);
  const std::set<DayStamp> hs(h.begin(), h.end());
  CHECK(hs.count(make_day(2019, 12, 6)));
  CHECK(hs.count(make_day(2019, 4, 19)));
  CHECK(hs.count(make_day(2019, 4, 22)));
}

TEST_CASE("flat spec generates a constant series") {
  FleetSpec s;
  s.n_clients = 2;
  s.archetypes = 1;
  s.base_spread = 0.0;
  s.daily_amp = s.weekly_amp = s.noise_frac = s.holiday_dip = 0.0;
  for (const auto& c : generate_fleet(s)) {
    for (double v : c.loads) CHECK(v == doctest::Approx(s.base_kw * 0.6).epsilon(1e-12));
  }
}

TEST_CASE("generation is deterministic and positive") {
  FleetSpec s;
  s.noise_frac = 0.3;
  const auto a = generate_fleet(s), b = generate_fleet(s);
  REQUIRE(a.size() == s.n_clients);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].loads == b[i].loads);
    CHECK(a[i].size() == s.span_days * 24);
    CHECK(a[i].archetype == static_cast<int>(i % s.archetypes));
    CHECK_NOTHROW(a[i].validate());
    for (double v : a[i].loads) CHECK(v > 0.0);
  }
  s.seed += 1;
  CHECK(generate_fleet(s)[0].loads != a[0].loads);
}

TEST_CASE("generated series peak at the 24-hour period") {
  FleetSpec s;
  s.n_clients = 3;
  for (const auto& c : generate_fleet(s)) {
    const std::size_t T = c.size();
    double mean = 0.0;
    for (double v : c.loads) mean += v;
    mean /= static_cast<double>(T);
    std::size_t best = 0;
    double best_power = -1.0;
    for (std::size_t k = 1; k <= T / 2; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(T);
        acc += (c.loads[t] - mean) * std::polar(1.0, ang);
      }
      if (std::norm(acc) > best_power) {
        best_power = std::norm(acc);
        best = k;
      }
    }
    CHECK(static_cast<double>(T) / static_cast<double>(best) == 24.0);
  }
}

TEST_CASE("audit clients are distinct from the fleet") {
  FleetSpec s;
  const auto fleet = generate_fleet(s);
  const auto audit = generate_audit_clients(s);
  REQUIRE(audit.size() == s.archetypes);
  for (const auto& a : audit) {
    for (const auto& c : fleet) CHECK(a.loads != c.loads);
  }
}

TEST_CASE("csv parsing") {
  const std::string header = "client_id,timestamp,load_kw\n";
  const HourStamp start = make_day(2019, 4, 8) * 24;
  CHECK_THROWS_WITH(load_csv(temp_file("empty.csv", "")), doctest::Contains("no data rows"));
  CHECK_THROWS_WITH(load_csv(temp_file("header.csv", header)), doctest::Contains("no data rows"));

  const auto one = load_csv(temp_file("one.csv", header + csv_rows("a", start, 48)));
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == 48);
  CHECK(one[0].client_id == "a");

  CHECK_THROWS_WITH(load_csv(temp_file("gap.csv", header + csv_rows("a", start, 48, 5))),
                    doctest::Contains("2019-04-08T05:00:00Z"));
  CHECK_THROWS_WITH(load_csv(temp_file("col.csv", "client_id,load_kw\na,1\n")), doctest::Contains("timestamp"));
  CHECK_THROWS_WITH(load_csv(temp_file("neg.csv", header + "a,2019-04-08T00:00:00Z,0\n")),
                    doctest::Contains("non-positive"));

  // Rows arrive shuffled and interleaved; clients keep first-appearance order.
  const std::string mixed = header + "b,2019-04-08T01:00:00Z,2\n" + "a,2019-04-08T00:00:00Z,5\n" +
                            "b,2019-04-08T00:00:00Z,1\n";
  const auto m = load_csv(temp_file("mixed.csv", mixed));
  REQUIRE(m.size() == 2);
  CHECK(m[0].client_id == "b");
  CHECK(m[0].loads == std::vector<double>{1.0, 2.0});
}

TEST_CASE("csv round-trip") {
  FleetSpec s;
  s.n_clients = 4;
  const auto fleet = generate_fleet(s);
  const auto dir = std::filesystem::temp_directory_path() / "dearfed_unit";
  std::filesystem::create_directories(dir);
  write_csv(dir / "rt.csv", fleet);
  write_holidays_json(dir / "rt.json", fleet[0].holidays);
  const auto back = load_csv(dir / "rt.csv", load_holidays_json(dir / "rt.json"));
  REQUIRE(back.size() == fleet.size());
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    CHECK(back[i].client_id == fleet[i].client_id);
    CHECK(back[i].hours == fleet[i].hours);
    CHECK(back[i].loads == fleet[i].loads);
    CHECK(back[i].holidays == fleet[i].holidays);
  }
  write_csv(dir / "rt2.csv", back);
  std::ifstream f1(dir / "rt.csv"), f2(dir / "rt2.csv");
  const std::string a((std::istreambuf_iterator<char>(f1)), {}), b((std::istreambuf_iterator<char>(f2)), {});
  CHECK(a == b);
}

TEST_CASE("k-means separates archetypes") {
  FleetSpec s;
  s.n_clients = 12;
  s.archetypes = 2;
  const auto fleet = generate_fleet(s);
  const auto r = kmeans_cluster(fleet, 2, 50, 3);
  // Same-archetype clients share a label and the two labels differ.
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    CHECK(r.labels[i] == r.labels[i % 2]);
  }
  CHECK(r.labels[0] != r.labels[1]);
  // Each label is the nearest final centroid.
  const auto feats = [&] {
    std::vector<std::vector<double>> f;
    for (const auto& d : fleet) f.push_back(daily_profile_feature(d));
    return f;
  }();
  for (std::size_t i = 0; i < feats.size(); ++i) {
    double best = 1e300;
    int arg = -1;
    for (std::size_t c = 0; c < r.centroids.size(); ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < 24; ++j) d += (feats[i][j] - r.centroids[c][j]) * (feats[i][j] - r.centroids[c][j]);
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    CHECK(arg == r.labels[i]);
  }
}

TEST_CASE("k-means inertia never increases") {
  FleetSpec s;
  s.n_clients = 30;
  s.noise_frac = 0.2;
  const auto r = kmeans_cluster(generate_fleet(s), 4, 30, 9);
  for (std::size_t i = 1; i < r.inertia.size(); ++i) CHECK(r.inertia[i] <= r.inertia[i - 1] + 1e-12);
}

TEST_CASE("k-means degenerate and error cases") {
  FleetSpec s;
  s.n_clients = 5;
  s.archetypes = 1;
  s.noise_frac = 0.0;
  s.base_spread = 0.0;
  s.phase_jitter_h = 0.0;
  const auto fleet = generate_fleet(s);
  const auto r = kmeans_cluster(fleet, 2, 10, 1);
  std::set<int> used(r.labels.begin(), r.labels.end());
  CHECK(used.size() == 1);
  CHECK_THROWS(kmeans_cluster(fleet, 0, 10, 1));
  CHECK_THROWS(kmeans_cluster(fleet, 6, 10, 1));
}

TEST_CASE("z-scored profiles are scale invariant") {
  FleetSpec s;
  s.n_clients = 9;
  auto fleet = generate_fleet(s);
  const auto a = kmeans_cluster(fleet, 3, 50, 4);
  for (auto& c : fleet) {
    for (double& v : c.loads) v *= 7.5;
  }
  const auto b = kmeans_cluster(fleet, 3, 50, 4);
  CHECK(a.labels == b.labels);
}

TEST_CASE("seasonal split") {
  LoadDataset d;
  d.client_id = "x";
  const HourStamp start = make_day(2019, 3, 1) * 24;
  for (HourStamp h = 0; h < 92 * 24; ++h) {
    d.hours.push_back(start + h);
    d.loads.push_back(1.0 + static_cast<double>(h));
  }
  const auto parts = seasonal_split(d);
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].season == "2019-spring");
  CHECK(parts[0].train.size() == 85 * 24);
  CHECK(parts[0].test.size() == 7 * 24);
  CHECK(parts[0].train.hours.back() + 1 == parts[0].test.hours.front());
  CHECK(parts[0].train.size() + parts[0].test.size() == d.size());

  // A 90-day season splits 83/7.
  LoadDataset w = d.slice(0, 0);
  const HourStamp dec = make_day(2018, 12, 1) * 24;
  for (HourStamp h = 0; h < 90 * 24; ++h) {
    w.hours.push_back(dec + h);
    w.loads.push_back(2.0);
  }
  const auto wp = seasonal_split(w);
  REQUIRE(wp.size() == 1);
  CHECK(wp[0].train.size() == 83 * 24);

  CHECK_THROWS_WITH(seasonal_split(d.slice(0, 7 * 24)), doctest::Contains("8 days"));
}
