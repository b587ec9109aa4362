#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dearfed/forecast.hpp"
#include "dearfed/timeutil.hpp"

using namespace dearfed;

namespace {

LoadDataset hourly(std::vector<double> loads, HourStamp start = make_day(2019, 4, 8) * 24) {
  LoadDataset d;
  d.client_id = "c";
  for (std::size_t i = 0; i < loads.size(); ++i) d.hours.push_back(start + static_cast<HourStamp>(i));
  d.loads = std::move(loads);
  return d;
}

LoadDataset daily_wave(std::size_t hours, double base = 50.0, double amp = 10.0) {
  std::vector<double> v(hours);
  for (std::size_t i = 0; i < hours; ++i) v[i] = base + amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 24.0);
  return hourly(v);
}

std::vector<const FeatureWindow*> ptrs(const WindowSet& ws) {
  std::vector<const FeatureWindow*> out;
  for (const auto& w : ws) out.push_back(&w);
  return out;
}

}  // namespace

TEST_CASE("window counting") {
  const WindowingConfig cfg{24, 1};
  CHECK(build_windows(daily_wave(25), cfg).size() == 1);
  for (std::size_t T : {24u, 30u, 71u}) {
    for (std::size_t ahead : {1u, 2u, 5u}) {
      const auto ws = build_windows(daily_wave(T + 1), WindowingConfig{24, ahead});
      CHECK(ws.size() == (T - 24) / ahead + 1);
    }
  }
  CHECK_THROWS_AS(build_windows(daily_wave(24), cfg), std::invalid_argument);
}

TEST_CASE("window targets and channel ranges") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(1.0, 500.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(60 + trial);
    for (double& x : v) x = u(rng);
    const LoadDataset d = hourly(v, make_day(2019, 12, 20) * 24 + trial);
    const auto ws = build_windows(d, WindowingConfig{24, 1});
    for (std::size_t i = 0; i < ws.size(); ++i) {
      const auto& w = ws[i];
      REQUIRE(w.steps() == 24);
      CHECK(w.target_kw == d.loads[24 + i]);
      for (std::size_t s = 0; s < w.steps(); ++s) {
        CHECK(w.at(s, 0) >= 0.0);
        CHECK(w.at(s, 0) <= 1.0);
        CHECK(w.at(s, 1) >= 0.0);
        CHECK(w.at(s, 1) <= 1.0);
        CHECK(std::abs(w.at(s, 2)) <= 1.0);
        CHECK(std::abs(w.at(s, 3)) <= 1.0);
        CHECK((w.at(s, 4) == 0.0 || w.at(s, 4) == 1.0));
      }
    }
  }
}

TEST_CASE("monday encodes as sin 0, cos 1") {
  const auto ws = build_windows(daily_wave(25), WindowingConfig{24, 1});
  for (std::size_t s = 0; s < 24; ++s) {
    CHECK(ws[0].at(s, 2) == 0.0);
    CHECK(ws[0].at(s, 3) == 1.0);
  }
}

TEST_CASE("holiday channel marks listed days") {
  LoadDataset d = daily_wave(48);
  d.holidays = {make_day(2019, 4, 9)};
  const auto ws = build_windows(d, WindowingConfig{24, 1});
  REQUIRE(ws.size() == 24);
  // The last window covers hours 23..46: hour 23 is Monday, the rest Tuesday.
  CHECK(ws.back().at(0, 4) == 0.0);
  CHECK(ws.back().at(1, 4) == 1.0);
}

TEST_CASE("constant series normalizes to the midpoint") {
  const auto ws = build_windows(hourly(std::vector<double>(30, 42.0)), WindowingConfig{24, 1});
  for (const auto& w : ws) {
    for (std::size_t s = 0; s < w.steps(); ++s) CHECK(w.at(s, 0) == 0.5);
  }
}

TEST_CASE("gaps are reported with the missing hours") {
  LoadDataset d = daily_wave(30);
  d.hours.erase(d.hours.begin() + 10);
  d.loads.erase(d.loads.begin() + 10);
  CHECK_THROWS_WITH(build_windows(d, WindowingConfig{24, 1}), doctest::Contains("2019-04-08T10:00:00Z"));
}

TEST_CASE("test windows use the frozen training scaler") {
  const LoadDataset all = daily_wave(72);
  const LoadDataset train = all.slice(0, 48), test = all.slice(48, 72);
  const Scaler sc = Scaler::fit(train.loads);
  const auto ws = build_windows_after(train, test, WindowingConfig{24, 1}, sc);
  REQUIRE(ws.size() == 24);
  CHECK(ws.front().target_kw == all.loads[48]);
  CHECK(ws.front().scale_min == sc.min);
  CHECK(ws.front().scale_max == sc.max);
}

TEST_CASE("flatten and unflatten round-trip") {
  Rng rng(5);
  ForecastModel a(7, rng), b(7, rng);
  const ModelParams p = a.flatten();
  CHECK(p.dim() == a.dim());
  b.unflatten(p);
  CHECK(b.flatten().values == p.values);
  std::size_t total = 0;
  for (const auto& e : ForecastModel::layout_for(7)) total += e.size();
  CHECK(total == a.dim());
}

TEST_CASE("zero head predicts the normalization midpoint") {
  Rng rng(2);
  ForecastModel m(8, rng);
  m.head_w.value.fill(0.0);
  m.head_b.value.fill(0.0);
  const auto ws = build_windows(daily_wave(30, 50.0, 10.0), WindowingConfig{24, 1});
  for (const auto& w : ws) CHECK(predict(m, w) == w.denormalize(0.0));
  CHECK(predict(m, ws[0]) == doctest::Approx(40.0).epsilon(1e-3));
}

TEST_CASE("predict is deterministic and checks shapes") {
  Rng rng(2);
  ForecastModel m(8, rng);
  const auto ws = build_windows(daily_wave(30), WindowingConfig{24, 1});
  CHECK(predict(m, ws[2]) == predict(m, ws[2]));
  FeatureWindow bad = ws[0];
  bad.x.resize(bad.x.size() - 1);
  CHECK_THROWS_AS(predict(m, bad), ShapeError);
}

TEST_CASE("zero epochs leaves the model untouched") {
  Rng rng(4);
  ForecastModel m(8, rng);
  const auto before = m.flatten().values;
  const auto ws = build_windows(daily_wave(60), WindowingConfig{24, 1});
  Rng t(1);
  const auto r = train_local(m, ws, LocalTrainConfig{0, 1e-3, 16, 5.0}, t);
  CHECK(m.flatten().values == before);
  CHECK(r.steps == 0);
  CHECK(r.loss == eval_loss(m, ws));
}

TEST_CASE("one epoch at lr 1e-4 does not increase loss on easy data") {
  Rng rng(4);
  ForecastModel m(8, rng);
  std::vector<double> v(120);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 10.0 + static_cast<double>(i);
  const auto ws = build_windows(hourly(v), WindowingConfig{24, 1});
  const double before = eval_loss(m, ws);
  Rng t(1);
  train_local(m, ws, LocalTrainConfig{1, 1e-4, 16, 5.0}, t);
  CHECK(eval_loss(m, ws) <= before);
}

TEST_CASE("local training is deterministic") {
  const auto ws = build_windows(daily_wave(80), WindowingConfig{24, 1});
  auto run = [&] {
    Rng init(9);
    ForecastModel m(8, init);
    Rng t(11);
    train_local(m, ws, LocalTrainConfig{2, 1e-3, 8, 5.0}, t);
    return m.flatten().values;
  };
  CHECK(run() == run());
}

TEST_CASE("trained model forecasts a periodic series within 5%") {
  const LoadDataset all = daily_wave(24 * 21, 50.0, 15.0);
  const LoadDataset train = all.slice(0, 24 * 14), test = all.slice(24 * 14, all.size());
  const Scaler sc = Scaler::fit(train.loads);
  const WindowingConfig cfg{24, 1};
  const auto tr = build_windows(train, cfg, sc);
  const auto te = build_windows_after(train, test, cfg, sc);
  Rng init(1);
  ForecastModel m(16, init);
  Rng t(2);
  train_local(m, tr, LocalTrainConfig{30, 5e-3, 16, 5.0}, t);
  const double err = mape(targets_kw(te), predict_all(m, te));
  CHECK(err < 5.0);
}

TEST_CASE("mape and rmse examples") {
  const std::vector<double> y{100.0, 200.0}, yh{110.0, 180.0};
  CHECK(mape(y, y) == 0.0);
  CHECK(mape(y, yh) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(rmse(y, y) == 0.0);
  CHECK(rmse(std::vector<double>{1.0, 1.0}, std::vector<double>{2.0, 2.0}) == 1.0);
  CHECK_THROWS_AS(mape(std::vector<double>{0.0}, std::vector<double>{1.0}), std::domain_error);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(mape(y, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("metric properties") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(1.0, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> y(10), yh(10);
    for (std::size_t i = 0; i < 10; ++i) {
      y[i] = u(rng);
      yh[i] = u(rng);
    }
    CHECK(mape(y, yh) > 0.0);
    CHECK(rmse(y, yh) > 0.0);
    const double c = u(rng);
    std::vector<double> cy(y), cyh(yh);
    for (std::size_t i = 0; i < 10; ++i) {
      cy[i] *= c;
      cyh[i] *= c;
    }
    CHECK(rmse(cy, cyh) == doctest::Approx(c * rmse(y, yh)).epsilon(1e-12));
  }
}

TEST_CASE("batched forward matches single-window predictions") {
  Rng rng(6);
  ForecastModel m(8, rng);
  const auto ws = build_windows(daily_wave(40), WindowingConfig{24, 1});
  const auto batch = m.predict_norm(ptrs(ws));
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const FeatureWindow* one[] = {&ws[i]};
    CHECK(m.predict_norm(one)[0] == doctest::Approx(batch[i]).epsilon(1e-12));
  }
}
