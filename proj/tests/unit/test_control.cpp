#include "followrl/control.hpp"

#include "../support.hpp"
#include "doctest.h"

#include <cmath>
#include <numbers>

using namespace followrl;

namespace {

const ControlNet& trained_net() {
  static const ControlNet cn = [] {
    ControlNet net(1);
    train_control_net(net, collect_reverse_data(PowertrainModel{}, 600, 0.1, 2), ControlConfig{});
    return net;
  }();
  return cn;
}

}  // namespace

TEST_CASE("surrogate powertrain") {
  PowertrainModel m;
  CHECK(powertrain_step(m, 0, 0, 0, 0.1).accel == 0.0);
  CHECK(powertrain_step(m, 0, 1, 10, 0.1).accel == doctest::Approx(-9.18).epsilon(1e-14));
  CHECK(powertrain_step(m, 1, 0, m.v_max, 0.1).accel < 0);
  CHECK(powertrain_step(m, 0, 1, 0.1, 0.1).v_next == 0.0);
  CHECK_THROWS_AS(powertrain_step(m, 1.2, 0, 1, 0.1), ValidationError);
  CHECK_THROWS_AS(powertrain_step(m, 0, 0, -1, 0.1), ValidationError);
  CHECK(max_drive_accel(m, 0) == doctest::Approx(4.0));
  CHECK(max_brake_accel(m, 0) == doctest::Approx(-9.0));
}

TEST_CASE("reverse data collection") {
  PowertrainModel m;
  const auto d = collect_reverse_data(m, 600, 0.1, 3);
  CHECK(d.size() == 6000);
  for (const auto& s : d) {
    CHECK_FALSE((s.throttle > 0 && s.brake > 0));
    const auto re = powertrain_step(m, s.throttle, s.brake, s.v, 0.1);
    CHECK(std::abs(re.accel - s.a) <= 1e-9);
    CHECK(std::abs(re.v_next - s.v_next) <= 1e-9);
  }
  CHECK(collect_reverse_data(m, 600, 0.1, 3) == d);

  PowertrainModel dead = m;
  dead.c_throttle = 0;
  for (const auto& s : collect_reverse_data(dead, 30, 0.1, 4)) {
    CHECK(s.v == 0.0);
    CHECK(s.a <= 0.0);
  }

  testing::TempDir dir("ctl");
  write_control_csv(dir / "c.csv", d);
  CHECK(testing::slurp(dir / "c.csv").rfind("v_next_mps,v_mps,a_mps2,throttle,brake\n", 0) == 0);
  const auto back = read_control_csv(dir / "c.csv");
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); i += 97) CHECK(std::abs(back[i].a - d[i].a) <= 1e-9);
}

TEST_CASE("inverse network") {
  const auto& cn = trained_net();
  PowertrainModel m;
  const auto held_out = collect_reverse_data(m, 200, 0.1, 99);
  // only samples the plant can distinguish: moving, or pressing the throttle
  std::vector<ControlSample> invertible;
  for (const auto& s : held_out) {
    if (s.v > 0.5 && s.v_next > 0) invertible.push_back(s);
  }
  CHECK(control_mse(cn, invertible) < 1e-3);

  for (double v : {3.0, 8.0, 15.0}) {
    const double a = powertrain_step(m, 0.5, 0, v, 0.1).accel;
    const auto p = accel_to_pedals(cn, m, v, a, 0.1);
    CHECK(p.throttle == doctest::Approx(0.5).epsilon(0.1));
    CHECK(p.brake <= 0.05);
    CHECK_FALSE(p.saturated);
  }
  const auto rest = accel_to_pedals(cn, m, 0, 0, 0.1);
  CHECK(rest.throttle < 0.1);
  CHECK(rest.brake < 0.1);
  CHECK(accel_to_pedals(cn, m, 10, 8, 0.1).saturated);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> w(-50, 50);
  for (int i = 0; i < 500; ++i) {
    const auto p = cn.predict(w(rng), w(rng), w(rng));
    CHECK(p[0] >= 0.0);
    CHECK(p[0] <= 1.0);
    CHECK(p[1] >= 0.0);
    CHECK(p[1] <= 1.0);
  }

  // inverse consistency on the invertible regime
  std::uniform_real_distribution<double> V(1, 25), P(0, 1);
  int good = 0;
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    const double v = V(rng);
    const bool drive = i % 2 == 0;
    const double th = drive ? P(rng) : 0.0;
    const double br = drive ? 0.0 : P(rng);
    const auto out = powertrain_step(m, th, br, v, 0.1);
    if (out.v_next <= 0) {
      ++good;
      continue;
    }
    const auto p = accel_to_pedals(cn, m, v, out.accel, 0.1);
    if (std::abs(p.throttle - th) <= 0.05 && std::abs(p.brake - br) <= 0.05) ++good;
  }
  CHECK(good >= 0.95 * n);
}

TEST_CASE("closed-loop tracking") {
  const auto r = track_square_wave(trained_net(), PowertrainModel{}, 5, 2, 4, 40, 0.1);
  CHECK(r.rmse <= 0.3);
  CHECK(r.command.size() == 400);
  CHECK(r.command.front() == 2.0);
  CHECK(r.command[20] == -2.0);
}

TEST_CASE("training is invariant to duplicating the data") {
  const auto d = collect_reverse_data(PowertrainModel{}, 150, 0.1, 5);
  auto twice = d;
  twice.insert(twice.end(), d.begin(), d.end());
  ControlConfig cfg;
  cfg.epochs = 200;
  ControlNet a(3), b(3);
  train_control_net(a, d, cfg);
  train_control_net(b, twice, cfg);
  CHECK(a.net().max_abs_difference(b.net()) <= 1e-9);
  CHECK_THROWS_AS(train_control_net(a, std::vector<ControlSample>(10), cfg), ValidationError);
}

TEST_CASE("control net save and load") {
  testing::TempDir dir("cn");
  trained_net().save(dir / "cn.bin");
  CHECK(std::filesystem::exists(dir / "cn.bin.scaling.json"));
  const auto back = ControlNet::load(dir / "cn.bin");
  CHECK(back.net() == trained_net().net());
  CHECK(back.mean() == trained_net().mean());
  const auto p = back.predict(10.1, 10, 1);
  const auto q = trained_net().predict(10.1, 10, 1);
  CHECK(p == q);
}

TEST_CASE("stanley steering") {
  CHECK(stanley_steering(0, 0, 5, 2.5) == 0.0);
  CHECK(stanley_steering(0, 2, 5, 2.5) == doctest::Approx(std::numbers::pi / 4));
  for (double v = 0.5; v < 30; v += 0.5) {
    for (double d : {-3.0, -0.2, 0.4, 2.0}) {
      const double phi = stanley_steering(0.1, d, v, 2.5);
      CHECK((phi - 0.1 > 0) == (d > 0));
    }
    CHECK(stanley_steering(0, 1, v + 0.5, 2.5) < stanley_steering(0, 1, v, 2.5));
  }
  // low-speed floor keeps the term finite
  CHECK(std::isfinite(stanley_steering(0, 1, 0, 2.5)));
}
