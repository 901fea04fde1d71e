#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <sstream>

#include "trajpred/data.hpp"
#include "trajpred/sim.hpp"

using namespace trajpred;
using geometry::Pose2;
using sim::SimConfig;
using sim::SimState;

namespace {

data::GenParams quick_gen() {
  data::GenParams p;
  p.point_spacing = 4.0;
  p.sensor_range = 20.0;
  return p;
}

mixture::TrajectoryMixture point_target(double x1, double y1, int T = 20, double dt = 0.1) {
  // K=1 mixture whose mean reaches (x1, y1) at t = 1 s along a line
  mixture::TrajectoryMixture m;
  m.K = 1;
  m.T = T;
  m.dt = dt;
  mixture::MixtureComponent comp;
  comp.weight = 1.0;
  comp.coeffs_x.a = {0, 0, 0, x1};
  comp.coeffs_y.a = {0, 0, 0, y1};
  comp.sigma_x.assign(static_cast<size_t>(T), 1.0);
  comp.sigma_y.assign(static_cast<size_t>(T), 1.0);
  m.components.push_back(std::move(comp));
  return m;
}

}  // namespace

TEST_CASE("bicycle step advances along the heading") {
  const SimConfig cfg;
  const SimState s0{Pose2{0, 0, 0}, 10.0, 0.0};
  const SimState s1 = sim::bicycle_step(s0, 0.0, 0.0, cfg);
  CHECK(s1.pose.x == doctest::Approx(1.0));
  CHECK(s1.pose.y == doctest::Approx(0.0));
  CHECK(s1.pose.yaw == doctest::Approx(0.0));
  CHECK(s1.speed == doctest::Approx(10.0));
}

TEST_CASE("bicycle at rest does not move or turn") {
  const SimConfig cfg;
  const SimState s0{Pose2{3, 4, 0.5}, 0.0, 0.0};
  const SimState s1 = sim::bicycle_step(s0, 0.5, 0.0, cfg);
  CHECK(s1.pose.x == s0.pose.x);
  CHECK(s1.pose.y == s0.pose.y);
  CHECK(s1.pose.yaw == s0.pose.yaw);
}

TEST_CASE("constant steer at constant speed gives a constant yaw rate") {
  const SimConfig cfg;
  const double steer = 0.3;
  const double v = 6.0;
  SimState s{Pose2{}, v, 0.0};
  const double expected = v * std::tan(steer) / cfg.wheelbase * cfg.dt;
  for (int i = 0; i < 20; ++i) {
    const SimState next = sim::bicycle_step(s, steer, 0.0, cfg);
    CHECK(geometry::normalize_angle(next.pose.yaw - s.pose.yaw) == doctest::Approx(expected));
    CHECK(next.speed == doctest::Approx(v));
    s = next;
  }
}

TEST_CASE("controller on a straight-ahead target holds course and speed") {
  const SimConfig cfg;
  const double v = 9.0;
  const SimState state{Pose2{}, v, 0.0};
  const auto c = sim::track_point_controller(point_target(v, 0.0), state, cfg);
  CHECK(c.steer == doctest::Approx(0.0));
  CHECK(c.accel == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("controller brakes on a stop target") {
  const SimConfig cfg;
  const SimState state{Pose2{}, 8.0, 0.0};
  const auto c = sim::track_point_controller(point_target(0.0, 0.0), state, cfg);
  CHECK(c.steer == 0.0);
  CHECK(c.accel < 0.0);
}

TEST_CASE("controller steers left toward a left target") {
  const SimConfig cfg;
  const SimState state{Pose2{}, 5.0, 0.0};
  const auto c = sim::track_point_controller(point_target(5.0, 2.0), state, cfg);
  CHECK(c.steer > 0.0);
}

TEST_CASE("stop predictor on a moving expert: low-speed errors, no lateral") {
  const data::ScenarioLog log = data::gen_synthetic(data::ScenarioKind::straight, 4, quick_gen());
  const SimConfig cfg;
  auto stop = sim::make_stop_predictor(40, 0.1);
  const sim::SimReport report = sim::run_closed_loop(log, *stop, cfg);
  CHECK(report.valid);
  CHECK(report.low_count >= 1);
  CHECK(report.lateral_count == 0);
  CHECK(report.high_count == 0);
}

TEST_CASE("hysteresis: a sustained violation counts exactly once") {
  const data::ScenarioLog log = data::gen_synthetic(data::ScenarioKind::straight, 5, quick_gen());
  const SimConfig cfg;
  auto stop = sim::make_stop_predictor(40, 0.1);
  const sim::SimReport report = sim::run_closed_loop(log, *stop, cfg);
  // the ego brakes once, stays slow for the whole remaining run
  CHECK(report.low_count == 1);
}

TEST_CASE("oracle predictor drives every scenario kind without errors") {
  const SimConfig cfg;
  for (const auto kind : {data::ScenarioKind::straight, data::ScenarioKind::turn90,
                          data::ScenarioKind::fork, data::ScenarioKind::roundabout,
                          data::ScenarioKind::stop_and_go}) {
    const data::ScenarioLog log = data::gen_synthetic(kind, 11, quick_gen());
    auto oracle = sim::make_oracle_predictor(40, 0.1);
    const sim::SimReport report = sim::run_closed_loop(log, *oracle, cfg);
    CHECK_MESSAGE(report.valid, data::to_string(kind));
    CHECK_MESSAGE(report.lateral_count == 0, data::to_string(kind));
    CHECK_MESSAGE(report.high_count == 0, data::to_string(kind));
    CHECK_MESSAGE(report.low_count == 0, data::to_string(kind));
    CHECK(report.distance_driven > 10.0);
  }
}

TEST_CASE("constant velocity fails the turn and the stop") {
  const SimConfig cfg;
  {
    const data::ScenarioLog log = data::gen_synthetic(data::ScenarioKind::turn90, 6, quick_gen());
    auto cv = sim::make_constant_velocity_predictor(40, 0.1);
    const sim::SimReport report = sim::run_closed_loop(log, *cv, cfg);
    CHECK(report.lateral_count >= 1);
  }
  {
    const data::ScenarioLog log =
        data::gen_synthetic(data::ScenarioKind::stop_and_go, 6, quick_gen());
    auto cv = sim::make_constant_velocity_predictor(40, 0.1);
    const sim::SimReport report = sim::run_closed_loop(log, *cv, cfg);
    CHECK(report.high_count >= 1);
  }
}

TEST_CASE("simulation is deterministic and traces are stable") {
  const data::ScenarioLog log = data::gen_synthetic(data::ScenarioKind::turn90, 8, quick_gen());
  const SimConfig cfg;
  std::ostringstream trace_a;
  std::ostringstream trace_b;
  auto cv_a = sim::make_constant_velocity_predictor(40, 0.1);
  auto cv_b = sim::make_constant_velocity_predictor(40, 0.1);
  const sim::SimReport a = sim::run_closed_loop(log, *cv_a, cfg, &trace_a);
  const sim::SimReport b = sim::run_closed_loop(log, *cv_b, cfg, &trace_b);
  CHECK(a.lateral_count == b.lateral_count);
  CHECK(a.distance_driven == b.distance_driven);
  CHECK(trace_a.str() == trace_b.str());
  CHECK(a.events.size() ==
        static_cast<size_t>(a.lateral_count + a.high_count + a.low_count));
}

TEST_CASE("bicycle conserves speed without acceleration") {
  const SimConfig cfg;
  SimState s{Pose2{}, 7.3, 0.0};
  for (int i = 0; i < 50; ++i) {
    s = sim::bicycle_step(s, 0.2, 0.0, cfg);
    CHECK(s.speed == doctest::Approx(7.3));
  }
}
