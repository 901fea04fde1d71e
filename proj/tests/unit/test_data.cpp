#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstring>
#include <sstream>

#include "trajpred/data.hpp"

using namespace trajpred;
using data::NavCommand;
using data::ScenarioKind;
using data::ScenarioLog;

namespace {

std::string well_formed_3_frames() {
  std::ostringstream s;
  s << R"({"format":"plop-scn/1","id":"t","dt":0.1,"frames":3})" << "\n";
  s << R"({"t":0.0,"ego":{"x":0.0,"y":0.0,"yaw":0.0,"speed":10.0},"command":"follow","neighbors":[]})" << "\n";
  s << R"({"t":0.1,"ego":{"x":1.0,"y":0.0,"yaw":0.0,"speed":10.0},"command":"follow","neighbors":[{"id":1,"x":5.0,"y":0.0,"yaw":0.0,"speed":8.0,"class":"car","state":"dynamic"}]})" << "\n";
  s << R"({"t":0.2,"ego":{"x":2.0,"y":0.0,"yaw":0.0,"speed":10.0},"command":"left","neighbors":[{"id":1,"x":5.8,"y":0.0,"yaw":0.0,"speed":8.0,"class":"car","state":"dynamic"}],"points":[[1.0,2.0,0.5]]})" << "\n";
  return s.str();
}

data::GenParams quick_gen() {
  data::GenParams p;
  p.point_spacing = 4.0;  // sparse walls keep generation cheap in tests
  p.sensor_range = 20.0;
  return p;
}

}  // namespace

TEST_CASE("parse a well-formed log") {
  std::istringstream in(well_formed_3_frames());
  const ScenarioLog log = data::parse_scenario(in, "mem");
  CHECK(log.frames.size() == 3);
  CHECK(log.id == "t");
  CHECK(log.frames[2].command == NavCommand::left);
  CHECK(log.frames[1].neighbors.size() == 1);
  CHECK(log.frames[2].points.size() == 1);
}

TEST_CASE("timestamp gap is rejected with the frame named") {
  std::string text = well_formed_3_frames();
  const auto pos = text.find("\"t\":0.2");
  text.replace(pos, 7, "\"t\":0.3");
  std::istringstream in(text);
  CHECK_THROWS_WITH_AS((void)data::parse_scenario(in, "mem"),
                       doctest::Contains("timestamp error at frame 2"), std::runtime_error);
}

TEST_CASE("unknown command token is rejected") {
  std::string text = well_formed_3_frames();
  const auto pos = text.find("\"left\"");
  text.replace(pos, 6, "\"reverse\"");
  std::istringstream in(text);
  CHECK_THROWS_WITH_AS((void)data::parse_scenario(in, "mem"),
                       doctest::Contains("unknown command token"), std::runtime_error);
}

TEST_CASE("neighbor id gaps are rejected") {
  std::ostringstream s;
  s << R"({"format":"plop-scn/1","id":"t","dt":0.1,"frames":3})" << "\n";
  s << R"({"t":0.0,"ego":{"x":0,"y":0,"yaw":0,"speed":1},"command":"follow","neighbors":[{"id":1,"x":1,"y":0,"yaw":0,"speed":1,"class":"car","state":"dynamic"}]})" << "\n";
  s << R"({"t":0.1,"ego":{"x":0,"y":0,"yaw":0,"speed":1},"command":"follow","neighbors":[]})" << "\n";
  s << R"({"t":0.2,"ego":{"x":0,"y":0,"yaw":0,"speed":1},"command":"follow","neighbors":[{"id":1,"x":1,"y":0,"yaw":0,"speed":1,"class":"car","state":"dynamic"}]})" << "\n";
  std::istringstream in(s.str());
  CHECK_THROWS_WITH_AS((void)data::parse_scenario(in, "mem"), doctest::Contains("reappears"),
                       std::runtime_error);
}

TEST_CASE("canonical round trip is bit exact") {
  const ScenarioLog log = data::gen_synthetic(ScenarioKind::turn90, 5, quick_gen());
  std::ostringstream out;
  data::write_scenario(log, out);
  std::istringstream in(out.str());
  const ScenarioLog back = data::parse_scenario(in, "mem");

  REQUIRE(back.frames.size() == log.frames.size());
  CHECK(back.id == log.id);
  for (size_t i = 0; i < log.frames.size(); ++i) {
    const auto& a = log.frames[i];
    const auto& b = back.frames[i];
    CHECK(std::memcmp(&a.ego.x, &b.ego.x, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.ego.y, &b.ego.y, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.ego.yaw, &b.ego.yaw, sizeof(double)) == 0);
    CHECK(a.ego_speed == b.ego_speed);
    CHECK(a.command == b.command);
    REQUIRE(a.neighbors.size() == b.neighbors.size());
    REQUIRE(a.points.size() == b.points.size());
    for (size_t n = 0; n < a.neighbors.size(); ++n) {
      CHECK(std::memcmp(&a.neighbors[n].pose.x, &b.neighbors[n].pose.x, sizeof(double)) == 0);
      CHECK(a.neighbors[n].cls == b.neighbors[n].cls);
      CHECK(a.neighbors[n].state == b.neighbors[n].state);
    }
    for (size_t q = 0; q < a.points.size(); ++q) {
      CHECK(std::memcmp(&a.points[q].z, &b.points[q].z, sizeof(double)) == 0);
    }
  }
  // writing again yields identical bytes
  std::ostringstream out2;
  data::write_scenario(back, out2);
  CHECK(out.str() == out2.str());
}

TEST_CASE("cut_samples window arithmetic") {
  // 100-frame straight log: 2 s past + 4 s future at stride 10 -> 4 samples
  ScenarioLog log;
  log.id = "win";
  log.dt = 0.1;
  for (int i = 0; i < 100; ++i) {
    data::Frame f;
    f.t = i * 0.1;
    f.ego = geometry::Pose2{i * 1.0, 0.0, 0.0};
    f.ego_speed = 10.0;
    log.frames.push_back(f);
  }
  data::CutConfig cut;
  cut.stride = 10;
  cut.T = 40;
  cut.build_bev = false;
  const auto samples = data::cut_samples(log, cut);
  CHECK(samples.size() == 4);
  CHECK(samples[0].frame_index == 20);
  CHECK(samples[3].frame_index == 50);

  for (const auto& s : samples) {
    CHECK(s.ego_past.samples.size() == 21);
    CHECK(s.ego_future.samples.size() == 40);
    // frame convention: the past ends at the origin at t=0
    CHECK(s.ego_past.samples.back().t == doctest::Approx(0.0));
    CHECK(std::abs(s.ego_past.samples.back().pose.x) < 1e-12);
    CHECK(std::abs(s.ego_past.samples.back().pose.y) < 1e-12);
  }

  // stride larger than the log -> one sample
  cut.stride = 1000;
  CHECK(data::cut_samples(log, cut).size() == 1);
}

TEST_CASE("cut_samples on a too-short log returns nothing") {
  ScenarioLog log;
  log.id = "short";
  log.dt = 0.1;
  for (int i = 0; i < 30; ++i) {
    data::Frame f;
    f.t = i * 0.1;
    log.frames.push_back(f);
  }
  data::CutConfig cut;
  cut.build_bev = false;
  CHECK(data::cut_samples(log, cut).empty());
}

TEST_CASE("generated fork branches have opposite final y across seeds") {
  data::GenParams p = quick_gen();
  bool saw_left = false;
  bool saw_right = false;
  for (uint64_t seed = 1; seed <= 16 && !(saw_left && saw_right); ++seed) {
    const ScenarioLog log = data::gen_synthetic(ScenarioKind::fork, seed, p);
    const double final_y = log.frames.back().ego.y;
    CHECK(std::abs(final_y) > 3.0);
    (final_y > 0 ? saw_left : saw_right) = true;
  }
  CHECK(saw_left);
  CHECK(saw_right);
}

TEST_CASE("generated scenarios are dynamically feasible and parse cleanly") {
  data::GenParams p = quick_gen();
  p.neighbors = 2;
  for (const ScenarioKind kind :
       {ScenarioKind::straight, ScenarioKind::turn90, ScenarioKind::fork, ScenarioKind::roundabout,
        ScenarioKind::stop_and_go}) {
    for (uint64_t seed = 1; seed <= 20; ++seed) {
      const ScenarioLog log = data::gen_synthetic(kind, seed, p);
      REQUIRE(log.frames.size() >= 61);
      std::string why;
      CHECK_MESSAGE(data::is_dynamically_feasible(log, p.wheelbase, p.max_steer, &why), why);

      std::ostringstream out;
      data::write_scenario(log, out);
      std::istringstream in(out.str());
      const ScenarioLog back = data::parse_scenario(in, "mem");
      data::CutConfig cut;
      cut.build_bev = false;
      cut.stride = 20;
      const auto samples = data::cut_samples(back, cut);
      CHECK(!samples.empty());
      for (const auto& s : samples) {
        s.ego_past.validate();
        s.ego_future.validate();
        for (const auto& nb : s.neighbor_futures) {
          // re-anchored futures start near the agent's own position
          CHECK(std::abs(nb.samples.front().pose.x) < 5.0);
        }
      }
    }
  }
}

TEST_CASE("commands appear near the junction only") {
  data::GenParams p = quick_gen();
  const ScenarioLog log = data::gen_synthetic(ScenarioKind::turn90, 3, p);
  CHECK(log.frames.front().command == NavCommand::follow);
  int junction_commands = 0;
  for (const auto& f : log.frames) {
    if (f.command != NavCommand::follow) ++junction_commands;
  }
  CHECK(junction_commands > 0);

  // fork keeps `follow` unless asked to reveal the branch
  const ScenarioLog fork = data::gen_synthetic(ScenarioKind::fork, 3, p);
  for (const auto& f : fork.frames) CHECK(f.command == NavCommand::follow);
  data::GenParams reveal = p;
  reveal.fork_command_branch = true;
  const ScenarioLog fork2 = data::gen_synthetic(ScenarioKind::fork, 3, reveal);
  int branch_commands = 0;
  for (const auto& f : fork2.frames) {
    if (f.command != NavCommand::follow) ++branch_commands;
  }
  CHECK(branch_commands > 0);
}

TEST_CASE("position noise is seeded and bounded") {
  const ScenarioLog log = data::gen_synthetic(ScenarioKind::straight, 2, quick_gen());
  const ScenarioLog a = data::apply_position_noise(log, 9, 0.05);
  const ScenarioLog b = data::apply_position_noise(log, 9, 0.05);
  CHECK(a.frames[5].ego.x == b.frames[5].ego.x);
  CHECK(a.frames[5].ego.x != log.frames[5].ego.x);
}
