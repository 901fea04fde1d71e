#include "trajpred/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "trajpred/rng.hpp"

namespace trajpred::data {

using geometry::Pose2;
using geometry::Track;
using geometry::TrackSample;
using ordered_json = nlohmann::ordered_json;

const char* to_string(NavCommand c) {
  switch (c) {
    case NavCommand::follow: return "follow";
    case NavCommand::left: return "left";
    case NavCommand::straight: return "straight";
    case NavCommand::right: return "right";
  }
  return "follow";
}

NavCommand command_from_string(const std::string& s) {
  if (s == "follow") return NavCommand::follow;
  if (s == "left") return NavCommand::left;
  if (s == "straight") return NavCommand::straight;
  if (s == "right") return NavCommand::right;
  throw std::runtime_error("unknown command token '" + s + "'");
}

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::straight: return "straight";
    case ScenarioKind::turn90: return "turn90";
    case ScenarioKind::fork: return "fork";
    case ScenarioKind::roundabout: return "roundabout";
    case ScenarioKind::stop_and_go: return "stop_and_go";
  }
  return "straight";
}

ScenarioKind kind_from_string(const std::string& s) {
  if (s == "straight") return ScenarioKind::straight;
  if (s == "turn90") return ScenarioKind::turn90;
  if (s == "fork") return ScenarioKind::fork;
  if (s == "roundabout") return ScenarioKind::roundabout;
  if (s == "stop_and_go") return ScenarioKind::stop_and_go;
  throw std::runtime_error("unknown scenario kind '" + s + "'");
}

namespace {

const char* state_token(int code) {
  switch (code) {
    case 1: return "parked";
    case 2: return "stopped";
    case 3: return "dynamic";
    default: return "none";
  }
}

int state_code(const std::string& s) {
  if (s == "parked") return 1;
  if (s == "stopped") return 2;
  if (s == "dynamic") return 3;
  throw std::runtime_error("unknown state token '" + s + "'");
}

const char* class_token(int code) {
  switch (code) {
    case 1: return "two_wheeler";
    case 2: return "car";
    case 3: return "truck";
    default: return "none";
  }
}

int class_code(const std::string& s) {
  if (s == "two_wheeler") return 1;
  if (s == "car") return 2;
  if (s == "truck") return 3;
  throw std::runtime_error("unknown class token '" + s + "'");
}

constexpr double kScenarioDt = 0.1;

[[noreturn]] void parse_fail(const std::string& name, size_t line, const std::string& what) {
  throw std::runtime_error(name + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

ScenarioLog parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
  return parse_scenario(in, path.filename().string());
}

ScenarioLog parse_scenario(std::istream& in, const std::string& name) {
  std::string line;
  size_t line_no = 0;

  if (!std::getline(in, line)) parse_fail(name, 1, "empty file, missing header");
  ++line_no;
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const std::exception& e) {
    parse_fail(name, line_no, std::string("malformed header: ") + e.what());
  }

  ScenarioLog log;
  try {
    if (header.at("format").get<std::string>() != "plop-scn/1") {
      parse_fail(name, line_no, "unsupported format '" + header["format"].get<std::string>() + "'");
    }
    log.id = header.at("id").get<std::string>();
    log.dt = header.at("dt").get<double>();
  } catch (const ordered_json::exception& e) {
    parse_fail(name, line_no, std::string("bad header: ") + e.what());
  }
  if (std::abs(log.dt - kScenarioDt) > 1e-12) {
    parse_fail(name, line_no, "dt must be 0.1 s");
  }
  const auto declared_frames = header.at("frames").get<size_t>();

  std::map<int, std::pair<int, int>> neighbor_span;  // id -> (last frame, class)
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      parse_fail(name, line_no, std::string("malformed frame: ") + e.what());
    }
    Frame frame;
    const int frame_index = static_cast<int>(log.frames.size());
    try {
      frame.t = j.at("t").get<double>();
      const auto& ego = j.at("ego");
      frame.ego = Pose2{ego.at("x").get<double>(), ego.at("y").get<double>(),
                        ego.at("yaw").get<double>()};
      frame.ego_speed = ego.at("speed").get<double>();
      frame.command = command_from_string(j.at("command").get<std::string>());
      for (const auto& nj : j.at("neighbors")) {
        NeighborObs obs;
        obs.id = nj.at("id").get<int>();
        obs.pose = Pose2{nj.at("x").get<double>(), nj.at("y").get<double>(),
                         nj.at("yaw").get<double>()};
        obs.speed = nj.at("speed").get<double>();
        obs.cls = class_code(nj.at("class").get<std::string>());
        obs.state = state_code(nj.at("state").get<std::string>());
        frame.neighbors.push_back(obs);
      }
      if (j.contains("points")) {
        for (const auto& pj : j.at("points")) {
          frame.points.push_back(bev::LidarPoint{pj.at(0).get<double>(), pj.at(1).get<double>(),
                                                 pj.at(2).get<double>()});
        }
      }
    } catch (const std::runtime_error& e) {
      parse_fail(name, line_no, e.what());
    } catch (const ordered_json::exception& e) {
      parse_fail(name, line_no, std::string("bad frame: ") + e.what());
    }

    if (std::abs(frame.t - frame_index * log.dt) > 1e-9) {
      parse_fail(name, line_no,
                 "timestamp error at frame " + std::to_string(frame_index) + ": t=" +
                     std::to_string(frame.t) + ", expected " + std::to_string(frame_index * log.dt));
    }
    for (const auto& obs : frame.neighbors) {
      const auto it = neighbor_span.find(obs.id);
      if (it != neighbor_span.end()) {
        if (it->second.first != frame_index - 1) {
          parse_fail(name, line_no,
                     "neighbor id " + std::to_string(obs.id) + " reappears after a gap at frame " +
                         std::to_string(frame_index));
        }
        if (it->second.second != obs.cls) {
          parse_fail(name, line_no, "neighbor id " + std::to_string(obs.id) + " changes class");
        }
        it->second.first = frame_index;
      } else {
        neighbor_span[obs.id] = {frame_index, obs.cls};
      }
    }
    log.frames.push_back(std::move(frame));
  }

  if (log.frames.size() != declared_frames) {
    parse_fail(name, line_no,
               "frame count mismatch: header declares " + std::to_string(declared_frames) +
                   ", file has " + std::to_string(log.frames.size()));
  }
  return log;
}

void write_scenario(const ScenarioLog& log, std::ostream& out) {
  ordered_json header;
  header["format"] = "plop-scn/1";
  header["id"] = log.id;
  header["dt"] = log.dt;
  header["frames"] = log.frames.size();
  out << header.dump() << '\n';

  for (const auto& frame : log.frames) {
    ordered_json j;
    j["t"] = frame.t;
    j["ego"] = {{"x", frame.ego.x}, {"y", frame.ego.y}, {"yaw", frame.ego.yaw},
                {"speed", frame.ego_speed}};
    j["command"] = to_string(frame.command);
    j["neighbors"] = ordered_json::array();
    for (const auto& obs : frame.neighbors) {
      j["neighbors"].push_back({{"id", obs.id},
                                {"x", obs.pose.x},
                                {"y", obs.pose.y},
                                {"yaw", obs.pose.yaw},
                                {"speed", obs.speed},
                                {"class", class_token(obs.cls)},
                                {"state", state_token(obs.state)}});
    }
    if (!frame.points.empty()) {
      auto points = ordered_json::array();
      for (const auto& p : frame.points) points.push_back({p.x, p.y, p.z});
      j["points"] = std::move(points);
    }
    out << j.dump() << '\n';
  }
}

void write_scenario(const ScenarioLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file " + path.string());
  write_scenario(log, out);
}

namespace {

std::pair<double, double> footprint_dims(int cls) {
  switch (cls) {
    case 1: return {2.0, 0.8};
    case 3: return {8.0, 2.5};
    default: return {4.5, 1.9};
  }
}

}  // namespace

bev::VehicleObs to_vehicle_obs(const NeighborObs& n) {
  bev::VehicleObs v;
  v.pose = n.pose;
  v.state = n.state;
  v.cls = n.cls;
  const auto [len, width] = footprint_dims(n.cls);
  const double c = std::cos(n.pose.yaw);
  const double s = std::sin(n.pose.yaw);
  const double hl = 0.5 * len;
  const double hw = 0.5 * width;
  const double sx[4] = {hl, hl, -hl, -hl};
  const double sy[4] = {hw, -hw, hw, -hw};
  for (int i = 0; i < 4; ++i) {
    v.corners[static_cast<size_t>(i)] = {n.pose.x + c * sx[i] - s * sy[i],
                                         n.pose.y + s * sx[i] + c * sy[i]};
  }
  return v;
}

std::vector<int> sample_indices(const ScenarioLog& log, const CutConfig& cfg) {
  std::vector<int> out;
  const int last = static_cast<int>(log.frames.size()) - 1 - cfg.T;
  for (int c = cfg.ego_past_steps; c <= last; c += cfg.stride) out.push_back(c);
  return out;
}

SceneSample cut_sample_at(const ScenarioLog& log, int index, const CutConfig& cfg) {
  const int P = cfg.ego_past_steps;
  const int Q = cfg.neighbor_past_steps;
  const int n_frames = static_cast<int>(log.frames.size());
  if (index < P || index + cfg.T >= n_frames) {
    throw std::invalid_argument("cut_sample_at: window outside log bounds");
  }

  SceneSample sample;
  sample.scenario_id = log.id;
  sample.frame_index = index;
  sample.command = log.frames[static_cast<size_t>(index)].command;
  const Pose2 ref = log.frames[static_cast<size_t>(index)].ego;

  sample.ego_past.sample_rate = 1.0 / log.dt;
  for (int i = index - P; i <= index; ++i) {
    const auto& f = log.frames[static_cast<size_t>(i)];
    sample.ego_past.samples.push_back(
        TrackSample{(i - index) * log.dt, geometry::to_frame(f.ego, ref), f.ego_speed});
  }
  sample.ego_future.sample_rate = 1.0 / log.dt;
  for (int i = index + 1; i <= index + cfg.T; ++i) {
    const auto& f = log.frames[static_cast<size_t>(i)];
    sample.ego_future.samples.push_back(
        TrackSample{(i - index) * log.dt, geometry::to_frame(f.ego, ref), f.ego_speed});
  }

  // A neighbor qualifies when it is tracked through the whole window.
  const auto find_obs = [&log](int frame, int id) -> const NeighborObs* {
    for (const auto& obs : log.frames[static_cast<size_t>(frame)].neighbors) {
      if (obs.id == id) return &obs;
    }
    return nullptr;
  };
  struct Candidate {
    int id;
    double dist;
  };
  std::vector<Candidate> candidates;
  for (const auto& obs : log.frames[static_cast<size_t>(index)].neighbors) {
    bool complete = true;
    for (int i = index - Q; i <= index + cfg.T && complete; ++i) {
      if (find_obs(i, obs.id) == nullptr) complete = false;
    }
    if (!complete) continue;
    const double dx = obs.pose.x - ref.x;
    const double dy = obs.pose.y - ref.y;
    candidates.push_back(Candidate{obs.id, std::hypot(dx, dy)});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
  });
  if (static_cast<int>(candidates.size()) > cfg.max_neighbors) {
    candidates.resize(static_cast<size_t>(cfg.max_neighbors));
  }

  for (const auto& cand : candidates) {
    sample.neighbor_ids.push_back(cand.id);
    const NeighborObs* now = find_obs(index, cand.id);
    const Pose2 now_ego = geometry::to_frame(now->pose, ref);
    sample.neighbor_positions.emplace_back(now_ego.x, now_ego.y);

    Track past;
    past.sample_rate = 1.0 / log.dt;
    for (int i = index - Q; i <= index; ++i) {
      const NeighborObs* obs = find_obs(i, cand.id);
      past.samples.push_back(
          TrackSample{(i - index) * log.dt, geometry::to_frame(obs->pose, ref), obs->speed});
    }
    sample.neighbor_pasts.push_back(std::move(past));

    Track future;
    future.sample_rate = 1.0 / log.dt;
    for (int i = index + 1; i <= index + cfg.T; ++i) {
      const NeighborObs* obs = find_obs(i, cand.id);
      Pose2 rel = geometry::to_frame(obs->pose, ref);
      rel.x -= now_ego.x;  // re-anchor to the agent's position at the cut
      rel.y -= now_ego.y;
      future.samples.push_back(TrackSample{(i - index) * log.dt, rel, obs->speed});
    }
    sample.neighbor_futures.push_back(std::move(future));
  }

  if (cfg.build_bev) {
    std::vector<bev::SceneSnapshot> history;
    history.reserve(bev::kFrames);
    for (int i = index - (bev::kFrames - 1); i <= index; ++i) {
      bev::SceneSnapshot snap;
      const auto& f = log.frames[static_cast<size_t>(i)];
      for (const auto& obs : f.neighbors) snap.vehicles.push_back(to_vehicle_obs(obs));
      snap.points = f.points;
      history.push_back(std::move(snap));
    }
    sample.bev = bev::accumulate(history, ref, true, cfg.ground_z_threshold);
  }
  return sample;
}

std::vector<SceneSample> cut_samples(const ScenarioLog& log, const CutConfig& cfg) {
  const auto indices = sample_indices(log, cfg);
  if (indices.empty()) {
    std::cerr << "warning: scenario '" << log.id << "' too short for a single window\n";
    return {};
  }
  std::vector<SceneSample> out;
  out.reserve(indices.size());
  for (const int c : indices) out.push_back(cut_sample_at(log, c, cfg));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenario generation.

namespace {

struct SegmentGeom {
  enum Type { kStraight, kArc } type;
  double s0;       // start arc length
  double length;
  Pose2 start;     // pose at s0 (yaw possibly unwrapped)
  double radius;   // arcs only
  double dir;      // +1 left, -1 right
  double target_speed;
};

struct Centerline {
  std::vector<SegmentGeom> segments;
  double total{0.0};
  // Junctions: arc starts with the net heading change of the arc.
  struct Junction {
    double s;
    Pose2 pos;
    double heading_change;
  };
  std::vector<Junction> junctions;

  void add_straight(double length, double speed) {
    append(SegmentGeom{SegmentGeom::kStraight, total, length, end_pose(), 0.0, 0.0, speed});
  }
  void add_arc(double angle_rad, double radius, double speed, bool junction) {
    const double dir = angle_rad >= 0.0 ? 1.0 : -1.0;
    SegmentGeom seg{SegmentGeom::kArc, total, std::abs(angle_rad) * radius, end_pose(), radius,
                    dir, speed};
    if (junction) junctions.push_back(Junction{total, seg.start, angle_rad});
    append(seg);
  }

  Pose2 end_pose() const {
    if (segments.empty()) return Pose2{};
    return pose_at(total);
  }

  Pose2 pose_at(double s) const {
    const SegmentGeom& seg = find(s);
    const double local = std::clamp(s - seg.s0, 0.0, seg.length);
    if (seg.type == SegmentGeom::kStraight) {
      return Pose2{seg.start.x + std::cos(seg.start.yaw) * local,
                   seg.start.y + std::sin(seg.start.yaw) * local, seg.start.yaw};
    }
    const double ang = local / seg.radius;
    const double yaw = seg.start.yaw + seg.dir * ang;
    const double cx = seg.start.x - seg.dir * seg.radius * std::sin(seg.start.yaw);
    const double cy = seg.start.y + seg.dir * seg.radius * std::cos(seg.start.yaw);
    return Pose2{cx + seg.dir * seg.radius * std::sin(yaw), cy - seg.dir * seg.radius * std::cos(yaw),
                 yaw};
  }

  double speed_limit_at(double s) const { return find(s).target_speed; }

private:
  void append(SegmentGeom seg) {
    segments.push_back(seg);
    total += seg.length;
  }
  const SegmentGeom& find(double s) const {
    for (const auto& seg : segments) {
      if (s < seg.s0 + seg.length) return seg;
    }
    return segments.back();
  }
};

// Speed profile along the centerline honoring accel-limited transitions.
class SpeedProfile {
public:
  SpeedProfile(const Centerline& path, double accel, double entry_speed) : ds_(0.25) {
    const int n = static_cast<int>(std::ceil(path.total / ds_)) + 1;
    v_.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      v_[static_cast<size_t>(i)] = path.speed_limit_at(std::min(i * ds_, path.total));
    }
    v_[0] = std::min(v_[0], entry_speed);
    for (int i = n - 2; i >= 0; --i) {  // decelerate in time
      const double reachable = std::sqrt(v_[static_cast<size_t>(i) + 1] * v_[static_cast<size_t>(i) + 1] +
                                         2.0 * accel * ds_);
      v_[static_cast<size_t>(i)] = std::min(v_[static_cast<size_t>(i)], reachable);
    }
    for (int i = 1; i < n; ++i) {  // accelerate within limits
      const double reachable = std::sqrt(v_[static_cast<size_t>(i) - 1] * v_[static_cast<size_t>(i) - 1] +
                                         2.0 * accel * ds_);
      v_[static_cast<size_t>(i)] = std::min(v_[static_cast<size_t>(i)], reachable);
    }
  }

  double at(double s) const {
    const double idx = s / ds_;
    const int lo = std::clamp(static_cast<int>(idx), 0, static_cast<int>(v_.size()) - 1);
    const int hi = std::min(lo + 1, static_cast<int>(v_.size()) - 1);
    const double f = std::clamp(idx - lo, 0.0, 1.0);
    return (1.0 - f) * v_[static_cast<size_t>(lo)] + f * v_[static_cast<size_t>(hi)];
  }

private:
  double ds_;
  std::vector<double> v_;
};

NavCommand direction_command(double heading_change) {
  const double norm = geometry::normalize_angle(heading_change);
  constexpr double deg15 = 15.0 * 3.14159265358979323846 / 180.0;
  if (norm > deg15) return NavCommand::left;
  if (norm < -deg15) return NavCommand::right;
  return NavCommand::straight;
}

struct WallPoint {
  double x, y, z;
};

std::vector<WallPoint> make_walls(const Centerline& path, double offset, double spacing,
                                  double base_z, Rng& rng, double s_begin = 0.0) {
  std::vector<WallPoint> out;
  for (double s = s_begin; s <= path.total; s += spacing) {
    const Pose2 p = path.pose_at(s);
    const double nx = -std::sin(p.yaw);
    const double ny = std::cos(p.yaw);
    for (const double side : {offset, -offset}) {
      out.push_back(WallPoint{p.x + side * nx + 0.05 * rng.normal(),
                              p.y + side * ny + 0.05 * rng.normal(),
                              base_z + 0.2 * rng.uniform()});
    }
  }
  return out;
}

}  // namespace

ScenarioLog gen_synthetic(ScenarioKind kind, uint64_t seed, const GenParams& p) {
  Rng rng(seed);
  const bool branch_left = rng.bernoulli(0.5);  // first draw, used by fork only

  ScenarioLog log;
  log.dt = kScenarioDt;
  {
    std::ostringstream id;
    id << to_string(kind) << "_" << seed;
    log.id = id.str();
  }

  constexpr double pi = 3.14159265358979323846;

  // stop_and_go is a straight road with an explicit time-domain speed
  // profile (full stop plus dwell); everything else runs on a centerline
  // with a distance-domain profile.
  if (kind == ScenarioKind::stop_and_go) {
    Centerline path;
    path.add_straight(1000.0, p.speed);  // long straight; frames bounded below
    std::vector<WallPoint> walls;
    {
      Rng wall_rng(seed ^ 0x5741414cULL);
      Centerline wall_path;
      wall_path.add_straight(30.0 + p.speed * p.speed / 5.0 + p.speed * p.speed / 3.0 + 60.0,
                             p.speed);
      walls = make_walls(wall_path, p.wall_offset, p.point_spacing, p.point_z, wall_rng);
    }

    struct LongState {
      double x;
      double v;
      int phase{0};  // 0 cruise, 1 brake, 2 dwell, 3 accel, 4 cruise out
      int dwell;
      double exit_start{0.0};
    };
    const int dwell_frames = static_cast<int>(std::round(p.stop_dwell / log.dt));
    const double brake_at = 30.0;
    const double exit_after = 40.0;
    const auto advance = [&](LongState& st, double stop_x) {
      st.x += st.v * log.dt;
      switch (st.phase) {
        case 0:
          if (st.x >= stop_x) st.phase = 1;
          break;
        case 1:
          st.v = std::max(0.0, st.v - 2.5 * log.dt);
          if (st.v == 0.0) st.phase = 2;
          break;
        case 2:
          if (--st.dwell <= 0) st.phase = 3;
          break;
        case 3:
          st.v = std::min(p.speed, st.v + 1.5 * log.dt);
          if (st.v == p.speed) {
            st.phase = 4;
            st.exit_start = st.x;
          }
          break;
        default:
          break;
      }
    };
    LongState ego{0.0, p.speed, 0, dwell_frames};
    LongState lead{p.lead_gap + 8.0, p.speed, 0, dwell_frames};

    int frame_index = 0;
    while (frame_index < 2000) {
      Frame frame;
      frame.t = frame_index * log.dt;
      frame.ego = Pose2{ego.x, 0.0, 0.0};
      frame.ego_speed = ego.v;
      frame.command = NavCommand::follow;
      if (p.neighbors >= 1) {
        NeighborObs obs;
        obs.id = 1;
        obs.pose = Pose2{lead.x, 0.0, 0.0};
        obs.speed = lead.v;
        obs.cls = 2;
        obs.state = lead.v > 0.3 ? 3 : 2;
        frame.neighbors.push_back(obs);
      }
      for (const auto& w : walls) {
        if (std::hypot(w.x - ego.x, w.y) <= p.sensor_range) {
          frame.points.push_back(bev::LidarPoint{w.x, w.y, w.z});
        }
      }
      if (p.ground_speckle) {
        for (int g = 0; g < 4; ++g) {
          frame.points.push_back(
              bev::LidarPoint{ego.x + rng.uniform(-8.0, 8.0), rng.uniform(-2.0, 2.0), 0.05});
        }
      }
      log.frames.push_back(std::move(frame));
      ++frame_index;

      advance(ego, brake_at);
      if (p.neighbors >= 1) advance(lead, brake_at + p.lead_gap);
      if (ego.phase == 4 && ego.x - ego.exit_start >= exit_after) break;
    }
    return log;
  }

  // Centerline per kind.
  Centerline path;
  switch (kind) {
    case ScenarioKind::straight:
      path.add_straight(p.approach_length + p.exit_length, p.speed);
      break;
    case ScenarioKind::turn90:
      path.add_straight(p.approach_length, p.speed);
      path.add_arc(pi / 2.0, p.turn_radius, p.turn_speed, true);
      path.add_straight(p.exit_length, p.speed);
      break;
    case ScenarioKind::fork: {
      const double angle = (branch_left ? 1.0 : -1.0) * p.fork_angle_deg * pi / 180.0;
      path.add_straight(p.approach_length, p.speed);
      path.add_arc(angle, p.fork_radius, p.speed, true);
      path.add_straight(p.exit_length, p.speed);
      break;
    }
    case ScenarioKind::roundabout:
      path.add_straight(p.approach_length, p.speed);
      path.add_arc(p.roundabout_sweep_deg * pi / 180.0, p.roundabout_radius, p.turn_speed, true);
      path.add_straight(p.exit_length, p.speed);
      break;
    case ScenarioKind::stop_and_go:
      break;  // handled above
  }

  // Walls: both fork branches exist in the static world so the input is
  // identical before the branch point regardless of the future.
  std::vector<WallPoint> walls;
  {
    Rng wall_rng(seed ^ 0x5741414cULL);
    walls = make_walls(path, p.wall_offset, p.point_spacing, p.point_z, wall_rng);
    if (kind == ScenarioKind::fork) {
      Centerline other;
      const double angle = (branch_left ? -1.0 : 1.0) * p.fork_angle_deg * pi / 180.0;
      other.add_straight(p.approach_length, p.speed);
      other.add_arc(angle, p.fork_radius, p.speed, false);
      other.add_straight(p.exit_length, p.speed);
      Rng other_rng(seed ^ 0x5741414dULL);
      const auto other_walls =
          make_walls(other, p.wall_offset, p.point_spacing, p.point_z, other_rng, p.approach_length);
      walls.insert(walls.end(), other_walls.begin(), other_walls.end());
    }
  }

  const SpeedProfile profile(path, p.accel, p.speed);

  // Oncoming traffic runs next to the approach stretch.
  const double oncoming_speed = 8.0;
  double oncoming_x = p.approach_length + 30.0;
  bool oncoming_alive = p.neighbors >= 2 && kind != ScenarioKind::roundabout;

  double s = 0.0;
  int frame_index = 0;
  while (s < path.total - 0.5 && frame_index < 2000) {
    const Pose2 raw = path.pose_at(s);
    const double v = profile.at(s);

    Frame frame;
    frame.t = frame_index * log.dt;
    frame.ego = Pose2{raw.x, raw.y, geometry::normalize_angle(raw.yaw)};
    frame.ego_speed = v;

    frame.command = NavCommand::follow;
    for (const auto& junction : path.junctions) {
      const double d = std::hypot(raw.x - junction.pos.x, raw.y - junction.pos.y);
      if (d <= p.command_junction_radius) {
        if (kind == ScenarioKind::fork && !p.fork_command_branch) break;
        frame.command = direction_command(junction.heading_change);
        break;
      }
    }

    if (p.neighbors >= 1) {
      const double lead_s = s + p.lead_gap;
      if (lead_s < path.total) {
        NeighborObs lead;
        lead.id = 1;
        const Pose2 lp = path.pose_at(lead_s);
        lead.pose = Pose2{lp.x, lp.y, geometry::normalize_angle(lp.yaw)};
        lead.speed = profile.at(lead_s);
        lead.cls = 2;
        lead.state = 3;
        frame.neighbors.push_back(lead);
      }
    }
    if (oncoming_alive) {
      if (oncoming_x < raw.x - 15.0 || oncoming_x < -30.0) {
        oncoming_alive = false;  // dropped for good: ids stay contiguous
      } else {
        NeighborObs onc;
        onc.id = 2;
        onc.pose = Pose2{oncoming_x, p.lane_offset, pi};
        onc.speed = oncoming_speed;
        onc.cls = 2;
        onc.state = 3;
        frame.neighbors.push_back(onc);
      }
    }
    if (p.neighbors >= 3) {
      NeighborObs parked;
      parked.id = 3;
      parked.pose = Pose2{p.approach_length * 0.6, -p.lane_offset, 0.0};
      parked.speed = 0.0;
      parked.cls = 2;
      parked.state = 1;
      frame.neighbors.push_back(parked);
    }

    for (const auto& w : walls) {
      if (std::hypot(w.x - raw.x, w.y - raw.y) <= p.sensor_range) {
        frame.points.push_back(bev::LidarPoint{w.x, w.y, w.z});
      }
    }
    if (p.ground_speckle) {
      for (int g = 0; g < 4; ++g) {
        frame.points.push_back(bev::LidarPoint{raw.x + rng.uniform(-8.0, 8.0),
                                               raw.y + rng.uniform(-2.0, 2.0), 0.05});
      }
    }

    log.frames.push_back(std::move(frame));
    ++frame_index;

    // RK2 arc-length advance.
    const double mid_v = profile.at(s + 0.5 * log.dt * v);
    s += log.dt * mid_v;
    if (oncoming_alive) oncoming_x -= oncoming_speed * log.dt;
  }
  return log;
}

ScenarioLog apply_position_noise(const ScenarioLog& log, uint64_t seed, double stddev) {
  Rng rng(seed);
  ScenarioLog out = log;
  for (auto& frame : out.frames) {
    frame.ego.x += stddev * rng.normal();
    frame.ego.y += stddev * rng.normal();
    for (auto& obs : frame.neighbors) {
      obs.pose.x += stddev * rng.normal();
      obs.pose.y += stddev * rng.normal();
    }
  }
  return out;
}

bool is_dynamically_feasible(const ScenarioLog& log, double wheelbase, double max_steer,
                             std::string* why) {
  const double gain = std::tan(max_steer) / wheelbase;
  for (size_t i = 1; i < log.frames.size(); ++i) {
    const auto& a = log.frames[i - 1];
    const auto& b = log.frames[i];
    const double dyaw = std::abs(geometry::normalize_angle(b.ego.yaw - a.ego.yaw));
    const double v = 0.5 * (a.ego_speed + b.ego_speed);
    const double limit = v * gain * log.dt + 1e-6;
    if (dyaw > limit) {
      if (why != nullptr) {
        *why = "frame " + std::to_string(i) + ": |dyaw|=" + std::to_string(dyaw) +
               " exceeds bicycle limit " + std::to_string(limit);
      }
      return false;
    }
  }
  return true;
}

}  // namespace trajpred::data
