#include "trajpred/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace trajpred::sim {

using geometry::Pose2;
using geometry::Track;
using mixture::TrajectoryMixture;

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::lateral: return "lateral";
    case ErrorKind::high: return "high";
    case ErrorKind::low: return "low";
  }
  return "lateral";
}

SimState bicycle_step(const SimState& state, double steer, double accel, const SimConfig& cfg) {
  steer = std::clamp(steer, -cfg.max_steer, cfg.max_steer);
  accel = std::clamp(accel, cfg.accel_min, cfg.accel_max);
  SimState next;
  const double v = state.speed;
  next.pose.x = state.pose.x + v * std::cos(state.pose.yaw) * cfg.dt;
  next.pose.y = state.pose.y + v * std::sin(state.pose.yaw) * cfg.dt;
  next.pose.yaw =
      geometry::normalize_angle(state.pose.yaw + v / cfg.wheelbase * std::tan(steer) * cfg.dt);
  next.speed = std::max(0.0, v + accel * cfg.dt);
  next.time = state.time + cfg.dt;
  return next;
}

Control track_point_controller(const TrajectoryMixture& ego, const SimState& state,
                               const SimConfig& cfg) {
  const auto modes = mode_summary(ego);
  const auto& top = modes.front();
  const double px = geometry::poly_eval(ego.components[static_cast<size_t>(top.component)].coeffs_x,
                                        cfg.control_horizon);
  const double py = geometry::poly_eval(ego.components[static_cast<size_t>(top.component)].coeffs_y,
                                        cfg.control_horizon);
  const double d = std::hypot(px, py);
  const double h = cfg.control_horizon;

  Control c;
  const double bearing = std::atan2(py, px);
  // Degenerate targets: a stop request, or a point behind the vehicle
  // (reverse is out of scope). Both brake to a stop.
  if (d < cfg.stop_distance || std::abs(bearing) > 1.5707963267948966) {
    c.steer = 0.0;
    c.accel = std::clamp(-2.0 * state.speed / h, cfg.accel_min, cfg.accel_max);
    return c;
  }
  c.steer = std::clamp(std::atan(2.0 * cfg.wheelbase * std::sin(bearing) / d), -cfg.max_steer,
                       cfg.max_steer);
  // Constant acceleration that covers d within the horizon: d = v*h + a*h^2/2.
  // Tracks a braking expert with zero position offset, unlike a plain
  // speed-matching gain.
  c.accel = std::clamp(2.0 * (d - state.speed * h) / (h * h), cfg.accel_min, cfg.accel_max);
  return c;
}

namespace {

// Piecewise-linear expert path with projection to (arc length, cross-track).
class ExpertPath {
public:
  explicit ExpertPath(const data::ScenarioLog& log) {
    points_.reserve(log.frames.size());
    frame_s_.reserve(log.frames.size());
    double s = 0.0;
    for (size_t i = 0; i < log.frames.size(); ++i) {
      const auto& e = log.frames[i].ego;
      if (i > 0) {
        s += std::hypot(e.x - log.frames[i - 1].ego.x, e.y - log.frames[i - 1].ego.y);
      }
      frame_s_.push_back(s);
      // Skip stationary duplicates for the projection polyline.
      if (points_.empty() || std::hypot(e.x - points_.back().x, e.y - points_.back().y) > 1e-9) {
        points_.push_back(Vertex{e.x, e.y, s});
      }
    }
  }

  double frame_arclength(int frame) const { return frame_s_[static_cast<size_t>(frame)]; }

  // Returns (arc length of projection, cross-track distance).
  std::pair<double, double> project(double x, double y) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    for (size_t i = 0; i + 1 < points_.size(); ++i) {
      const auto& a = points_[i];
      const auto& b = points_[i + 1];
      const double ux = b.x - a.x;
      const double uy = b.y - a.y;
      const double len2 = ux * ux + uy * uy;
      const double f = std::clamp(((x - a.x) * ux + (y - a.y) * uy) / len2, 0.0, 1.0);
      const double cx = a.x + f * ux;
      const double cy = a.y + f * uy;
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      if (d2 < best_d2) {
        best_d2 = d2;
        best_s = a.s + f * std::sqrt(len2);
      }
    }
    if (points_.size() == 1) {
      const double d = std::hypot(x - points_[0].x, y - points_[0].y);
      return {0.0, d};
    }
    return {best_s, std::sqrt(best_d2)};
  }

private:
  struct Vertex {
    double x, y, s;
  };
  std::vector<Vertex> points_;
  std::vector<double> frame_s_;
};

}  // namespace

SimReport run_closed_loop(const data::ScenarioLog& log, Predictor& predictor, const SimConfig& cfg,
                          std::ostream* trace) {
  SimReport report;
  report.scenario_id = log.id;
  report.predictor = predictor.name();

  const int n_frames = static_cast<int>(log.frames.size());
  const int start = cfg.warmup_frames;
  const int stop = n_frames - cfg.min_future_frames;
  if (start >= stop) {
    report.valid = false;
    report.abort_reason = "scenario too short for the configured warmup and horizon";
    return report;
  }

  const ExpertPath path(log);

  // The simulated history is seeded with the expert's first warmup frames.
  std::vector<SimState> history;
  history.reserve(static_cast<size_t>(n_frames));
  for (int i = 0; i <= start; ++i) {
    const auto& f = log.frames[static_cast<size_t>(i)];
    history.push_back(SimState{f.ego, f.ego_speed, i * cfg.dt});
  }
  SimState state = history.back();

  bool active[3] = {false, false, false};
  const auto detect = [&](ErrorKind kind, bool condition) {
    auto& flag = active[static_cast<size_t>(kind)];
    if (condition && !flag) {
      report.events.push_back(ErrorEvent{kind, state.time, state.pose.x, state.pose.y});
      switch (kind) {
        case ErrorKind::lateral: ++report.lateral_count; break;
        case ErrorKind::high: ++report.high_count; break;
        case ErrorKind::low: ++report.low_count; break;
      }
    }
    flag = condition;
  };

  if (trace != nullptr) {
    *trace << "time,sim_x,sim_y,sim_yaw,expert_x,expert_y,expert_yaw,sim_speed,expert_speed,"
              "lateral_active,high_active,low_active\n";
  }

  for (int f = start; f < stop; ++f) {
    // Prediction context: simulated past in the current simulated ego frame.
    PredictionContext ctx;
    ctx.log = &log;
    ctx.frame = f;
    ctx.ego_pose_global = state.pose;
    ctx.ego_speed = state.speed;
    ctx.command = log.frames[static_cast<size_t>(f)].command;
    ctx.ego_past.sample_rate = 1.0 / cfg.dt;
    const int last = static_cast<int>(history.size()) - 1;
    const int past_len = std::min<int>(cfg.warmup_frames, last);
    for (int i = last - past_len; i <= last; ++i) {
      const auto& h = history[static_cast<size_t>(i)];
      ctx.ego_past.samples.push_back(geometry::TrackSample{
          (i - last) * cfg.dt, geometry::to_frame(h.pose, state.pose), h.speed});
    }

    TrajectoryMixture prediction;
    try {
      prediction = predictor.predict(ctx);
    } catch (const std::exception& e) {
      report.valid = false;
      report.abort_reason = std::string("predictor failed at frame ") + std::to_string(f) + ": " +
                            e.what();
      return report;
    }
    const Control control = track_point_controller(prediction, state, cfg);

    // Error detectors, synchronized with log frame f.
    const auto& expert = log.frames[static_cast<size_t>(f)];
    const auto [s_sim, cross] = path.project(state.pose.x, state.pose.y);
    const double s_exp = path.frame_arclength(f);
    detect(ErrorKind::lateral, cross > cfg.lateral_threshold);
    detect(ErrorKind::low, state.speed <= expert.ego_speed - cfg.speed_deficit_threshold);
    const bool overspeed =
        state.speed >= cfg.overspeed_ratio * expert.ego_speed && state.speed > expert.ego_speed;
    const bool overtake_imminent =
        s_sim + cfg.catchup_horizon * state.speed >= s_exp + cfg.catchup_horizon * expert.ego_speed;
    detect(ErrorKind::high, overspeed && overtake_imminent);

    if (trace != nullptr) {
      *trace << state.time << ',' << state.pose.x << ',' << state.pose.y << ',' << state.pose.yaw
             << ',' << expert.ego.x << ',' << expert.ego.y << ',' << expert.ego.yaw << ','
             << state.speed << ',' << expert.ego_speed << ',' << (active[0] ? 1 : 0) << ','
             << (active[1] ? 1 : 0) << ',' << (active[2] ? 1 : 0) << '\n';
    }

    const SimState next = bicycle_step(state, control.steer, control.accel, cfg);
    report.distance_driven += std::hypot(next.pose.x - state.pose.x, next.pose.y - state.pose.y);
    state = next;
    history.push_back(state);
  }
  return report;
}

// --------------------------------------------------------------------------
// Built-in predictors.

namespace {

class OraclePredictor final : public Predictor {
public:
  OraclePredictor(int T, double dt) : T_(T), dt_(dt) {}
  const char* name() const override { return "oracle"; }

  TrajectoryMixture predict(const PredictionContext& ctx) override {
    const auto& frames = ctx.log->frames;
    const int avail = std::min<int>(T_, static_cast<int>(frames.size()) - 1 - ctx.frame);
    if (avail < 4) throw std::runtime_error("oracle: not enough future frames");
    std::vector<std::pair<double, double>> pts_x(static_cast<size_t>(avail));
    std::vector<std::pair<double, double>> pts_y(static_cast<size_t>(avail));
    for (int i = 1; i <= avail; ++i) {
      const Pose2 rel =
          geometry::to_frame(frames[static_cast<size_t>(ctx.frame + i)].ego, ctx.ego_pose_global);
      pts_x[static_cast<size_t>(i - 1)] = {i * dt_, rel.x};
      pts_y[static_cast<size_t>(i - 1)] = {i * dt_, rel.y};
    }
    TrajectoryMixture m;
    m.K = 1;
    m.T = avail;
    m.dt = dt_;
    mixture::MixtureComponent comp;
    comp.weight = 1.0;
    comp.coeffs_x = geometry::poly_fit(pts_x);
    comp.coeffs_y = geometry::poly_fit(pts_y);
    comp.sigma_x.assign(static_cast<size_t>(avail), 1.0);
    comp.sigma_y.assign(static_cast<size_t>(avail), 1.0);
    m.components.push_back(std::move(comp));
    return m;
  }

private:
  int T_;
  double dt_;
};

class ConstantVelocityPredictor final : public Predictor {
public:
  ConstantVelocityPredictor(int T, double dt) : T_(T), dt_(dt) {}
  const char* name() const override { return "constant_velocity"; }

  TrajectoryMixture predict(const PredictionContext& ctx) override {
    const Track& past = ctx.ego_past;
    double vx = 0.0;
    double vy = 0.0;
    if (past.samples.size() >= 2) {
      const auto& a = past.samples[past.samples.size() - 2];
      const auto& b = past.samples.back();
      vx = (b.pose.x - a.pose.x) / (b.t - a.t);
      vy = (b.pose.y - a.pose.y) / (b.t - a.t);
    }
    TrajectoryMixture m;
    m.K = 1;
    m.T = T_;
    m.dt = dt_;
    mixture::MixtureComponent comp;
    comp.weight = 1.0;
    comp.coeffs_x = geometry::PolyCoeffs{{0.0, 0.0, 0.0, vx}};
    comp.coeffs_y = geometry::PolyCoeffs{{0.0, 0.0, 0.0, vy}};
    comp.sigma_x.assign(static_cast<size_t>(T_), 1.0);
    comp.sigma_y.assign(static_cast<size_t>(T_), 1.0);
    m.components.push_back(std::move(comp));
    return m;
  }

private:
  int T_;
  double dt_;
};

class StopPredictor final : public Predictor {
public:
  StopPredictor(int T, double dt) : T_(T), dt_(dt) {}
  const char* name() const override { return "stop"; }

  TrajectoryMixture predict(const PredictionContext&) override {
    TrajectoryMixture m;
    m.K = 1;
    m.T = T_;
    m.dt = dt_;
    mixture::MixtureComponent comp;
    comp.weight = 1.0;
    comp.sigma_x.assign(static_cast<size_t>(T_), 1.0);
    comp.sigma_y.assign(static_cast<size_t>(T_), 1.0);
    m.components.push_back(std::move(comp));
    return m;
  }

private:
  int T_;
  double dt_;
};

class ModelPredictor final : public Predictor {
public:
  explicit ModelPredictor(net::ModelParams params) : params_(std::move(params)) {}
  const char* name() const override { return "model"; }

  TrajectoryMixture predict(const PredictionContext& ctx) override {
    const net::NetConfig& cfg = params_.config;
    net::Features f;
    f.sample_id = ctx.log->id + ":" + std::to_string(ctx.frame);
    f.command = ctx.command;
    f.ego_in = net::ego_track_input(ctx.ego_past, cfg);

    // Neighbors tracked through the past window, nearest first, replayed
    // from the log but expressed in the simulated ego frame.
    const auto& frames = ctx.log->frames;
    const auto find_obs = [&frames](int frame, int id) -> const data::NeighborObs* {
      for (const auto& obs : frames[static_cast<size_t>(frame)].neighbors) {
        if (obs.id == id) return &obs;
      }
      return nullptr;
    };
    struct Candidate {
      int id;
      double dist;
    };
    std::vector<Candidate> candidates;
    for (const auto& obs : frames[static_cast<size_t>(ctx.frame)].neighbors) {
      bool complete = true;
      for (int i = ctx.frame - cfg.neighbor_past_steps; i <= ctx.frame && complete; ++i) {
        if (i < 0 || find_obs(i, obs.id) == nullptr) complete = false;
      }
      if (!complete) continue;
      candidates.push_back(Candidate{obs.id, std::hypot(obs.pose.x - ctx.ego_pose_global.x,
                                                        obs.pose.y - ctx.ego_pose_global.y)});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
    });
    if (static_cast<int>(candidates.size()) > cfg.max_neighbors) {
      candidates.resize(static_cast<size_t>(cfg.max_neighbors));
    }
    for (const auto& cand : candidates) {
      Track past;
      past.sample_rate = 1.0 / cfg.dt;
      for (int i = ctx.frame - cfg.neighbor_past_steps; i <= ctx.frame; ++i) {
        const auto* obs = find_obs(i, cand.id);
        past.samples.push_back(geometry::TrackSample{
            (i - ctx.frame) * cfg.dt, geometry::to_frame(obs->pose, ctx.ego_pose_global),
            obs->speed});
      }
      f.neighbor_in.push_back(net::neighbor_track_input(past, cfg));
    }

    if (cfg.ablate_bev) {
      f.bev_in.assign(static_cast<size_t>(cfg.bev_input()), 0.0);
    } else {
      std::vector<bev::SceneSnapshot> bev_history;
      bev_history.reserve(static_cast<size_t>(bev::kFrames));
      for (int i = ctx.frame - (bev::kFrames - 1); i <= ctx.frame; ++i) {
        bev::SceneSnapshot snap;
        const auto& fr = frames[static_cast<size_t>(std::max(i, 0))];
        for (const auto& obs : fr.neighbors) {
          snap.vehicles.push_back(data::to_vehicle_obs(obs));
        }
        snap.points = fr.points;
        bev_history.push_back(std::move(snap));
      }
      const bev::BevTensor tensor = bev::accumulate(bev_history, ctx.ego_pose_global);
      f.bev_in = net::bev_input(tensor, cfg);
    }
    return net::forward_ego(params_, f, ctx.command);
  }

private:
  net::ModelParams params_;
};

}  // namespace

std::unique_ptr<Predictor> make_oracle_predictor(int T, double dt) {
  return std::make_unique<OraclePredictor>(T, dt);
}
std::unique_ptr<Predictor> make_constant_velocity_predictor(int T, double dt) {
  return std::make_unique<ConstantVelocityPredictor>(T, dt);
}
std::unique_ptr<Predictor> make_stop_predictor(int T, double dt) {
  return std::make_unique<StopPredictor>(T, dt);
}
std::unique_ptr<Predictor> make_model_predictor(net::ModelParams params) {
  return std::make_unique<ModelPredictor>(std::move(params));
}

}  // namespace trajpred::sim
