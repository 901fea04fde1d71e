#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "trajpred/data.hpp"
#include "trajpred/geometry.hpp"
#include "trajpred/mixture.hpp"
#include "trajpred/net.hpp"

namespace trajpred::sim {

struct SimState {
  geometry::Pose2 pose;
  double speed{0.0};  // >= 0, reverse out of scope
  double time{0.0};
};

struct SimConfig {
  double wheelbase{2.7};
  double dt{0.1};
  double lateral_threshold{1.0};           // m off the expert path
  double speed_deficit_threshold{5.556};   // 20 kph
  double overspeed_ratio{1.15};
  double catchup_horizon{0.6};             // s, imminent-overtake window
  double max_steer{0.6};
  double accel_min{-6.0};
  double accel_max{3.0};
  double control_horizon{1.0};             // chase the 1 s trajectory point
  double stop_distance{0.05};              // degenerate-target rule
  int warmup_frames{20};                   // expert frames replayed before control
  int min_future_frames{10};               // stop when fewer log frames remain
};

// Kinematic bicycle integration over one step; steer and accel are clamped
// to the configured limits.
SimState bicycle_step(const SimState& state, double steer, double accel, const SimConfig& cfg);

struct Control {
  double steer{0.0};
  double accel{0.0};
};

// Pure pursuit toward the most confident component's mean at
// t = control_horizon, evaluated analytically from the polynomial. A target
// closer than stop_distance requests a stop.
Control track_point_controller(const mixture::TrajectoryMixture& ego, const SimState& state,
                               const SimConfig& cfg);

enum class ErrorKind { lateral, high, low };
const char* to_string(ErrorKind k);

struct ErrorEvent {
  ErrorKind kind;
  double time{0.0};
  double x{0.0};
  double y{0.0};
};

struct SimReport {
  std::string scenario_id;
  std::string predictor;
  bool valid{true};
  std::string abort_reason;
  int lateral_count{0};
  int high_count{0};
  int low_count{0};
  double distance_driven{0.0};
  std::vector<ErrorEvent> events;
};

/// What a predictor sees each step: the simulated ego history (already in
/// the current simulated ego frame) plus the log for replayed neighbors.
struct PredictionContext {
  const data::ScenarioLog* log{nullptr};
  int frame{0};  // synchronized log frame index
  geometry::Track ego_past;  // ends at the origin at t=0
  geometry::Pose2 ego_pose_global;
  double ego_speed{0.0};
  data::NavCommand command{data::NavCommand::follow};
};

class Predictor {
public:
  virtual ~Predictor() = default;
  virtual const char* name() const = 0;
  // Ego mixture in the current simulated ego frame.
  virtual mixture::TrajectoryMixture predict(const PredictionContext& ctx) = 0;
};

// Simulate the ego from the scenario start: each step re-invokes the
// predictor with the simulated history and a BEV rebuilt around the
// simulated pose; neighbors replay open-loop from the log. Error detectors
// run with hysteresis (a condition must clear before it counts again):
//   lateral: cross-track distance to the piecewise-linear expert path > 1 m
//   low:     sim speed <= expert speed - 20 kph
//   high:    sim speed >= 1.15 x expert speed, strictly faster, and the
//            sim's along-path position would overtake the expert's within
//            catchup_horizon at the current closure rate
// A predictor failure aborts with a partial report flagged invalid.
SimReport run_closed_loop(const data::ScenarioLog& log, Predictor& predictor, const SimConfig& cfg,
                          std::ostream* trace = nullptr);

// Built-in predictors. The oracle emits the expert's true future (fitted
// with the polynomial representation) as a K=1 mixture.
std::unique_ptr<Predictor> make_oracle_predictor(int T, double dt);
std::unique_ptr<Predictor> make_constant_velocity_predictor(int T, double dt);
std::unique_ptr<Predictor> make_stop_predictor(int T, double dt);
std::unique_ptr<Predictor> make_model_predictor(net::ModelParams params);

}  // namespace trajpred::sim
