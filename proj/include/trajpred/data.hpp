#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trajpred/bev.hpp"
#include "trajpred/geometry.hpp"

namespace trajpred::data {

enum class NavCommand { follow, left, straight, right };

const char* to_string(NavCommand c);
NavCommand command_from_string(const std::string& s);

struct NeighborObs {
  int id{0};
  geometry::Pose2 pose;  // global frame
  double speed{0.0};
  int cls{2};    // bev class code
  int state{3};  // bev state code
};

struct Frame {
  double t{0.0};
  geometry::Pose2 ego;
  double ego_speed{0.0};
  NavCommand command{NavCommand::follow};
  std::vector<NeighborObs> neighbors;
  std::vector<bev::LidarPoint> points;
};

// Footprint corners synthesized from the class dimensions (two-wheeler
// 2.0x0.8, car 4.5x1.9, truck 8.0x2.5).
bev::VehicleObs to_vehicle_obs(const NeighborObs& obs);

/// A recorded (or generated) drive at 10 Hz: the on-disk unit of the
/// line-delimited JSON scenario format "plop-scn/1".
struct ScenarioLog {
  std::string id;
  double dt{0.1};
  std::vector<Frame> frames;
};

// Parses and validates a scenario file. Malformed lines, non-uniform
// timestamps, unknown tokens and unstable neighbor ids raise
// std::runtime_error with the offending line or frame named.
ScenarioLog parse_scenario(const std::filesystem::path& path);
ScenarioLog parse_scenario(std::istream& in, const std::string& name);

// Canonical writer: parse(write(log)) == log bit-exactly.
void write_scenario(const ScenarioLog& log, std::ostream& out);
void write_scenario(const ScenarioLog& log, const std::filesystem::path& path);

/// One prediction instance cut from a log. All tracks are expressed in the
/// ego frame at the cut instant; future tracks of neighbors are additionally
/// re-anchored to each agent's own position at that instant so every
/// ground-truth future starts at the origin (matching the zero-constant
/// polynomial means).
struct SceneSample {
  std::string scenario_id;
  int frame_index{0};  // cut instant in the source log

  geometry::Track ego_past;  // ego_past_steps+1 samples, t in [-past, 0]
  std::vector<int> neighbor_ids;
  std::vector<geometry::Track> neighbor_pasts;  // ego frame
  std::vector<std::pair<double, double>> neighbor_positions;  // at t=0, ego frame
  bev::BevTensor bev;
  NavCommand command{NavCommand::follow};
  geometry::Track ego_future;                    // T samples, t = dt..T*dt
  std::vector<geometry::Track> neighbor_futures;  // re-anchored, T samples
};

struct CutConfig {
  int stride{5};
  int T{40};
  int ego_past_steps{20};       // displacement steps; 21 poses spanning 2 s
  int neighbor_past_steps{10};  // 11 poses spanning 1 s
  int max_neighbors{10};
  bool build_bev{true};
  double ground_z_threshold{0.3};
};

// Valid cut instants for the configured windows.
std::vector<int> sample_indices(const ScenarioLog& log, const CutConfig& cfg);

// Cut the sample anchored at log frame `index`.
SceneSample cut_sample_at(const ScenarioLog& log, int index, const CutConfig& cfg);

// All samples at the configured stride; empty (with a note on stderr) when
// the log is too short for a single window.
std::vector<SceneSample> cut_samples(const ScenarioLog& log, const CutConfig& cfg);

enum class ScenarioKind { straight, turn90, fork, roundabout, stop_and_go };

const char* to_string(ScenarioKind k);
ScenarioKind kind_from_string(const std::string& s);

struct GenParams {
  double speed{10.0};        // cruise speed, m/s
  double turn_speed{5.0};    // speed through arcs
  double accel{2.0};         // magnitude used for speed ramps
  double approach_length{60.0};
  double exit_length{60.0};
  double turn_radius{10.0};
  double fork_angle_deg{25.0};
  double fork_radius{25.0};
  double roundabout_radius{12.0};
  double roundabout_sweep_deg{270.0};
  double stop_dwell{2.0};    // seconds at rest for stop_and_go
  int neighbors{0};
  double lead_gap{15.0};
  double lane_offset{3.5};
  double wall_offset{5.0};
  double point_spacing{1.0};
  double sensor_range{35.0};
  double point_z{1.0};
  bool ground_speckle{true};
  bool fork_command_branch{false};  // false keeps `follow` through the fork
  double command_junction_radius{15.0};
  // Left as generation-time defaults; feasibility checks use these.
  double wheelbase{2.7};
  double max_steer{0.6};
};

ScenarioLog gen_synthetic(ScenarioKind kind, uint64_t seed, const GenParams& params);

// Seeded Gaussian jitter on ego and neighbor positions (ingestion hook,
// default off in all pipelines).
ScenarioLog apply_position_noise(const ScenarioLog& log, uint64_t seed, double stddev);

// True when every frame-to-frame yaw change is reachable by a bicycle model
// with the given wheelbase and steering limit.
bool is_dynamically_feasible(const ScenarioLog& log, double wheelbase, double max_steer,
                             std::string* why = nullptr);

}  // namespace trajpred::data
