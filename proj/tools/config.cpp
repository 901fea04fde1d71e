#include "config.hpp"

#include <fstream>
#include <stdexcept>

#include "trajpred/hash.hpp"

namespace trajpred::cli {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json defaults() {
  const net::NetConfig net;
  const net::TrainConfig train;
  const data::CutConfig cut;
  const data::GenParams gen;
  const sim::SimConfig sim;
  ordered_json j;
  j["net"] = {{"K", net.K},
              {"T", net.T},
              {"dt", net.dt},
              {"ego_past_steps", net.ego_past_steps},
              {"neighbor_past_steps", net.neighbor_past_steps},
              {"max_neighbors", net.max_neighbors},
              {"track_hidden", net.track_hidden},
              {"track_encoding", net.track_encoding},
              {"bev_hidden", net.bev_hidden},
              {"bev_encoding", net.bev_encoding},
              {"head_hidden", net.head_hidden},
              {"bev_pool_x", net.bev_pool_x},
              {"bev_pool_y", net.bev_pool_y},
              {"ablate_bev", net.ablate_bev},
              {"ego_only", net.ego_only}};
  j["loss"] = {{"alpha", net.loss.alpha},
               {"log_sigma_min", net.loss.log_sigma_min},
               {"log_sigma_max", net.loss.log_sigma_max}};
  j["train"] = {{"lr", train.lr},        {"batch_size", train.batch_size},
                {"epochs", train.epochs}, {"seed", train.seed},
                {"beta1", train.beta1},   {"beta2", train.beta2},
                {"eps", train.eps},       {"parallel", train.parallel}};
  j["cut"] = {{"stride", cut.stride}, {"ground_z_threshold", cut.ground_z_threshold}};
  j["gen"] = {{"speed", gen.speed},
              {"turn_speed", gen.turn_speed},
              {"accel", gen.accel},
              {"approach_length", gen.approach_length},
              {"exit_length", gen.exit_length},
              {"turn_radius", gen.turn_radius},
              {"fork_angle_deg", gen.fork_angle_deg},
              {"fork_radius", gen.fork_radius},
              {"roundabout_radius", gen.roundabout_radius},
              {"roundabout_sweep_deg", gen.roundabout_sweep_deg},
              {"stop_dwell", gen.stop_dwell},
              {"neighbors", gen.neighbors},
              {"lead_gap", gen.lead_gap},
              {"lane_offset", gen.lane_offset},
              {"wall_offset", gen.wall_offset},
              {"point_spacing", gen.point_spacing},
              {"sensor_range", gen.sensor_range},
              {"point_z", gen.point_z},
              {"ground_speckle", gen.ground_speckle},
              {"fork_command_branch", gen.fork_command_branch},
              {"command_junction_radius", gen.command_junction_radius}};
  j["sim"] = {{"wheelbase", sim.wheelbase},
              {"dt", sim.dt},
              {"lateral_threshold", sim.lateral_threshold},
              {"speed_deficit_threshold", sim.speed_deficit_threshold},
              {"overspeed_ratio", sim.overspeed_ratio},
              {"catchup_horizon", sim.catchup_horizon},
              {"max_steer", sim.max_steer},
              {"accel_min", sim.accel_min},
              {"accel_max", sim.accel_max},
              {"control_horizon", sim.control_horizon},
              {"stop_distance", sim.stop_distance},
              {"warmup_frames", sim.warmup_frames},
              {"min_future_frames", sim.min_future_frames}};
  return j;
}

void merge_into(ordered_json& base, const ordered_json& overlay, const std::string& path) {
  for (const auto& [key, value] : overlay.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) {
      throw std::runtime_error("config: unknown key '" + where + "'");
    }
    if (base[key].is_object()) {
      if (!value.is_object()) throw std::runtime_error("config: '" + where + "' must be an object");
      merge_into(base[key], value, where);
    } else {
      base[key] = value;
    }
  }
}

void apply_set(ordered_json& base, const std::string& expr) {
  const auto eq = expr.find('=');
  if (eq == std::string::npos) {
    throw std::runtime_error("--set expects key=value, got '" + expr + "'");
  }
  const std::string key = expr.substr(0, eq);
  const std::string raw = expr.substr(eq + 1);
  ordered_json value;
  try {
    value = ordered_json::parse(raw);
  } catch (const std::exception&) {
    value = raw;  // unquoted strings are taken literally
  }

  ordered_json* node = &base;
  size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (!node->contains(part)) throw std::runtime_error("config: unknown key '" + key + "'");
    if (dot == std::string::npos) {
      if ((*node)[part].is_object()) {
        throw std::runtime_error("config: '" + key + "' is a section, not a value");
      }
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

template <typename T>
void bind(const ordered_json& section, const char* key, T& out) {
  out = section.at(key).get<T>();
}

}  // namespace

std::string AppConfig::hash() const { return to_hex(fnv1a64(effective.dump())); }

AppConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides) {
  ordered_json j = defaults();
  if (file.has_value()) {
    std::ifstream in(*file);
    if (!in) throw std::runtime_error("cannot open config file " + file->string());
    ordered_json overlay;
    try {
      overlay = ordered_json::parse(in);
    } catch (const std::exception& e) {
      throw std::runtime_error("config file " + file->string() + ": " + e.what());
    }
    merge_into(j, overlay, "");
  }
  for (const auto& expr : overrides) apply_set(j, expr);

  AppConfig cfg;
  cfg.effective = j;

  const auto& n = j["net"];
  bind(n, "K", cfg.net.K);
  bind(n, "T", cfg.net.T);
  bind(n, "dt", cfg.net.dt);
  bind(n, "ego_past_steps", cfg.net.ego_past_steps);
  bind(n, "neighbor_past_steps", cfg.net.neighbor_past_steps);
  bind(n, "max_neighbors", cfg.net.max_neighbors);
  bind(n, "track_hidden", cfg.net.track_hidden);
  bind(n, "track_encoding", cfg.net.track_encoding);
  bind(n, "bev_hidden", cfg.net.bev_hidden);
  bind(n, "bev_encoding", cfg.net.bev_encoding);
  bind(n, "head_hidden", cfg.net.head_hidden);
  bind(n, "bev_pool_x", cfg.net.bev_pool_x);
  bind(n, "bev_pool_y", cfg.net.bev_pool_y);
  bind(n, "ablate_bev", cfg.net.ablate_bev);
  bind(n, "ego_only", cfg.net.ego_only);

  const auto& l = j["loss"];
  bind(l, "alpha", cfg.net.loss.alpha);
  bind(l, "log_sigma_min", cfg.net.loss.log_sigma_min);
  bind(l, "log_sigma_max", cfg.net.loss.log_sigma_max);

  const auto& t = j["train"];
  bind(t, "lr", cfg.train.lr);
  bind(t, "batch_size", cfg.train.batch_size);
  bind(t, "epochs", cfg.train.epochs);
  bind(t, "seed", cfg.train.seed);
  bind(t, "beta1", cfg.train.beta1);
  bind(t, "beta2", cfg.train.beta2);
  bind(t, "eps", cfg.train.eps);
  bind(t, "parallel", cfg.train.parallel);

  const auto& c = j["cut"];
  bind(c, "stride", cfg.cut.stride);
  bind(c, "ground_z_threshold", cfg.cut.ground_z_threshold);
  cfg.cut.T = cfg.net.T;
  cfg.cut.ego_past_steps = cfg.net.ego_past_steps;
  cfg.cut.neighbor_past_steps = cfg.net.neighbor_past_steps;
  cfg.cut.max_neighbors = cfg.net.max_neighbors;

  const auto& g = j["gen"];
  bind(g, "speed", cfg.gen.speed);
  bind(g, "turn_speed", cfg.gen.turn_speed);
  bind(g, "accel", cfg.gen.accel);
  bind(g, "approach_length", cfg.gen.approach_length);
  bind(g, "exit_length", cfg.gen.exit_length);
  bind(g, "turn_radius", cfg.gen.turn_radius);
  bind(g, "fork_angle_deg", cfg.gen.fork_angle_deg);
  bind(g, "fork_radius", cfg.gen.fork_radius);
  bind(g, "roundabout_radius", cfg.gen.roundabout_radius);
  bind(g, "roundabout_sweep_deg", cfg.gen.roundabout_sweep_deg);
  bind(g, "stop_dwell", cfg.gen.stop_dwell);
  bind(g, "neighbors", cfg.gen.neighbors);
  bind(g, "lead_gap", cfg.gen.lead_gap);
  bind(g, "lane_offset", cfg.gen.lane_offset);
  bind(g, "wall_offset", cfg.gen.wall_offset);
  bind(g, "point_spacing", cfg.gen.point_spacing);
  bind(g, "sensor_range", cfg.gen.sensor_range);
  bind(g, "point_z", cfg.gen.point_z);
  bind(g, "ground_speckle", cfg.gen.ground_speckle);
  bind(g, "fork_command_branch", cfg.gen.fork_command_branch);
  bind(g, "command_junction_radius", cfg.gen.command_junction_radius);

  const auto& s = j["sim"];
  bind(s, "wheelbase", cfg.sim.wheelbase);
  bind(s, "dt", cfg.sim.dt);
  bind(s, "lateral_threshold", cfg.sim.lateral_threshold);
  bind(s, "speed_deficit_threshold", cfg.sim.speed_deficit_threshold);
  bind(s, "overspeed_ratio", cfg.sim.overspeed_ratio);
  bind(s, "catchup_horizon", cfg.sim.catchup_horizon);
  bind(s, "max_steer", cfg.sim.max_steer);
  bind(s, "accel_min", cfg.sim.accel_min);
  bind(s, "accel_max", cfg.sim.accel_max);
  bind(s, "control_horizon", cfg.sim.control_horizon);
  bind(s, "stop_distance", cfg.sim.stop_distance);
  bind(s, "warmup_frames", cfg.sim.warmup_frames);
  bind(s, "min_future_frames", cfg.sim.min_future_frames);

  return cfg;
}

}  // namespace trajpred::cli
