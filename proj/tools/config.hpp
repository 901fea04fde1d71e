#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajpred/data.hpp"
#include "trajpred/net.hpp"
#include "trajpred/sim.hpp"

namespace trajpred::cli {

/// Effective tool configuration: defaults, overlaid by a JSON config file,
/// overlaid by --set key=value pairs (CLI > file > defaults). The cut
/// windows are slaved to the net config so there is a single source of
/// truth for horizons.
struct AppConfig {
  net::NetConfig net;
  net::TrainConfig train;
  data::CutConfig cut;
  data::GenParams gen;
  sim::SimConfig sim;
  nlohmann::ordered_json effective;  // canonical form, hashed for provenance

  std::string hash() const;
};

AppConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides);

}  // namespace trajpred::cli
