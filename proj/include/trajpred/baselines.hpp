#pragma once

#include <span>
#include <utility>
#include <vector>

#include "trajpred/geometry.hpp"
#include "trajpred/mixture.hpp"
#include "trajpred/net.hpp"

namespace trajpred::baselines {

struct CvPrediction {
  mixture::TrajectoryMixture mixture;
  bool zero_velocity_fallback{false};  // set when the track has one sample
};

// Linear extrapolation of the velocity between the last two samples,
// expressed relative to the track's final position. K=1, pi=1; sigma is a
// 1 m placeholder (baselines are evaluated on means only). The mean path is
// exactly representable: coefficients (0, 0, 0, v) per axis.
CvPrediction constant_velocity(const geometry::Track& past, int T, double dt);

// Rolls out four kinematic models (constant velocity, constant
// acceleration, constant speed + yaw rate, constant acceleration + yaw
// rate) with rates estimated from the last second of the past track, fits
// each rollout with the polynomial representation, and returns the fit with
// the minimum ADE against the ground-truth future. Model 1 is bit-identical
// to constant_velocity, so the oracle is never worse than it.
mixture::TrajectoryMixture physics_oracle(const geometry::Track& past,
                                          const geometry::Track& gt_future, int T, double dt);

// The past-only MLP baseline: the same network with the BEV input zeroed
// and neighbors dropped.
net::NetConfig past_mlp_config(net::NetConfig base);

struct RankedMode {
  double weight{0.0};
  std::vector<std::pair<double, double>> mean_path;
};

struct RankedAgent {
  bool fallback{false};  // out of BEV range, replaced by constant velocity
  std::vector<RankedMode> modes;
};

// Benchmark-style submission glue: per agent the top-k mean paths ranked by
// mixture weight; agents whose current position is outside the BEV grid are
// replaced by the constant-velocity prediction. `positions` and `pasts` are
// in the current ego frame.
std::vector<RankedAgent> rank_and_fallback(std::span<const mixture::TrajectoryMixture> predictions,
                                           std::span<const std::pair<double, double>> positions,
                                           std::span<const geometry::Track> pasts, int top_k,
                                           int T, double dt);

}  // namespace trajpred::baselines
