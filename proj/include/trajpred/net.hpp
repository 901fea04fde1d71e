#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajpred/data.hpp"
#include "trajpred/mixture.hpp"

namespace trajpred::net {

using data::NavCommand;

/// Architecture description. Encoders are compact feed-forward maps; the
/// ego predictor keeps the 4x3 command-conditioned FC head structure and the
/// neighbor head is a single 3-layer FC stack shared across neighbors.
struct NetConfig {
  int K{12};
  int T{40};
  double dt{0.1};
  int ego_past_steps{20};       // displacement steps (21 poses over 2 s)
  int neighbor_past_steps{10};  // 11 poses over 1 s
  int max_neighbors{10};
  int track_hidden{32};
  int track_encoding{32};
  int bev_hidden{32};
  int bev_encoding{32};
  int head_hidden{64};
  int bev_pool_x{12};  // per-frame average pooling grid
  int bev_pool_y{7};
  bool ablate_bev{false};  // zero the BEV input vector
  bool ego_only{false};    // drop neighbor tracks and losses (past-only MLP)
  mixture::LossConfig loss;

  int ego_input() const { return 2 * ego_past_steps; }
  int neighbor_input() const { return 2 * neighbor_past_steps + 2; }
  int bev_input() const { return bev::kFrames * bev_pool_x * bev_pool_y * bev::kChannels; }
  int head_input() const { return bev_encoding + track_encoding; }
  // Per head: K pi-logits, K*4 coefficients per axis, K*T log-sigma per axis.
  int head_output() const { return K * 9 + 2 * K * T; }

  // 64-bit hash over every layout-affecting field; stored in parameter
  // files and checked on load.
  uint64_t fingerprint() const;
};

/// All weights as one flat vector; every parameter is addressable by index.
struct ModelParams {
  NetConfig config;
  std::vector<double> values;
};

int param_count(const NetConfig& cfg);

// Deterministic Xavier-uniform initialization; all biases zero so initial
// sigma is 1 m and initial mixture weights are uniform.
ModelParams init_params(const NetConfig& cfg, uint64_t seed);

// Binary parameter file: "PLP1" magic, 64-bit LE fingerprint, then LE
// 64-bit floats in flat order. load_params rejects mismatched fingerprints
// and truncated files.
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path, const NetConfig& expected);

/// Network inputs plus the ground truth needed to train or evaluate on one
/// scene. Tracks are kept alongside the flattened inputs so baselines can
/// run on the same dataset.
struct Features {
  std::string sample_id;
  NavCommand command{NavCommand::follow};
  std::vector<double> ego_in;
  std::vector<std::vector<double>> neighbor_in;
  std::vector<double> bev_in;

  geometry::Track ego_past;
  std::vector<geometry::Track> neighbor_pasts;
  std::vector<std::pair<double, double>> neighbor_positions;
  geometry::Track ego_future;
  std::vector<geometry::Track> neighbor_futures;
};

// Input builders (validated lengths). The BEV tensor is average-pooled per
// frame to the configured coarse grid and flattened oldest-first.
std::vector<double> ego_track_input(const geometry::Track& past, const NetConfig& cfg);
std::vector<double> neighbor_track_input(const geometry::Track& past, const NetConfig& cfg);
std::vector<double> bev_input(const bev::BevTensor& tensor, const NetConfig& cfg);

Features extract_features(const data::SceneSample& sample, const NetConfig& cfg);

struct ForwardResult {
  std::array<mixture::TrajectoryMixture, 4> ego;  // one mixture per command
  std::vector<mixture::TrajectoryMixture> neighbors;
};

// Pure forward pass; throws when the neighbor count exceeds the configured
// maximum. All four ego heads are evaluated; callers select by command.
ForwardResult forward(const ModelParams& params, const Features& features);
ForwardResult forward(const ModelParams& params, const data::SceneSample& sample);

// Ego head for a single command (used by the closed-loop predictor).
mixture::TrajectoryMixture forward_ego(const ModelParams& params, const Features& features,
                                       NavCommand command);

// Loss of one sample under the conditional-branch convention: the ego term
// uses the head matching the sample's command, neighbors use the shared
// head (skipped entirely when ego_only is set).
double sample_loss(const ModelParams& params, const Features& features);

struct GradResult {
  double loss{0.0};
  std::vector<double> grad;  // same layout as ModelParams::values
};

// Analytic gradient of sample_loss with respect to every parameter.
GradResult sample_gradient(const ModelParams& params, const Features& features);

// Mean loss/gradient over a batch. The parallel kernel computes per-sample
// gradients into independent buffers and reduces them in sample order, so
// it is bit-identical to the serial reference for any thread count.
GradResult batch_gradient(const ModelParams& params, std::span<const Features> batch,
                          bool parallel = true);
GradResult batch_gradient_serial(const ModelParams& params, std::span<const Features> batch);

struct TrainConfig {
  double lr{1e-3};
  int batch_size{8};
  int epochs{40};
  uint64_t seed{1};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
  bool parallel{true};
};

/// Adam with bias correction over an owned parameter vector. Steps are
/// deterministic given (params, batch, step counter).
class AdamTrainer {
public:
  AdamTrainer(ModelParams params, TrainConfig cfg);

  // One optimizer update from one batch; returns the batch mean loss.
  // Throws on non-finite loss, naming the offending sample.
  double train_step(std::span<const Features> batch);

  const ModelParams& params() const { return params_; }
  ModelParams take_params() { return std::move(params_); }
  int64_t steps() const { return step_; }

private:
  ModelParams params_;
  TrainConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  int64_t step_{0};
};

}  // namespace trajpred::net
