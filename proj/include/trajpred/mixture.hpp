#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "trajpred/geometry.hpp"

namespace trajpred::mixture {

using geometry::Axis;
using geometry::PolyCoeffs;
using geometry::Track;

struct MixtureComponent {
  double weight{1.0};       // pi_k
  PolyCoeffs coeffs_x;      // longitudinal mean polynomial
  PolyCoeffs coeffs_y;      // lateral mean polynomial
  std::vector<double> sigma_x;  // T per-step standard deviations, meters
  std::vector<double> sigma_y;
};

/// Per-axis Gaussian mixture over future positions. Weights are shared
/// across axes and timesteps; each component's mean path is a degree-4
/// polynomial of time with zero constant term, so every mean path passes
/// through the origin at t = 0. Step index i corresponds to time (i+1)*dt.
struct TrajectoryMixture {
  int K{1};
  int T{1};
  double dt{0.1};
  std::vector<MixtureComponent> components;

  double time_at(int t_index) const { return (t_index + 1) * dt; }
  double mean(Axis axis, int k, int t_index) const;
  double sigma(Axis axis, int k, int t_index) const;
  // Throws std::invalid_argument if any invariant is violated: weights on
  // the simplex (sum within 1e-9), all sigma positive, sizes consistent.
  void validate() const;
};

struct LossConfig {
  double alpha{3.0};  // lateral loss weight
  double log_sigma_min{-3.0};
  double log_sigma_max{4.0};
};

// Mixture density for one axis at one timestep, evaluated in log space with
// log-sum-exp and exponentiated at the end. Units 1/m.
double density(const TrajectoryMixture& m, Axis axis, int t_index, double value);

// log of the above; the building block of the loss.
double log_density(const TrajectoryMixture& m, Axis axis, int t_index, double value);

// Negative log-likelihood over all sampled points of the ground-truth ego
// and neighbor tracks:
//   L = -sum_t [ log p_ego(x(t)) + alpha*log p_ego(y(t))
//                + sum_n ( log p_n(x_n(t)) + alpha*log p_n(y_n(t)) ) ]
// `ego` may be null (neighbor-only scenes); ground-truth tracks must have
// exactly T samples or the call throws.
double nll_loss(const TrajectoryMixture* ego, const Track* gt_ego,
                std::span<const TrajectoryMixture> neighbors,
                std::span<const Track> gt_neighbors, const LossConfig& cfg);

/// Gradient of nll_loss with respect to one mixture's parameters under the
/// softmax / clamped-exp parameterization: d_logits is the gradient through
/// softmax(pi), d_log_sigma_* is with respect to the effective log(sigma)
/// (the caller applies the clamp mask when chaining to raw outputs).
struct MixtureGrad {
  std::vector<double> d_logits;                    // K
  std::vector<std::array<double, 4>> d_coeffs_x;   // K x 4
  std::vector<std::array<double, 4>> d_coeffs_y;   // K x 4
  std::vector<double> d_log_sigma_x;               // K*T, [k*T + t]
  std::vector<double> d_log_sigma_y;               // K*T
};

struct LossGrad {
  double loss{0.0};
  bool has_ego{false};
  MixtureGrad ego;
  std::vector<MixtureGrad> neighbors;
};

LossGrad nll_grad(const TrajectoryMixture* ego, const Track* gt_ego,
                  std::span<const TrajectoryMixture> neighbors,
                  std::span<const Track> gt_neighbors, const LossConfig& cfg);

/// One mixture component, summarized for ranking and control.
struct ModeSummary {
  int component{0};
  double weight{0.0};
  std::pair<double, double> final_point;
  std::vector<std::pair<double, double>> mean_path;  // T points
};

// Components sorted by descending weight; ties keep ascending component
// index.
std::vector<ModeSummary> mode_summary(const TrajectoryMixture& m);

}  // namespace trajpred::mixture
