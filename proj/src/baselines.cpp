#include "trajpred/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trajpred/bev.hpp"

namespace trajpred::baselines {

using geometry::Track;
using mixture::TrajectoryMixture;

namespace {

TrajectoryMixture single_component(int T, double dt, const geometry::PolyCoeffs& cx,
                                   const geometry::PolyCoeffs& cy) {
  TrajectoryMixture m;
  m.K = 1;
  m.T = T;
  m.dt = dt;
  mixture::MixtureComponent comp;
  comp.weight = 1.0;
  comp.coeffs_x = cx;
  comp.coeffs_y = cy;
  comp.sigma_x.assign(static_cast<size_t>(T), 1.0);
  comp.sigma_y.assign(static_cast<size_t>(T), 1.0);
  m.components.push_back(std::move(comp));
  return m;
}

}  // namespace

CvPrediction constant_velocity(const Track& past, int T, double dt) {
  if (past.samples.empty()) throw std::invalid_argument("constant_velocity: empty track");
  CvPrediction out;
  double vx = 0.0;
  double vy = 0.0;
  if (past.samples.size() < 2) {
    out.zero_velocity_fallback = true;
  } else {
    const auto& a = past.samples[past.samples.size() - 2];
    const auto& b = past.samples.back();
    const double gap = b.t - a.t;
    vx = (b.pose.x - a.pose.x) / gap;
    vy = (b.pose.y - a.pose.y) / gap;
  }
  out.mixture = single_component(T, dt, geometry::PolyCoeffs{{0.0, 0.0, 0.0, vx}},
                                 geometry::PolyCoeffs{{0.0, 0.0, 0.0, vy}});
  return out;
}

namespace {

// Least-squares slope of (t, value) pairs.
double ls_slope(std::span<const std::pair<double, double>> pts) {
  if (pts.size() < 2) return 0.0;
  double mt = 0.0;
  double mv = 0.0;
  for (const auto& [t, v] : pts) {
    mt += t;
    mv += v;
  }
  mt /= static_cast<double>(pts.size());
  mv /= static_cast<double>(pts.size());
  double num = 0.0;
  double den = 0.0;
  for (const auto& [t, v] : pts) {
    num += (t - mt) * (v - mv);
    den += (t - mt) * (t - mt);
  }
  return den > 0.0 ? num / den : 0.0;
}

struct MotionEstimate {
  double vx{0.0}, vy{0.0};  // last-two-sample velocity (matches the CV baseline)
  double speed{0.0};
  double heading{0.0};
  double accel{0.0};
  double yaw_rate{0.0};
};

MotionEstimate estimate_motion(const Track& past) {
  MotionEstimate est;
  const auto& samples = past.samples;
  if (samples.size() < 2) return est;

  const auto& a = samples[samples.size() - 2];
  const auto& b = samples.back();
  const double gap = b.t - a.t;
  est.vx = (b.pose.x - a.pose.x) / gap;
  est.vy = (b.pose.y - a.pose.y) / gap;
  est.speed = std::hypot(est.vx, est.vy);
  est.heading = est.speed > 1e-6 ? std::atan2(est.vy, est.vx) : b.pose.yaw;

  // Rates over the last second of track.
  const double window = 1.0 + 1e-9;
  std::vector<std::pair<double, double>> speeds;
  std::vector<std::pair<double, double>> yaws;
  double unwrapped = 0.0;
  double prev_yaw = 0.0;
  bool first = true;
  for (size_t i = 1; i < samples.size(); ++i) {
    const double t = samples[i].t;
    if (b.t - t > window) continue;
    const double seg = samples[i].t - samples[i - 1].t;
    const double ds = std::hypot(samples[i].pose.x - samples[i - 1].pose.x,
                                 samples[i].pose.y - samples[i - 1].pose.y);
    speeds.emplace_back(t, ds / seg);
    if (first) {
      unwrapped = samples[i].pose.yaw;
      first = false;
    } else {
      unwrapped += geometry::normalize_angle(samples[i].pose.yaw - prev_yaw);
    }
    prev_yaw = samples[i].pose.yaw;
    yaws.emplace_back(t, unwrapped);
  }
  est.accel = ls_slope(speeds);
  est.yaw_rate = ls_slope(yaws);
  return est;
}

std::vector<std::pair<double, double>> rollout(const MotionEstimate& est, int model, int T,
                                               double dt) {
  std::vector<std::pair<double, double>> pts(static_cast<size_t>(T));
  if (model == 0) {  // constant velocity
    for (int t = 0; t < T; ++t) {
      const double tau = (t + 1) * dt;
      pts[static_cast<size_t>(t)] = {est.vx * tau, est.vy * tau};
    }
    return pts;
  }
  const double accel = (model == 1 || model == 3) ? est.accel : 0.0;
  const double yaw_rate = (model == 2 || model == 3) ? est.yaw_rate : 0.0;
  // Fine sub-stepped integration; exact enough for a fitted representation.
  const int substeps = 4;
  const double h = dt / substeps;
  double x = 0.0;
  double y = 0.0;
  double theta = est.heading;
  double v = est.speed;
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < substeps; ++s) {
      x += v * std::cos(theta) * h;
      y += v * std::sin(theta) * h;
      theta += yaw_rate * h;
      v = std::max(0.0, v + accel * h);
    }
    pts[static_cast<size_t>(t)] = {x, y};
  }
  return pts;
}

double path_ade(const std::vector<std::pair<double, double>>& path, const Track& gt) {
  double acc = 0.0;
  for (size_t t = 0; t < path.size(); ++t) {
    acc += std::hypot(path[t].first - gt.samples[t].pose.x, path[t].second - gt.samples[t].pose.y);
  }
  return acc / static_cast<double>(path.size());
}

}  // namespace

TrajectoryMixture physics_oracle(const Track& past, const Track& gt_future, int T, double dt) {
  if (static_cast<int>(gt_future.samples.size()) < T) {
    throw std::invalid_argument("physics_oracle: ground-truth future shorter than horizon");
  }
  const CvPrediction cv = constant_velocity(past, T, dt);
  if (cv.zero_velocity_fallback) return cv.mixture;

  const MotionEstimate est = estimate_motion(past);
  TrajectoryMixture best = cv.mixture;  // model 0, exact representation
  std::vector<std::pair<double, double>> cv_path(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    cv_path[static_cast<size_t>(t)] = {best.mean(mixture::Axis::x, 0, t),
                                       best.mean(mixture::Axis::y, 0, t)};
  }
  double best_ade = path_ade(cv_path, gt_future);

  for (int model = 1; model < 4; ++model) {
    const auto raw = rollout(est, model, T, dt);
    std::vector<std::pair<double, double>> pts_x(static_cast<size_t>(T));
    std::vector<std::pair<double, double>> pts_y(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
      const double tau = (t + 1) * dt;
      pts_x[static_cast<size_t>(t)] = {tau, raw[static_cast<size_t>(t)].first};
      pts_y[static_cast<size_t>(t)] = {tau, raw[static_cast<size_t>(t)].second};
    }
    geometry::PolyCoeffs cx;
    geometry::PolyCoeffs cy;
    try {
      cx = geometry::poly_fit(pts_x);
      cy = geometry::poly_fit(pts_y);
    } catch (const std::exception&) {
      continue;  // T < 4: the fitted representation is not available
    }
    TrajectoryMixture candidate = single_component(T, dt, cx, cy);
    std::vector<std::pair<double, double>> fitted(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
      fitted[static_cast<size_t>(t)] = {candidate.mean(mixture::Axis::x, 0, t),
                                        candidate.mean(mixture::Axis::y, 0, t)};
    }
    const double ade = path_ade(fitted, gt_future);
    if (ade < best_ade) {
      best_ade = ade;
      best = std::move(candidate);
    }
  }
  return best;
}

net::NetConfig past_mlp_config(net::NetConfig base) {
  base.ablate_bev = true;
  base.ego_only = true;
  return base;
}

std::vector<RankedAgent> rank_and_fallback(std::span<const TrajectoryMixture> predictions,
                                           std::span<const std::pair<double, double>> positions,
                                           std::span<const Track> pasts, int top_k, int T,
                                           double dt) {
  if (predictions.size() != positions.size() || predictions.size() != pasts.size()) {
    throw std::invalid_argument("rank_and_fallback: input spans must have equal length");
  }
  std::vector<RankedAgent> out(predictions.size());
  for (size_t n = 0; n < predictions.size(); ++n) {
    RankedAgent& agent = out[n];
    int ix = 0;
    int iy = 0;
    const bool in_range = bev::cell_index(positions[n].first, positions[n].second, ix, iy);
    const TrajectoryMixture* mix = &predictions[n];
    TrajectoryMixture cv_mix;
    if (!in_range) {
      agent.fallback = true;
      cv_mix = constant_velocity(pasts[n], T, dt).mixture;
      mix = &cv_mix;
    }
    const auto modes = mixture::mode_summary(*mix);
    const int k_used = std::min<int>(top_k, static_cast<int>(modes.size()));
    for (int k = 0; k < k_used; ++k) {
      agent.modes.push_back(RankedMode{modes[static_cast<size_t>(k)].weight,
                                       modes[static_cast<size_t>(k)].mean_path});
    }
  }
  return out;
}

}  // namespace trajpred::baselines
