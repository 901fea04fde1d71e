// Test-only oracles, independent of the library implementations they check:
// central finite differences, adaptive Simpson quadrature, and a plain
// brute-force reimplementation of every offline metric.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "trajpred/geometry.hpp"
#include "trajpred/mixture.hpp"
#include "trajpred/rng.hpp"

namespace oracles {

// Central finite differences of a scalar function of a parameter vector.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f(x);
    x[i] = keep - h;
    const double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Relative error with a unit floor, the usual gradient-check normalization.
inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double m, double b,
                      double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(f, a, lm, m, fa, flm, fm);
  const double right = simpson(f, m, rm, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-9, int depth = 40) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = simpson(f, a, m, b, fa, fm, fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// ---------------------------------------------------------------------------
// Brute-force metrics over raw (weights, mean paths, ground truth) tuples.
// Written directly from the formulas; shares nothing with the library.

struct RawAgent {
  std::vector<double> weights;                                // K
  std::vector<std::vector<std::pair<double, double>>> paths;  // K x T
  std::vector<std::pair<double, double>> gt;                  // T
};

struct BruteResult {
  double min_msd{0}, min_ade{0}, min_fde{0};
  double conf_msd{0}, conf_ade{0}, conf_fde{0};
  double weight_fde{0};
  double min_msd_x{0}, min_msd_y{0}, min_ade_x{0}, min_ade_y{0}, min_fde_x{0}, min_fde_y{0};
  double miss1{0}, miss5{0}, miss10{0};
};

inline BruteResult brute_metrics(const std::vector<RawAgent>& agents) {
  BruteResult r;
  const double n = static_cast<double>(agents.size());
  for (const auto& agent : agents) {
    const size_t K = agent.weights.size();
    const size_t T = agent.gt.size();
    std::vector<double> msd(K, 0), ade(K, 0), fde(K, 0);
    std::vector<double> msd_x(K, 0), msd_y(K, 0), ade_x(K, 0), ade_y(K, 0), fde_x(K, 0), fde_y(K, 0);
    for (size_t k = 0; k < K; ++k) {
      for (size_t t = 0; t < T; ++t) {
        const double dx = agent.paths[k][t].first - agent.gt[t].first;
        const double dy = agent.paths[k][t].second - agent.gt[t].second;
        msd[k] += (dx * dx + dy * dy) / T;
        msd_x[k] += dx * dx / T;
        msd_y[k] += dy * dy / T;
        ade[k] += std::sqrt(dx * dx + dy * dy) / T;
        ade_x[k] += std::abs(dx) / T;
        ade_y[k] += std::abs(dy) / T;
        if (t + 1 == T) {
          fde[k] = std::sqrt(dx * dx + dy * dy);
          fde_x[k] = std::abs(dx);
          fde_y[k] = std::abs(dy);
        }
      }
    }
    const auto minv = [](const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); };
    r.min_msd += minv(msd) / n;
    r.min_ade += minv(ade) / n;
    r.min_fde += minv(fde) / n;
    r.min_msd_x += minv(msd_x) / n;
    r.min_msd_y += minv(msd_y) / n;
    r.min_ade_x += minv(ade_x) / n;
    r.min_ade_y += minv(ade_y) / n;
    r.min_fde_x += minv(fde_x) / n;
    r.min_fde_y += minv(fde_y) / n;

    size_t conf = 0;
    for (size_t k = 1; k < K; ++k) {
      if (agent.weights[k] > agent.weights[conf]) conf = k;
    }
    r.conf_msd += msd[conf] / n;
    r.conf_ade += ade[conf] / n;
    r.conf_fde += fde[conf] / n;

    double wf = 0;
    for (size_t k = 0; k < K; ++k) wf += agent.weights[k] * fde[k];
    r.weight_fde += wf / n;

    std::vector<size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return agent.weights[a] > agent.weights[b]; });
    const auto miss = [&](size_t top) {
      for (size_t i = 0; i < std::min(top, K); ++i) {
        if (fde[order[i]] <= 2.0) return 0.0;
      }
      return 1.0;
    };
    r.miss1 += miss(1) / n;
    r.miss5 += miss(5) / n;
    r.miss10 += miss(10) / n;
  }
  return r;
}

// Random mixture + ground truth used by metric and density tests.
inline trajpred::mixture::TrajectoryMixture random_mixture(trajpred::Rng& rng, int K, int T,
                                                           double dt) {
  trajpred::mixture::TrajectoryMixture m;
  m.K = K;
  m.T = T;
  m.dt = dt;
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    trajpred::mixture::MixtureComponent comp;
    comp.weight = rng.uniform(0.05, 1.0);
    sum += comp.weight;
    for (auto& a : comp.coeffs_x.a) a = rng.uniform(-0.4, 0.4);
    for (auto& a : comp.coeffs_y.a) a = rng.uniform(-0.4, 0.4);
    for (int t = 0; t < T; ++t) {
      comp.sigma_x.push_back(rng.uniform(0.2, 2.5));
      comp.sigma_y.push_back(rng.uniform(0.2, 2.5));
    }
    m.components.push_back(std::move(comp));
  }
  for (auto& comp : m.components) comp.weight /= sum;
  return m;
}

inline trajpred::geometry::Track random_future(trajpred::Rng& rng, int T, double dt) {
  trajpred::geometry::Track gt;
  gt.sample_rate = 1.0 / dt;
  double x = 0.0;
  double y = 0.0;
  for (int t = 0; t < T; ++t) {
    x += rng.uniform(-0.2, 1.2);
    y += rng.uniform(-0.4, 0.4);
    gt.samples.push_back(
        trajpred::geometry::TrackSample{(t + 1) * dt, trajpred::geometry::Pose2{x, y, 0.0}, 0.0});
  }
  return gt;
}

inline RawAgent to_raw(const trajpred::mixture::TrajectoryMixture& m,
                       const trajpred::geometry::Track& gt) {
  RawAgent raw;
  for (int k = 0; k < m.K; ++k) {
    raw.weights.push_back(m.components[static_cast<size_t>(k)].weight);
    std::vector<std::pair<double, double>> path;
    for (int t = 0; t < m.T; ++t) {
      path.emplace_back(m.mean(trajpred::mixture::Axis::x, k, t),
                        m.mean(trajpred::mixture::Axis::y, k, t));
    }
    raw.paths.push_back(std::move(path));
  }
  for (int t = 0; t < m.T; ++t) {
    raw.gt.emplace_back(gt.samples[static_cast<size_t>(t)].pose.x,
                        gt.samples[static_cast<size_t>(t)].pose.y);
  }
  return raw;
}

}  // namespace oracles
