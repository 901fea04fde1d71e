#include "trajpred/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace trajpred::mixture {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

const std::vector<double>& sigma_vec(const MixtureComponent& c, Axis axis) {
  return axis == Axis::x ? c.sigma_x : c.sigma_y;
}

const PolyCoeffs& coeffs(const MixtureComponent& c, Axis axis) {
  return axis == Axis::x ? c.coeffs_x : c.coeffs_y;
}

// log sum_k exp(terms[k]); -inf entries (zero-weight components) are inert.
double log_sum_exp(std::span<const double> terms) {
  double m = kNegInf;
  for (const double t : terms) m = std::max(m, t);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (const double t : terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

void check_pair(const TrajectoryMixture& m, const Track& gt, const char* who) {
  if (static_cast<int>(gt.samples.size()) != m.T) {
    throw std::invalid_argument(std::string("nll: ") + who + " ground truth has " +
                                std::to_string(gt.samples.size()) + " samples, mixture horizon is " +
                                std::to_string(m.T));
  }
}

}  // namespace

double TrajectoryMixture::mean(Axis axis, int k, int t_index) const {
  return geometry::poly_eval(coeffs(components[static_cast<size_t>(k)], axis), time_at(t_index));
}

double TrajectoryMixture::sigma(Axis axis, int k, int t_index) const {
  return sigma_vec(components[static_cast<size_t>(k)], axis)[static_cast<size_t>(t_index)];
}

void TrajectoryMixture::validate() const {
  if (K < 1) throw std::invalid_argument("TrajectoryMixture: K must be >= 1");
  if (T < 1) throw std::invalid_argument("TrajectoryMixture: T must be >= 1");
  if (dt <= 0.0) throw std::invalid_argument("TrajectoryMixture: dt must be positive");
  if (static_cast<int>(components.size()) != K) {
    throw std::invalid_argument("TrajectoryMixture: component count does not match K");
  }
  double sum = 0.0;
  for (const auto& c : components) {
    if (c.weight < 0.0) throw std::invalid_argument("TrajectoryMixture: negative weight");
    sum += c.weight;
    if (static_cast<int>(c.sigma_x.size()) != T || static_cast<int>(c.sigma_y.size()) != T) {
      throw std::invalid_argument("TrajectoryMixture: sigma length does not match T");
    }
    for (int t = 0; t < T; ++t) {
      if (!(c.sigma_x[static_cast<size_t>(t)] > 0.0) || !(c.sigma_y[static_cast<size_t>(t)] > 0.0)) {
        throw std::invalid_argument("TrajectoryMixture: sigma must be positive");
      }
    }
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("TrajectoryMixture: weights sum to " + std::to_string(sum));
  }
}

double log_density(const TrajectoryMixture& m, Axis axis, int t_index, double value) {
  std::vector<double> terms(static_cast<size_t>(m.K));
  for (int k = 0; k < m.K; ++k) {
    const auto& comp = m.components[static_cast<size_t>(k)];
    if (comp.weight <= 0.0) {
      terms[static_cast<size_t>(k)] = kNegInf;
      continue;
    }
    const double mu = m.mean(axis, k, t_index);
    const double sig = m.sigma(axis, k, t_index);
    const double z = (value - mu) / sig;
    terms[static_cast<size_t>(k)] =
        std::log(comp.weight) - 0.5 * z * z - std::log(sig) - 0.5 * kLogTwoPi;
  }
  return log_sum_exp(terms);
}

double density(const TrajectoryMixture& m, Axis axis, int t_index, double value) {
  return std::exp(log_density(m, axis, t_index, value));
}

namespace {

// Accumulates loss and (optionally) gradients for one mixture/track pair.
double accumulate_pair(const TrajectoryMixture& m, const Track& gt, const LossConfig& cfg,
                       MixtureGrad* grad) {
  const size_t K = static_cast<size_t>(m.K);
  std::vector<double> terms(K);
  std::vector<double> resp(K);
  double loss = 0.0;

  for (int t = 0; t < m.T; ++t) {
    const auto& sample = gt.samples[static_cast<size_t>(t)];
    for (const Axis axis : {Axis::x, Axis::y}) {
      const double value = axis == Axis::x ? sample.pose.x : sample.pose.y;
      const double w = axis == Axis::x ? 1.0 : cfg.alpha;

      for (size_t k = 0; k < K; ++k) {
        const auto& comp = m.components[k];
        if (comp.weight <= 0.0) {
          terms[k] = kNegInf;
          continue;
        }
        const double mu = m.mean(axis, static_cast<int>(k), t);
        const double sig = m.sigma(axis, static_cast<int>(k), t);
        const double z = (value - mu) / sig;
        terms[k] = std::log(comp.weight) - 0.5 * z * z - std::log(sig) - 0.5 * kLogTwoPi;
      }
      const double logp = log_sum_exp(terms);
      loss -= w * logp;
      if (grad == nullptr) continue;

      for (size_t k = 0; k < K; ++k) {
        resp[k] = terms[k] == kNegInf ? 0.0 : std::exp(terms[k] - logp);
      }
      const double tau = m.time_at(t);
      const double tau_pow[4] = {tau * tau * tau * tau, tau * tau * tau, tau * tau, tau};
      for (size_t k = 0; k < K; ++k) {
        // d(-log p)/d logit_k, through softmax; responsibilities sum to 1.
        grad->d_logits[k] += w * (m.components[k].weight - resp[k]);
        if (resp[k] == 0.0) continue;
        const double mu = m.mean(axis, static_cast<int>(k), t);
        const double sig = m.sigma(axis, static_cast<int>(k), t);
        const double diff = value - mu;
        const double dmu = -resp[k] * diff / (sig * sig);
        auto& dcoeff = axis == Axis::x ? grad->d_coeffs_x[k] : grad->d_coeffs_y[k];
        for (int d = 0; d < 4; ++d) dcoeff[static_cast<size_t>(d)] += w * dmu * tau_pow[d];
        auto& dls = axis == Axis::x ? grad->d_log_sigma_x : grad->d_log_sigma_y;
        dls[k * static_cast<size_t>(m.T) + static_cast<size_t>(t)] +=
            w * (-resp[k] * (diff * diff / (sig * sig) - 1.0));
      }
    }
  }
  return loss;
}

MixtureGrad make_grad(const TrajectoryMixture& m) {
  MixtureGrad g;
  const size_t K = static_cast<size_t>(m.K);
  g.d_logits.assign(K, 0.0);
  g.d_coeffs_x.assign(K, {0.0, 0.0, 0.0, 0.0});
  g.d_coeffs_y.assign(K, {0.0, 0.0, 0.0, 0.0});
  g.d_log_sigma_x.assign(K * static_cast<size_t>(m.T), 0.0);
  g.d_log_sigma_y.assign(K * static_cast<size_t>(m.T), 0.0);
  return g;
}

}  // namespace

double nll_loss(const TrajectoryMixture* ego, const Track* gt_ego,
                std::span<const TrajectoryMixture> neighbors,
                std::span<const Track> gt_neighbors, const LossConfig& cfg) {
  if ((ego == nullptr) != (gt_ego == nullptr)) {
    throw std::invalid_argument("nll: ego mixture and ground truth must both be present or absent");
  }
  if (neighbors.size() != gt_neighbors.size()) {
    throw std::invalid_argument("nll: neighbor mixture/ground-truth count mismatch");
  }
  double loss = 0.0;
  if (ego != nullptr) {
    check_pair(*ego, *gt_ego, "ego");
    loss += accumulate_pair(*ego, *gt_ego, cfg, nullptr);
  }
  for (size_t n = 0; n < neighbors.size(); ++n) {
    check_pair(neighbors[n], gt_neighbors[n], "neighbor");
    loss += accumulate_pair(neighbors[n], gt_neighbors[n], cfg, nullptr);
  }
  return loss;
}

LossGrad nll_grad(const TrajectoryMixture* ego, const Track* gt_ego,
                  std::span<const TrajectoryMixture> neighbors,
                  std::span<const Track> gt_neighbors, const LossConfig& cfg) {
  if ((ego == nullptr) != (gt_ego == nullptr)) {
    throw std::invalid_argument("nll: ego mixture and ground truth must both be present or absent");
  }
  if (neighbors.size() != gt_neighbors.size()) {
    throw std::invalid_argument("nll: neighbor mixture/ground-truth count mismatch");
  }
  LossGrad out;
  if (ego != nullptr) {
    check_pair(*ego, *gt_ego, "ego");
    out.has_ego = true;
    out.ego = make_grad(*ego);
    out.loss += accumulate_pair(*ego, *gt_ego, cfg, &out.ego);
  }
  out.neighbors.reserve(neighbors.size());
  for (size_t n = 0; n < neighbors.size(); ++n) {
    check_pair(neighbors[n], gt_neighbors[n], "neighbor");
    out.neighbors.push_back(make_grad(neighbors[n]));
    out.loss += accumulate_pair(neighbors[n], gt_neighbors[n], cfg, &out.neighbors.back());
  }
  return out;
}

std::vector<ModeSummary> mode_summary(const TrajectoryMixture& m) {
  std::vector<ModeSummary> out;
  out.reserve(static_cast<size_t>(m.K));
  for (int k = 0; k < m.K; ++k) {
    ModeSummary s;
    s.component = k;
    s.weight = m.components[static_cast<size_t>(k)].weight;
    s.mean_path.reserve(static_cast<size_t>(m.T));
    for (int t = 0; t < m.T; ++t) {
      s.mean_path.emplace_back(m.mean(Axis::x, k, t), m.mean(Axis::y, k, t));
    }
    s.final_point = s.mean_path.back();
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ModeSummary& a, const ModeSummary& b) { return a.weight > b.weight; });
  return out;
}

}  // namespace trajpred::mixture
