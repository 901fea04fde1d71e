#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trajpred/geometry.hpp"
#include "trajpred/mixture.hpp"

namespace trajpred::metrics {

struct AgentPrediction {
  mixture::TrajectoryMixture mixture;
  geometry::Track ground_truth;  // T samples
};

/// Predictions for a set of agents sharing one horizon. Agents whose ground
/// truth is shorter than T are excluded and counted instead of zero-padded.
class PredictionSet {
public:
  PredictionSet(int T, double dt) : T_(T), dt_(dt) {}

  // Returns true when the agent was included. Throws when the mixture's
  // horizon disagrees with the set's.
  bool add(mixture::TrajectoryMixture m, geometry::Track gt);

  const std::vector<AgentPrediction>& agents() const { return agents_; }
  int horizon() const { return T_; }
  double dt() const { return dt_; }
  int excluded() const { return excluded_; }
  bool empty() const { return agents_.empty(); }

private:
  int T_;
  double dt_;
  int excluded_{0};
  std::vector<AgentPrediction> agents_;
};

struct MinMetrics {
  double msd{0.0};
  double ade{0.0};
  double fde{0.0};
};

// Best-over-components errors, with the minimum taken independently per
// metric:
//   minMSD = (1/TN) sum_n min_k sum_t ||mu_nk(t) - mu*_n(t)||^2
//   minADE analogous with the norm, minFDE at the final step only.
MinMetrics min_metrics(const PredictionSet& p);

// Same formulas with k fixed to the highest-weight component per agent
// (ties broken toward the lowest component index).
MinMetrics conf_metrics(const PredictionSet& p);

// (1/N) sum_n sum_k pi_k ||mu_nk(T) - mu*_n(T)||
double weight_fde(const PredictionSet& p);

enum class MetricId { min_msd, min_ade, min_fde, conf_msd, conf_ade, conf_fde, weight_fde };

// The metric restricted to a single coordinate; returns (value_x, value_y).
std::pair<double, double> axis_split(const PredictionSet& p, MetricId metric);

// Fraction of agents whose top-k components (ranked by weight) all miss the
// final ground-truth point by more than `radius`. top_k > K is clamped to K.
double miss_rate(const PredictionSet& p, int top_k, double radius = 2.0);

/// The full offline evaluation record; serialized as a flat JSON document.
struct MetricReport {
  double min_msd{0.0}, min_ade{0.0}, min_fde{0.0};
  double conf_msd{0.0}, conf_ade{0.0}, conf_fde{0.0};
  double weight_fde{0.0};
  double min_msd_x{0.0}, min_msd_y{0.0};
  double min_ade_x{0.0}, min_ade_y{0.0};
  double min_fde_x{0.0}, min_fde_y{0.0};
  double conf_msd_x{0.0}, conf_msd_y{0.0};
  double conf_ade_x{0.0}, conf_ade_y{0.0};
  double conf_fde_x{0.0}, conf_fde_y{0.0};
  double weight_fde_x{0.0}, weight_fde_y{0.0};
  double miss_rate_top1{0.0}, miss_rate_top5{0.0}, miss_rate_top10{0.0};
  int agents{0};
  int excluded{0};
  double coverage{1.0};

  // Per-agent final errors, kept for cumulative-FDE curves (not part of the
  // flat JSON document).
  std::vector<double> per_agent_min_fde;
  std::vector<double> per_agent_conf_fde;
  std::vector<double> per_agent_weight_fde;
};

MetricReport compute_report(const PredictionSet& p, bool parallel = true);

nlohmann::ordered_json to_json(const MetricReport& r);

}  // namespace trajpred::metrics
