#include "trajpred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace trajpred::metrics {

bool PredictionSet::add(mixture::TrajectoryMixture m, geometry::Track gt) {
  if (m.T != T_ || std::abs(m.dt - dt_) > 1e-12) {
    throw std::invalid_argument("PredictionSet: mixture horizon does not match the set");
  }
  if (static_cast<int>(gt.samples.size()) < T_) {
    ++excluded_;
    return false;
  }
  if (static_cast<int>(gt.samples.size()) > T_) {
    gt.samples.resize(static_cast<size_t>(T_));
  }
  agents_.push_back(AgentPrediction{std::move(m), std::move(gt)});
  return true;
}

namespace {

using mixture::Axis;

struct ComponentError {
  double weight{0.0};
  double msd{0.0}, msd_x{0.0}, msd_y{0.0};
  double ade{0.0}, ade_x{0.0}, ade_y{0.0};
  double fde{0.0}, fde_x{0.0}, fde_y{0.0};
};

std::vector<ComponentError> agent_errors(const AgentPrediction& agent) {
  const auto& m = agent.mixture;
  std::vector<ComponentError> out(static_cast<size_t>(m.K));
  for (int k = 0; k < m.K; ++k) {
    ComponentError& e = out[static_cast<size_t>(k)];
    e.weight = m.components[static_cast<size_t>(k)].weight;
    for (int t = 0; t < m.T; ++t) {
      const auto& gt = agent.ground_truth.samples[static_cast<size_t>(t)].pose;
      const double dx = m.mean(Axis::x, k, t) - gt.x;
      const double dy = m.mean(Axis::y, k, t) - gt.y;
      const double sq = dx * dx + dy * dy;
      e.msd += sq;
      e.msd_x += dx * dx;
      e.msd_y += dy * dy;
      e.ade += std::sqrt(sq);
      e.ade_x += std::abs(dx);
      e.ade_y += std::abs(dy);
      if (t == m.T - 1) {
        e.fde = std::sqrt(sq);
        e.fde_x = std::abs(dx);
        e.fde_y = std::abs(dy);
      }
    }
    const double inv_t = 1.0 / m.T;
    e.msd *= inv_t;
    e.msd_x *= inv_t;
    e.msd_y *= inv_t;
    e.ade *= inv_t;
    e.ade_x *= inv_t;
    e.ade_y *= inv_t;
  }
  return out;
}

int conf_index(const std::vector<ComponentError>& errors) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(errors.size()); ++k) {
    if (errors[static_cast<size_t>(k)].weight > errors[static_cast<size_t>(best)].weight) best = k;
  }
  return best;
}

// Component order by descending weight, ascending index on ties; the same
// ranking rule as mixture::mode_summary.
std::vector<int> ranking(const std::vector<ComponentError>& errors) {
  std::vector<int> order(errors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&errors](int a, int b) {
    return errors[static_cast<size_t>(a)].weight > errors[static_cast<size_t>(b)].weight;
  });
  return order;
}

void require_agents(const PredictionSet& p) {
  if (p.empty()) throw std::invalid_argument("metrics: empty agent set");
}

template <typename Fn>
double mean_over_agents(const PredictionSet& p, Fn&& per_agent) {
  double sum = 0.0;
  for (const auto& agent : p.agents()) sum += per_agent(agent_errors(agent));
  return sum / static_cast<double>(p.agents().size());
}

double min_of(const std::vector<ComponentError>& errors, double ComponentError::* field) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : errors) best = std::min(best, e.*field);
  return best;
}

}  // namespace

MinMetrics min_metrics(const PredictionSet& p) {
  require_agents(p);
  MinMetrics r;
  r.msd = mean_over_agents(p, [](const auto& e) { return min_of(e, &ComponentError::msd); });
  r.ade = mean_over_agents(p, [](const auto& e) { return min_of(e, &ComponentError::ade); });
  r.fde = mean_over_agents(p, [](const auto& e) { return min_of(e, &ComponentError::fde); });
  return r;
}

MinMetrics conf_metrics(const PredictionSet& p) {
  require_agents(p);
  MinMetrics r;
  r.msd = mean_over_agents(p, [](const auto& e) { return e[static_cast<size_t>(conf_index(e))].msd; });
  r.ade = mean_over_agents(p, [](const auto& e) { return e[static_cast<size_t>(conf_index(e))].ade; });
  r.fde = mean_over_agents(p, [](const auto& e) { return e[static_cast<size_t>(conf_index(e))].fde; });
  return r;
}

double weight_fde(const PredictionSet& p) {
  require_agents(p);
  return mean_over_agents(p, [](const auto& errors) {
    double acc = 0.0;
    for (const auto& e : errors) acc += e.weight * e.fde;
    return acc;
  });
}

std::pair<double, double> axis_split(const PredictionSet& p, MetricId metric) {
  require_agents(p);
  const auto per_axis = [&p, metric](double ComponentError::* fx, double ComponentError::* fy) {
    const double x = mean_over_agents(p, [&](const auto& e) {
      switch (metric) {
        case MetricId::min_msd:
        case MetricId::min_ade:
        case MetricId::min_fde:
          return min_of(e, fx);
        case MetricId::conf_msd:
        case MetricId::conf_ade:
        case MetricId::conf_fde:
          return e[static_cast<size_t>(conf_index(e))].*fx;
        case MetricId::weight_fde: {
          double acc = 0.0;
          for (const auto& c : e) acc += c.weight * c.*fx;
          return acc;
        }
      }
      return 0.0;
    });
    const double y = mean_over_agents(p, [&](const auto& e) {
      switch (metric) {
        case MetricId::min_msd:
        case MetricId::min_ade:
        case MetricId::min_fde:
          return min_of(e, fy);
        case MetricId::conf_msd:
        case MetricId::conf_ade:
        case MetricId::conf_fde:
          return e[static_cast<size_t>(conf_index(e))].*fy;
        case MetricId::weight_fde: {
          double acc = 0.0;
          for (const auto& c : e) acc += c.weight * c.*fy;
          return acc;
        }
      }
      return 0.0;
    });
    return std::make_pair(x, y);
  };

  switch (metric) {
    case MetricId::min_msd:
    case MetricId::conf_msd:
      return per_axis(&ComponentError::msd_x, &ComponentError::msd_y);
    case MetricId::min_ade:
    case MetricId::conf_ade:
      return per_axis(&ComponentError::ade_x, &ComponentError::ade_y);
    case MetricId::min_fde:
    case MetricId::conf_fde:
    case MetricId::weight_fde:
      return per_axis(&ComponentError::fde_x, &ComponentError::fde_y);
  }
  return {0.0, 0.0};
}

double miss_rate(const PredictionSet& p, int top_k, double radius) {
  require_agents(p);
  if (top_k < 1) throw std::invalid_argument("miss_rate: top_k must be >= 1");
  int misses = 0;
  for (const auto& agent : p.agents()) {
    const auto errors = agent_errors(agent);
    const auto order = ranking(errors);
    const int k_used = std::min<int>(top_k, static_cast<int>(order.size()));
    bool hit = false;
    for (int i = 0; i < k_used && !hit; ++i) {
      hit = errors[static_cast<size_t>(order[static_cast<size_t>(i)])].fde <= radius;
    }
    if (!hit) ++misses;
  }
  return static_cast<double>(misses) / static_cast<double>(p.agents().size());
}

MetricReport compute_report(const PredictionSet& p, bool parallel) {
  require_agents(p);
  const auto& agents = p.agents();
  const int n = static_cast<int>(agents.size());
  std::vector<std::vector<ComponentError>> errors(static_cast<size_t>(n));
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < n; ++i) {
    errors[static_cast<size_t>(i)] = agent_errors(agents[static_cast<size_t>(i)]);
  }

  MetricReport r;
  r.agents = n;
  r.excluded = p.excluded();
  r.coverage = static_cast<double>(n) / static_cast<double>(n + p.excluded());
  r.per_agent_min_fde.reserve(static_cast<size_t>(n));
  r.per_agent_conf_fde.reserve(static_cast<size_t>(n));
  r.per_agent_weight_fde.reserve(static_cast<size_t>(n));

  int miss1 = 0;
  int miss5 = 0;
  int miss10 = 0;
  for (const auto& e : errors) {
    r.min_msd += min_of(e, &ComponentError::msd);
    r.min_msd_x += min_of(e, &ComponentError::msd_x);
    r.min_msd_y += min_of(e, &ComponentError::msd_y);
    r.min_ade += min_of(e, &ComponentError::ade);
    r.min_ade_x += min_of(e, &ComponentError::ade_x);
    r.min_ade_y += min_of(e, &ComponentError::ade_y);
    const double agent_min_fde = min_of(e, &ComponentError::fde);
    r.min_fde += agent_min_fde;
    r.min_fde_x += min_of(e, &ComponentError::fde_x);
    r.min_fde_y += min_of(e, &ComponentError::fde_y);

    const auto& conf = e[static_cast<size_t>(conf_index(e))];
    r.conf_msd += conf.msd;
    r.conf_msd_x += conf.msd_x;
    r.conf_msd_y += conf.msd_y;
    r.conf_ade += conf.ade;
    r.conf_ade_x += conf.ade_x;
    r.conf_ade_y += conf.ade_y;
    r.conf_fde += conf.fde;
    r.conf_fde_x += conf.fde_x;
    r.conf_fde_y += conf.fde_y;

    double wfde = 0.0;
    double wfde_x = 0.0;
    double wfde_y = 0.0;
    for (const auto& c : e) {
      wfde += c.weight * c.fde;
      wfde_x += c.weight * c.fde_x;
      wfde_y += c.weight * c.fde_y;
    }
    r.weight_fde += wfde;
    r.weight_fde_x += wfde_x;
    r.weight_fde_y += wfde_y;

    const auto order = ranking(e);
    const auto missed_at = [&](int top_k) {
      const int k_used = std::min<int>(top_k, static_cast<int>(order.size()));
      for (int i = 0; i < k_used; ++i) {
        if (e[static_cast<size_t>(order[static_cast<size_t>(i)])].fde <= 2.0) return false;
      }
      return true;
    };
    miss1 += missed_at(1) ? 1 : 0;
    miss5 += missed_at(5) ? 1 : 0;
    miss10 += missed_at(10) ? 1 : 0;

    r.per_agent_min_fde.push_back(agent_min_fde);
    r.per_agent_conf_fde.push_back(conf.fde);
    r.per_agent_weight_fde.push_back(wfde);
  }

  const double inv = 1.0 / static_cast<double>(n);
  for (double* field :
       {&r.min_msd, &r.min_msd_x, &r.min_msd_y, &r.min_ade, &r.min_ade_x, &r.min_ade_y, &r.min_fde,
        &r.min_fde_x, &r.min_fde_y, &r.conf_msd, &r.conf_msd_x, &r.conf_msd_y, &r.conf_ade,
        &r.conf_ade_x, &r.conf_ade_y, &r.conf_fde, &r.conf_fde_x, &r.conf_fde_y, &r.weight_fde,
        &r.weight_fde_x, &r.weight_fde_y}) {
    *field *= inv;
  }
  r.miss_rate_top1 = miss1 * inv;
  r.miss_rate_top5 = miss5 * inv;
  r.miss_rate_top10 = miss10 * inv;
  return r;
}

nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["minMSD"] = r.min_msd;
  j["minADE"] = r.min_ade;
  j["minFDE"] = r.min_fde;
  j["confMSD"] = r.conf_msd;
  j["confADE"] = r.conf_ade;
  j["confFDE"] = r.conf_fde;
  j["weightFDE"] = r.weight_fde;
  j["minMSD_x"] = r.min_msd_x;
  j["minMSD_y"] = r.min_msd_y;
  j["minADE_x"] = r.min_ade_x;
  j["minADE_y"] = r.min_ade_y;
  j["minFDE_x"] = r.min_fde_x;
  j["minFDE_y"] = r.min_fde_y;
  j["confMSD_x"] = r.conf_msd_x;
  j["confMSD_y"] = r.conf_msd_y;
  j["confADE_x"] = r.conf_ade_x;
  j["confADE_y"] = r.conf_ade_y;
  j["confFDE_x"] = r.conf_fde_x;
  j["confFDE_y"] = r.conf_fde_y;
  j["weightFDE_x"] = r.weight_fde_x;
  j["weightFDE_y"] = r.weight_fde_y;
  j["missRate2m_top1"] = r.miss_rate_top1;
  j["missRate2m_top5"] = r.miss_rate_top5;
  j["missRate2m_top10"] = r.miss_rate_top10;
  j["agents"] = r.agents;
  j["excluded"] = r.excluded;
  j["coverage"] = r.coverage;
  return j;
}

}  // namespace trajpred::metrics
