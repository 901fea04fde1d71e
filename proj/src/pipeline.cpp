#include "trajpred/pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "trajpred/baselines.hpp"
#include "trajpred/rng.hpp"

namespace trajpred::pipeline {

std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir, const data::CutConfig& cut,
                     const net::NetConfig& net_cfg) {
  Dataset dataset;
  for (const auto& path : list_scenarios(dir)) {
    const data::ScenarioLog log = data::parse_scenario(path);
    for (const int index : data::sample_indices(log, cut)) {
      const data::SceneSample sample = data::cut_sample_at(log, index, cut);
      dataset.agent_counts.push_back(1 + static_cast<int>(sample.neighbor_pasts.size()));
      dataset.samples.push_back(net::extract_features(sample, net_cfg));
    }
  }
  return dataset;
}

Dataset load_dataset(const std::vector<data::ScenarioLog>& logs, const data::CutConfig& cut,
                     const net::NetConfig& net_cfg) {
  Dataset dataset;
  for (const auto& log : logs) {
    for (const int index : data::sample_indices(log, cut)) {
      const data::SceneSample sample = data::cut_sample_at(log, index, cut);
      dataset.agent_counts.push_back(1 + static_cast<int>(sample.neighbor_pasts.size()));
      dataset.samples.push_back(net::extract_features(sample, net_cfg));
    }
  }
  return dataset;
}

TrainResult run_training(const Dataset& dataset, const net::NetConfig& net_cfg,
                         const net::TrainConfig& train_cfg) {
  if (dataset.samples.empty()) throw std::runtime_error("run_training: empty dataset");
  net::AdamTrainer trainer(net::init_params(net_cfg, train_cfg.seed), train_cfg);
  Rng shuffle_rng(train_cfg.seed ^ 0x7261696eULL);

  std::vector<int> order(dataset.samples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<net::Features> batch;
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t i = 0; i < order.size(); i += static_cast<size_t>(train_cfg.batch_size)) {
      batch.clear();
      for (size_t j = i; j < std::min(order.size(), i + static_cast<size_t>(train_cfg.batch_size));
           ++j) {
        batch.push_back(dataset.samples[static_cast<size_t>(order[j])]);
      }
      epoch_loss += trainer.train_step(batch);
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / batches);
  }
  result.params = trainer.take_params();
  return result;
}

EvalPredictor eval_predictor_from_string(const std::string& s) {
  if (s == "model") return EvalPredictor::model;
  if (s == "constant_velocity") return EvalPredictor::constant_velocity;
  if (s == "physics_oracle") return EvalPredictor::physics_oracle;
  throw std::runtime_error("unknown eval predictor '" + s + "'");
}

namespace {

struct SamplePredictions {
  std::vector<mixture::TrajectoryMixture> mixtures;  // ego first, then neighbors
  std::vector<const geometry::Track*> ground_truths;
};

SamplePredictions predict_sample(const net::Features& f, EvalPredictor predictor,
                                 const net::ModelParams* params, int T, double dt) {
  SamplePredictions out;
  switch (predictor) {
    case EvalPredictor::model: {
      const net::ForwardResult fwd = net::forward(*params, f);
      out.mixtures.push_back(fwd.ego[static_cast<size_t>(f.command)]);
      out.ground_truths.push_back(&f.ego_future);
      for (size_t n = 0; n < fwd.neighbors.size(); ++n) {
        out.mixtures.push_back(fwd.neighbors[n]);
        out.ground_truths.push_back(&f.neighbor_futures[n]);
      }
      break;
    }
    case EvalPredictor::constant_velocity: {
      out.mixtures.push_back(baselines::constant_velocity(f.ego_past, T, dt).mixture);
      out.ground_truths.push_back(&f.ego_future);
      for (size_t n = 0; n < f.neighbor_pasts.size(); ++n) {
        out.mixtures.push_back(baselines::constant_velocity(f.neighbor_pasts[n], T, dt).mixture);
        out.ground_truths.push_back(&f.neighbor_futures[n]);
      }
      break;
    }
    case EvalPredictor::physics_oracle: {
      out.mixtures.push_back(baselines::physics_oracle(f.ego_past, f.ego_future, T, dt));
      out.ground_truths.push_back(&f.ego_future);
      for (size_t n = 0; n < f.neighbor_pasts.size(); ++n) {
        out.mixtures.push_back(
            baselines::physics_oracle(f.neighbor_pasts[n], f.neighbor_futures[n], T, dt));
        out.ground_truths.push_back(&f.neighbor_futures[n]);
      }
      break;
    }
  }
  return out;
}

std::string agent_count_key(int count) {
  if (count >= 6) return "6+";
  return std::to_string(count);
}

}  // namespace

EvalResult evaluate(const Dataset& dataset, EvalPredictor predictor,
                    const net::ModelParams* params, int T, double dt, bool parallel) {
  if (dataset.samples.empty()) throw std::runtime_error("evaluate: empty dataset");
  if (predictor == EvalPredictor::model && params == nullptr) {
    throw std::runtime_error("evaluate: model predictor needs parameters");
  }

  const int n = static_cast<int>(dataset.samples.size());
  std::vector<SamplePredictions> predictions(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < n; ++i) {
    predictions[static_cast<size_t>(i)] =
        predict_sample(dataset.samples[static_cast<size_t>(i)], predictor, params, T, dt);
  }

  metrics::PredictionSet overall(T, dt);
  std::map<std::string, metrics::PredictionSet> groups;
  for (int i = 0; i < n; ++i) {
    const auto key = agent_count_key(dataset.agent_counts[static_cast<size_t>(i)]);
    auto [it, inserted] = groups.try_emplace(key, T, dt);
    auto& pred = predictions[static_cast<size_t>(i)];
    for (size_t a = 0; a < pred.mixtures.size(); ++a) {
      overall.add(pred.mixtures[a], *pred.ground_truths[a]);
      it->second.add(std::move(pred.mixtures[a]), *pred.ground_truths[a]);
    }
  }

  EvalResult result;
  result.overall = metrics::compute_report(overall, parallel);
  for (const auto& [key, set] : groups) {
    if (!set.empty()) result.by_agent_count.emplace(key, metrics::compute_report(set, parallel));
  }
  return result;
}

nlohmann::ordered_json eval_to_json(const EvalResult& result) {
  nlohmann::ordered_json j;
  j["overall"] = metrics::to_json(result.overall);
  nlohmann::ordered_json groups;
  for (const auto& [key, report] : result.by_agent_count) groups[key] = metrics::to_json(report);
  j["by_agent_count"] = std::move(groups);
  return j;
}

std::string fde_csv(const metrics::MetricReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "min_fde,conf_fde,weight_fde\n";
  for (size_t i = 0; i < report.per_agent_min_fde.size(); ++i) {
    out << report.per_agent_min_fde[i] << ',' << report.per_agent_conf_fde[i] << ','
        << report.per_agent_weight_fde[i] << '\n';
  }
  return out.str();
}

nlohmann::ordered_json sim_report_to_json(const sim::SimReport& report) {
  nlohmann::ordered_json j;
  j["scenario"] = report.scenario_id;
  j["predictor"] = report.predictor;
  j["valid"] = report.valid;
  if (!report.valid) j["abort_reason"] = report.abort_reason;
  j["lateral"] = report.lateral_count;
  j["high"] = report.high_count;
  j["low"] = report.low_count;
  j["distance_driven"] = report.distance_driven;
  auto events = nlohmann::ordered_json::array();
  for (const auto& e : report.events) {
    events.push_back({{"kind", sim::to_string(e.kind)}, {"time", e.time}, {"x", e.x}, {"y", e.y}});
  }
  j["events"] = std::move(events);
  return j;
}

}  // namespace trajpred::pipeline
