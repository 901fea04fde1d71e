#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajpred/data.hpp"
#include "trajpred/metrics.hpp"
#include "trajpred/net.hpp"
#include "trajpred/sim.hpp"

namespace trajpred::pipeline {

// Scenario files (*.jsonl) in lexicographic order.
std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir);

struct Dataset {
  std::vector<net::Features> samples;
  std::vector<int> agent_counts;  // 1 + tracked neighbors, per sample
};

// Streams every scenario in `dir` through cut_samples and feature
// extraction; BEV tensors are dropped once pooled.
Dataset load_dataset(const std::filesystem::path& dir, const data::CutConfig& cut,
                     const net::NetConfig& net_cfg);
Dataset load_dataset(const std::vector<data::ScenarioLog>& logs, const data::CutConfig& cut,
                     const net::NetConfig& net_cfg);

struct TrainResult {
  net::ModelParams params;
  std::vector<double> epoch_losses;
};

// Seeded shuffled mini-batch training; deterministic for a fixed config.
TrainResult run_training(const Dataset& dataset, const net::NetConfig& net_cfg,
                         const net::TrainConfig& train_cfg);

enum class EvalPredictor { model, constant_velocity, physics_oracle };

EvalPredictor eval_predictor_from_string(const std::string& s);

struct EvalResult {
  metrics::MetricReport overall;
  // Keys "1".."5" and "6+", matching the agent-count grouping.
  std::map<std::string, metrics::MetricReport> by_agent_count;
};

// Evaluate a predictor over the dataset: ego plus tracked neighbors all
// enter the agent pool. `params` is required for the model predictor.
EvalResult evaluate(const Dataset& dataset, EvalPredictor predictor,
                    const net::ModelParams* params, int T, double dt, bool parallel = true);

nlohmann::ordered_json eval_to_json(const EvalResult& result);

// Per-agent FDE table (minFDE, confFDE, weightFDE rows) for cumulative
// curves.
std::string fde_csv(const metrics::MetricReport& report);

nlohmann::ordered_json sim_report_to_json(const sim::SimReport& report);

}  // namespace trajpred::pipeline
