// Command-line front end: generate scenarios, rasterize BEV tensors, train,
// evaluate, simulate and render report tables.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "trajpred/baselines.hpp"
#include "trajpred/bev.hpp"
#include "trajpred/data.hpp"
#include "trajpred/hash.hpp"
#include "trajpred/net.hpp"
#include "trajpred/pipeline.hpp"
#include "trajpred/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace trajpred;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int cmd_gen(const cli::AppConfig& cfg, const std::string& kind_str, int count, uint64_t seed,
            const fs::path& out_dir, double noise) {
  const data::ScenarioKind kind = data::kind_from_string(kind_str);
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    const uint64_t s = seed + static_cast<uint64_t>(i);
    data::ScenarioLog log = data::gen_synthetic(kind, s, cfg.gen);
    if (noise > 0.0) log = data::apply_position_noise(log, s ^ 0x6e6f697365ULL, noise);
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%05d.jsonl", kind_str.c_str(), i);
    data::write_scenario(log, out_dir / name);
  }
  std::cout << "wrote " << count << " " << kind_str << " scenario(s) to " << out_dir.string()
            << "\n";
  return 0;
}

int cmd_rasterize(const cli::AppConfig& cfg, const fs::path& scenario, int frame,
                  const fs::path& out) {
  const data::ScenarioLog log = data::parse_scenario(scenario);
  if (frame < 0 || frame >= static_cast<int>(log.frames.size())) {
    throw std::runtime_error("frame index out of range");
  }
  std::vector<bev::SceneSnapshot> history;
  for (int i = std::max(0, frame - (bev::kFrames - 1)); i <= frame; ++i) {
    bev::SceneSnapshot snap;
    const auto& f = log.frames[static_cast<size_t>(i)];
    for (const auto& obs : f.neighbors) snap.vehicles.push_back(data::to_vehicle_obs(obs));
    snap.points = f.points;
    history.push_back(std::move(snap));
  }
  bool padded = false;
  const auto full = bev::pad_history(history, padded);
  if (padded) {
    std::cerr << "note: frame " << frame << " has less than 2 s of history; oldest snapshot repeated\n";
  }
  const bev::BevTensor tensor =
      bev::accumulate(full, log.frames[static_cast<size_t>(frame)].ego, true,
                      cfg.cut.ground_z_threshold);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + out.string());
  bev::write_binary(tensor, os);
  std::cout << "wrote BEV tensor for frame " << frame << " to " << out.string() << "\n";
  return 0;
}

int cmd_train(cli::AppConfig cfg, const fs::path& data_dir, const fs::path& out_params,
              const std::optional<fs::path>& loss_csv, const std::string& ablate) {
  if (ablate == "bev") {
    cfg.net.ablate_bev = true;
  } else if (ablate == "multimodal") {
    cfg.net.K = 1;
  } else if (!ablate.empty()) {
    throw std::runtime_error("unknown ablation '" + ablate + "' (expected bev or multimodal)");
  }
  cfg.cut.build_bev = !cfg.net.ablate_bev;

  const pipeline::Dataset dataset = pipeline::load_dataset(data_dir, cfg.cut, cfg.net);
  std::cout << "training on " << dataset.samples.size() << " samples, "
            << net::param_count(cfg.net) << " parameters\n";
  const pipeline::TrainResult result = pipeline::run_training(dataset, cfg.net, cfg.train);
  net::save_params(result.params, out_params);

  if (loss_csv.has_value()) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "epoch,loss\n";
    for (size_t e = 0; e < result.epoch_losses.size(); ++e) {
      csv << e << ',' << result.epoch_losses[e] << '\n';
    }
    write_text(*loss_csv, csv.str());
  }
  std::cout << "final epoch loss " << result.epoch_losses.back() << ", params written to "
            << out_params.string() << "\n";
  return 0;
}

int cmd_eval(cli::AppConfig cfg, const fs::path& data_dir, const std::optional<fs::path>& params_path,
             const std::string& baseline, const fs::path& out) {
  pipeline::EvalPredictor predictor = pipeline::EvalPredictor::model;
  std::optional<net::ModelParams> params;
  if (params_path.has_value()) {
    params = net::load_params(*params_path, cfg.net);
    cfg.cut.build_bev = !cfg.net.ablate_bev;
  } else if (!baseline.empty()) {
    predictor = pipeline::eval_predictor_from_string(baseline);
    if (predictor == pipeline::EvalPredictor::model) {
      throw std::runtime_error("--baseline model requires --params");
    }
    cfg.net.ablate_bev = true;  // baselines never read the BEV
    cfg.cut.build_bev = false;
  } else {
    throw std::runtime_error("eval needs --params or --baseline");
  }

  const pipeline::Dataset dataset = pipeline::load_dataset(data_dir, cfg.cut, cfg.net);
  const pipeline::EvalResult result = pipeline::evaluate(
      dataset, predictor, params.has_value() ? &*params : nullptr, cfg.net.T, cfg.net.dt);

  ordered_json doc;
  doc["command"] = "eval";
  doc["predictor"] = params.has_value() ? "model" : baseline;
  doc["config_hash"] = cfg.hash();
  if (params.has_value()) doc["K"] = cfg.net.K;
  doc["groups"] = pipeline::eval_to_json(result);
  write_text(out, doc.dump(2) + "\n");

  fs::path fde_path = out;
  fde_path.replace_extension(".fde.csv");
  write_text(fde_path, pipeline::fde_csv(result.overall));
  std::cout << "minADE " << result.overall.min_ade << ", minFDE " << result.overall.min_fde
            << " over " << result.overall.agents << " agents -> " << out.string() << "\n";
  return 0;
}

int cmd_simulate(cli::AppConfig cfg, const fs::path& scenario_dir,
                 const std::optional<fs::path>& params_path, const std::string& predictor_name,
                 const fs::path& out, const std::optional<fs::path>& trace_dir) {
  std::unique_ptr<sim::Predictor> predictor;
  if (params_path.has_value()) {
    predictor = sim::make_model_predictor(net::load_params(*params_path, cfg.net));
  } else if (predictor_name == "oracle") {
    predictor = sim::make_oracle_predictor(cfg.net.T, cfg.net.dt);
  } else if (predictor_name == "constant_velocity") {
    predictor = sim::make_constant_velocity_predictor(cfg.net.T, cfg.net.dt);
  } else {
    throw std::runtime_error("simulate needs --params or --predictor oracle|constant_velocity");
  }
  if (trace_dir.has_value()) fs::create_directories(*trace_dir);

  ordered_json doc;
  doc["command"] = "simulate";
  doc["predictor"] = predictor->name();
  doc["config_hash"] = cfg.hash();
  auto scenarios = ordered_json::array();
  int lateral = 0;
  int high = 0;
  int low = 0;
  double distance = 0.0;
  for (const auto& path : pipeline::list_scenarios(scenario_dir)) {
    const data::ScenarioLog log = data::parse_scenario(path);
    sim::SimReport report;
    if (trace_dir.has_value()) {
      std::ofstream trace(*trace_dir / (log.id + ".csv"));
      report = sim::run_closed_loop(log, *predictor, cfg.sim, &trace);
    } else {
      report = sim::run_closed_loop(log, *predictor, cfg.sim, nullptr);
    }
    lateral += report.lateral_count;
    high += report.high_count;
    low += report.low_count;
    distance += report.distance_driven;
    scenarios.push_back(pipeline::sim_report_to_json(report));
  }
  doc["scenarios"] = std::move(scenarios);
  doc["totals"] = {{"lateral", lateral}, {"high", high}, {"low", low},
                   {"distance_driven", distance}};
  write_text(out, doc.dump(2) + "\n");
  std::cout << "simulated " << doc["scenarios"].size() << " scenario(s): lateral " << lateral
            << ", high " << high << ", low " << low << " -> " << out.string() << "\n";
  return 0;
}

std::pair<std::string, fs::path> split_label(const std::string& expr) {
  const auto eq = expr.find('=');
  if (eq == std::string::npos) {
    throw std::runtime_error("expected label=path, got '" + expr + "'");
  }
  return {expr.substr(0, eq), fs::path(expr.substr(eq + 1))};
}

ordered_json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return ordered_json::parse(in);
}

int cmd_report(const std::vector<std::string>& eval_specs, const std::vector<std::string>& sim_specs,
               const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ostringstream md;
  md.setf(std::ios::fixed);
  md.precision(3);

  if (!eval_specs.empty()) {
    md << "# Open-loop metrics\n\n";
    md << "| run | minMSD | minADE | minFDE | confADE | confFDE | weightFDE | miss@2m k=1 | k=5 | k=10 |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|\n";
    std::vector<std::pair<std::string, ordered_json>> evals;
    for (const auto& spec : eval_specs) {
      const auto [label, path] = split_label(spec);
      ordered_json doc = read_json(path);
      const auto& o = doc["groups"]["overall"];
      md << "| " << label << " | " << o["minMSD"].get<double>() << " | "
         << o["minADE"].get<double>() << " | " << o["minFDE"].get<double>() << " | "
         << o["confADE"].get<double>() << " | " << o["confFDE"].get<double>() << " | "
         << o["weightFDE"].get<double>() << " | " << o["missRate2m_top1"].get<double>() << " | "
         << o["missRate2m_top5"].get<double>() << " | " << o["missRate2m_top10"].get<double>()
         << " |\n";
      evals.emplace_back(label, std::move(doc));

      // Cumulative FDE curve from the per-agent sidecar, when present.
      fs::path sidecar = path;
      sidecar.replace_extension(".fde.csv");
      if (fs::exists(sidecar)) {
        std::ifstream in(sidecar);
        std::string line;
        std::getline(in, line);  // header
        std::vector<std::array<double, 3>> rows;
        while (std::getline(in, line)) {
          std::array<double, 3> row{};
          if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &row[0], &row[1], &row[2]) == 3) {
            rows.push_back(row);
          }
        }
        double max_v = 0.0;
        for (const auto& r : rows) max_v = std::max({max_v, r[0], r[1], r[2]});
        std::ostringstream curve;
        curve.setf(std::ios::fixed);
        curve.precision(4);
        curve << "threshold,min_fde_pct,conf_fde_pct,weight_fde_pct\n";
        const double step = 0.25;
        for (double x = 0.0; x <= max_v + step; x += step) {
          int c0 = 0;
          int c1 = 0;
          int c2 = 0;
          for (const auto& r : rows) {
            c0 += r[0] < x ? 1 : 0;
            c1 += r[1] < x ? 1 : 0;
            c2 += r[2] < x ? 1 : 0;
          }
          const double inv = rows.empty() ? 0.0 : 100.0 / static_cast<double>(rows.size());
          curve << x << ',' << c0 * inv << ',' << c1 * inv << ',' << c2 * inv << '\n';
        }
        write_text(out_dir / ("cum_fde_" + label + ".csv"), curve.str());
      }
    }

    md << "\n## minMSD by agent count\n\n";
    md << "| run | 1 | 2 | 3 | 4 | 5 | 6+ |\n|---|---|---|---|---|---|---|\n";
    for (const auto& [label, doc] : evals) {
      md << "| " << label << " |";
      for (const char* key : {"1", "2", "3", "4", "5", "6+"}) {
        const auto& groups = doc["groups"]["by_agent_count"];
        if (groups.contains(key)) {
          md << ' ' << groups[key]["minMSD"].get<double>() << " |";
        } else {
          md << " - |";
        }
      }
      md << "\n";
    }

    std::vector<std::pair<int, const ordered_json*>> with_k;
    for (const auto& [label, doc] : evals) {
      if (doc.contains("K")) with_k.emplace_back(doc["K"].get<int>(), &doc);
    }
    if (!with_k.empty()) {
      std::sort(with_k.begin(), with_k.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      md << "\n## Influence of mixture components\n\n";
      md << "| K | minMSD | minADE |\n|---|---|---|\n";
      for (const auto& [k, doc] : with_k) {
        const auto& o = (*doc)["groups"]["overall"];
        md << "| " << k << " | " << o["minMSD"].get<double>() << " | "
           << o["minADE"].get<double>() << " |\n";
      }
    }
  }

  if (!sim_specs.empty()) {
    md << "\n# Closed-loop failure counts\n\n";
    md << "| run | lateral | high | low | distance (m) |\n|---|---|---|---|---|\n";
    for (const auto& spec : sim_specs) {
      const auto [label, path] = split_label(spec);
      const ordered_json doc = read_json(path);
      const auto& t = doc["totals"];
      md << "| " << label << " | " << t["lateral"].get<int>() << " | " << t["high"].get<int>()
         << " | " << t["low"].get<int>() << " | " << t["distance_driven"].get<double>() << " |\n";
    }
  }

  write_text(out_dir / "tables.md", md.str());
  std::cout << "wrote " << (out_dir / "tables.md").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probabilistic polynomial trajectory prediction toolkit"};
  app.fallthrough();
  app.require_subcommand(1);

  std::optional<fs::path> config_file;
  std::vector<std::string> sets;
  app.add_option("--config", config_file, "JSON config file");
  app.add_option("--set", sets, "override a config value, key=value (repeatable)");

  auto* gen = app.add_subcommand("gen", "generate synthetic scenario files");
  std::string gen_kind = "straight";
  int gen_count = 1;
  uint64_t gen_seed = 1;
  fs::path gen_out = ".";
  double gen_noise = 0.0;
  gen->add_option("--kind", gen_kind, "straight|turn90|fork|roundabout|stop_and_go")->required();
  gen->add_option("--count", gen_count, "number of scenarios");
  gen->add_option("--seed", gen_seed, "base seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--noise", gen_noise, "position jitter stddev (m), default off");

  auto* rasterize = app.add_subcommand("rasterize", "dump the BEV tensor for one frame");
  fs::path ras_scenario;
  int ras_frame = 0;
  fs::path ras_out;
  rasterize->add_option("--scenario", ras_scenario, "scenario file")->required();
  rasterize->add_option("--frame", ras_frame, "frame index")->required();
  rasterize->add_option("--out", ras_out, "output .bev file")->required();

  auto* train = app.add_subcommand("train", "train the predictor");
  fs::path train_data;
  fs::path train_out;
  std::optional<fs::path> train_csv;
  std::string train_ablate;
  train->add_option("--data", train_data, "scenario directory")->required();
  train->add_option("--out", train_out, "output parameter file")->required();
  train->add_option("--loss-csv", train_csv, "per-epoch loss CSV");
  train->add_option("--ablate", train_ablate, "bev | multimodal (forces K=1)");

  auto* eval = app.add_subcommand("eval", "offline metric evaluation");
  fs::path eval_data;
  std::optional<fs::path> eval_params;
  std::string eval_baseline;
  fs::path eval_out;
  eval->add_option("--data", eval_data, "scenario directory")->required();
  eval->add_option("--params", eval_params, "trained parameter file");
  eval->add_option("--baseline", eval_baseline, "constant_velocity | physics_oracle");
  eval->add_option("--out", eval_out, "output report JSON")->required();

  auto* simulate = app.add_subcommand("simulate", "closed-loop evaluation");
  fs::path sim_dir;
  std::optional<fs::path> sim_params;
  std::string sim_predictor;
  fs::path sim_out;
  std::optional<fs::path> sim_trace;
  simulate->add_option("--scenarios", sim_dir, "scenario directory")->required();
  simulate->add_option("--params", sim_params, "trained parameter file");
  simulate->add_option("--predictor", sim_predictor, "oracle | constant_velocity");
  simulate->add_option("--out", sim_out, "output report JSON")->required();
  simulate->add_option("--trace-dir", sim_trace, "per-step trace CSV directory");

  auto* report = app.add_subcommand("report", "render comparison tables");
  std::vector<std::string> rep_eval;
  std::vector<std::string> rep_sim;
  fs::path rep_out = ".";
  report->add_option("--eval", rep_eval, "label=path to an eval report (repeatable)");
  report->add_option("--sim", rep_sim, "label=path to a simulate report (repeatable)");
  report->add_option("--out-dir", rep_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const cli::AppConfig cfg = cli::load_config(config_file, sets);
    if (gen->parsed()) return cmd_gen(cfg, gen_kind, gen_count, gen_seed, gen_out, gen_noise);
    if (rasterize->parsed()) return cmd_rasterize(cfg, ras_scenario, ras_frame, ras_out);
    if (train->parsed()) return cmd_train(cfg, train_data, train_out, train_csv, train_ablate);
    if (eval->parsed()) return cmd_eval(cfg, eval_data, eval_params, eval_baseline, eval_out);
    if (simulate->parsed()) {
      return cmd_simulate(cfg, sim_dir, sim_params, sim_predictor, sim_out, sim_trace);
    }
    if (report->parsed()) return cmd_report(rep_eval, rep_sim, rep_out);
  } catch (const std::exception& e) {
    ordered_json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
