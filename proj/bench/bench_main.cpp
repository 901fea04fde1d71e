// Compares the OpenMP kernels against their serial references: batch
// gradient accumulation, metric reports over a large agent pool, and BEV
// stack rasterization.

#include <chrono>
#include <cstdio>
#include <omp.h>

#include "trajpred/baselines.hpp"
#include "trajpred/data.hpp"
#include "trajpred/metrics.hpp"
#include "trajpred/net.hpp"
#include "trajpred/pipeline.hpp"
#include "trajpred/rng.hpp"

using namespace trajpred;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = clock_type::now();
    fn();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-28s %10.4f s %10.4f s %8.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", omp_get_max_threads());
  std::printf("%-28s %12s %12s %9s\n", "kernel", "serial", "openmp", "speedup");

  // Shared fixture: a few generated scenarios cut into samples.
  net::NetConfig net_cfg;
  net_cfg.K = 4;
  data::GenParams gen;
  gen.neighbors = 2;
  data::CutConfig cut;
  cut.T = net_cfg.T;
  std::vector<data::ScenarioLog> logs;
  for (uint64_t s = 1; s <= 4; ++s) logs.push_back(data::gen_synthetic(data::ScenarioKind::turn90, s, gen));
  const pipeline::Dataset dataset = pipeline::load_dataset(logs, cut, net_cfg);
  std::printf("fixture: %zu samples\n", dataset.samples.size());

  {  // batch gradient
    const net::ModelParams params = net::init_params(net_cfg, 7);
    const std::span<const net::Features> batch(dataset.samples.data(),
                                               std::min<size_t>(dataset.samples.size(), 16));
    const double serial =
        time_best_of(3, [&] { (void)net::batch_gradient_serial(params, batch); });
    const double parallel = time_best_of(3, [&] { (void)net::batch_gradient(params, batch, true); });
    row("batch_gradient[16]", serial, parallel);
  }

  {  // metric report over a large random agent pool
    Rng rng(11);
    metrics::PredictionSet set(40, 0.1);
    for (int n = 0; n < 4000; ++n) {
      mixture::TrajectoryMixture m;
      m.K = 8;
      m.T = 40;
      m.dt = 0.1;
      double sum = 0.0;
      for (int k = 0; k < m.K; ++k) {
        mixture::MixtureComponent comp;
        comp.weight = rng.uniform(0.05, 1.0);
        sum += comp.weight;
        for (auto& a : comp.coeffs_x.a) a = rng.uniform(-0.5, 0.5);
        for (auto& a : comp.coeffs_y.a) a = rng.uniform(-0.5, 0.5);
        comp.sigma_x.assign(40, 1.0);
        comp.sigma_y.assign(40, 1.0);
        m.components.push_back(std::move(comp));
      }
      for (auto& comp : m.components) comp.weight /= sum;
      geometry::Track gt;
      gt.sample_rate = 10.0;
      for (int t = 0; t < 40; ++t) {
        gt.samples.push_back(geometry::TrackSample{
            (t + 1) * 0.1, geometry::Pose2{rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0}, 0.0});
      }
      set.add(std::move(m), std::move(gt));
    }
    const double serial = time_best_of(5, [&] { (void)metrics::compute_report(set, false); });
    const double parallel = time_best_of(5, [&] { (void)metrics::compute_report(set, true); });
    row("compute_report[4000x8]", serial, parallel);
  }

  {  // BEV stack rasterization
    const auto& log = logs.front();
    std::vector<bev::SceneSnapshot> history;
    for (int i = 0; i < bev::kFrames; ++i) {
      bev::SceneSnapshot snap;
      const auto& f = log.frames[static_cast<size_t>(i)];
      for (const auto& obs : f.neighbors) snap.vehicles.push_back(data::to_vehicle_obs(obs));
      snap.points = f.points;
      history.push_back(std::move(snap));
    }
    const geometry::Pose2 ego = log.frames[bev::kFrames - 1].ego;
    const double serial =
        time_best_of(10, [&] { (void)bev::accumulate(history, ego, false); });
    const double parallel =
        time_best_of(10, [&] { (void)bev::accumulate(history, ego, true); });
    row("bev_accumulate[20]", serial, parallel);
  }

  return 0;
}
