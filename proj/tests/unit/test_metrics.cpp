#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "oracles.hpp"
#include "trajpred/metrics.hpp"
#include "trajpred/rng.hpp"

using namespace trajpred;
using metrics::MetricId;
using metrics::PredictionSet;
using mixture::TrajectoryMixture;

namespace {

TrajectoryMixture linear_mixture(int T, double dt, double vx, double vy, double weight = 1.0) {
  TrajectoryMixture m;
  m.K = 1;
  m.T = T;
  m.dt = dt;
  mixture::MixtureComponent comp;
  comp.weight = weight;
  comp.coeffs_x.a = {0, 0, 0, vx};
  comp.coeffs_y.a = {0, 0, 0, vy};
  comp.sigma_x.assign(static_cast<size_t>(T), 1.0);
  comp.sigma_y.assign(static_cast<size_t>(T), 1.0);
  m.components.push_back(std::move(comp));
  return m;
}

TrajectoryMixture merge(const TrajectoryMixture& a, const TrajectoryMixture& b, double wa,
                        double wb) {
  TrajectoryMixture m = a;
  m.K = a.K + b.K;
  m.components[0].weight = wa;
  for (auto comp : b.components) {
    comp.weight = wb;
    m.components.push_back(comp);
  }
  return m;
}

geometry::Track linear_track(int T, double dt, double vx, double vy) {
  geometry::Track gt;
  gt.sample_rate = 1.0 / dt;
  for (int t = 0; t < T; ++t) {
    const double tau = (t + 1) * dt;
    gt.samples.push_back(geometry::TrackSample{tau, geometry::Pose2{vx * tau, vy * tau, 0.0}, 0.0});
  }
  return gt;
}

}  // namespace

TEST_CASE("constant 2 m offset in x over 4 steps") {
  PredictionSet set(4, 1.0);
  // prediction moves at 1 m/s; truth is the same path shifted -2 m in x:
  // per-step error is exactly 2 m.
  TrajectoryMixture m = linear_mixture(4, 1.0, 1.0, 0.0);
  geometry::Track gt = linear_track(4, 1.0, 1.0, 0.0);
  for (auto& s : gt.samples) s.pose.x -= 2.0;
  set.add(m, gt);
  const auto r = metrics::min_metrics(set);
  CHECK(r.msd == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(r.ade == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.fde == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("a perfect component zeroes the min metrics") {
  PredictionSet set(5, 0.1);
  const TrajectoryMixture good = linear_mixture(5, 0.1, 2.0, 0.5);
  const TrajectoryMixture bad = linear_mixture(5, 0.1, -3.0, 1.0);
  set.add(merge(good, bad, 0.5, 0.5), linear_track(5, 0.1, 2.0, 0.5));
  const auto r = metrics::min_metrics(set);
  CHECK(r.msd == doctest::Approx(0.0));
  CHECK(r.ade == doctest::Approx(0.0));
  CHECK(r.fde == doctest::Approx(0.0));
}

TEST_CASE("conf metrics follow the heaviest component") {
  PredictionSet set(3, 1.0);
  const TrajectoryMixture conf = linear_mixture(3, 1.0, 0.0, 1.0);   // offset 1 m in y vs truth
  const TrajectoryMixture other = linear_mixture(3, 1.0, 0.0, 0.0);  // perfect
  set.add(merge(conf, other, 0.9, 0.1), linear_track(3, 1.0, 0.0, 0.0));
  // confident component drifts 1 m/s in y; ADE = mean(1,2,3) = 2
  const auto r = metrics::conf_metrics(set);
  CHECK(r.ade == doctest::Approx(2.0).epsilon(1e-12));
  const auto mins = metrics::min_metrics(set);
  CHECK(mins.ade == doctest::Approx(0.0));
}

TEST_CASE("conf metrics with the truth as heaviest are zero") {
  PredictionSet set(3, 1.0);
  const TrajectoryMixture conf = linear_mixture(3, 1.0, 1.0, 0.0);
  const TrajectoryMixture other = linear_mixture(3, 1.0, 0.0, 0.0);
  set.add(merge(conf, other, 0.8, 0.2), linear_track(3, 1.0, 1.0, 0.0));
  const auto r = metrics::conf_metrics(set);
  CHECK(r.msd == doctest::Approx(0.0));
}

TEST_CASE("weightFDE is the convex combination of final errors") {
  PredictionSet set(1, 1.0);
  const TrajectoryMixture exact = linear_mixture(1, 1.0, 1.0, 0.0);
  const TrajectoryMixture off = linear_mixture(1, 1.0, 5.0, 0.0);  // final error 4 m
  set.add(merge(exact, off, 0.75, 0.25), linear_track(1, 1.0, 1.0, 0.0));
  CHECK(metrics::weight_fde(set) == doctest::Approx(1.0).epsilon(1e-12));

  PredictionSet same(1, 1.0);
  same.add(merge(off, off, 0.5, 0.5), linear_track(1, 1.0, 1.0, 0.0));
  CHECK(metrics::weight_fde(same) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("axis splits") {
  PredictionSet set(4, 1.0);
  TrajectoryMixture m = linear_mixture(4, 1.0, 1.0, 0.0);
  geometry::Track gt = linear_track(4, 1.0, 1.0, 0.0);
  for (auto& s : gt.samples) {
    s.pose.x -= 3.0;
    s.pose.y -= 4.0;
  }
  set.add(m, gt);
  const auto [ax, ay] = metrics::axis_split(set, MetricId::min_ade);
  CHECK(ax == doctest::Approx(3.0));
  CHECK(ay == doctest::Approx(4.0));
  CHECK(metrics::min_metrics(set).ade == doctest::Approx(5.0));  // 3-4-5

  // y-only perfection
  PredictionSet set2(4, 1.0);
  geometry::Track gt2 = linear_track(4, 1.0, 1.0, 0.0);
  for (auto& s : gt2.samples) s.pose.x -= 1.0;
  set2.add(linear_mixture(4, 1.0, 1.0, 0.0), gt2);
  const auto [bx, by] = metrics::axis_split(set2, MetricId::min_ade);
  CHECK(bx == doctest::Approx(1.0));
  CHECK(by == doctest::Approx(0.0));
}

TEST_CASE("miss rate thresholds") {
  PredictionSet near(1, 1.0);
  TrajectoryMixture m = linear_mixture(1, 1.0, 1.9, 0.0);
  near.add(m, linear_track(1, 1.0, 0.0, 0.0));  // final error 1.9 m
  CHECK(metrics::miss_rate(near, 1) == doctest::Approx(0.0));

  PredictionSet far(1, 1.0);
  far.add(linear_mixture(1, 1.0, 2.1, 0.0), linear_track(1, 1.0, 0.0, 0.0));
  CHECK(metrics::miss_rate(far, 1) == doctest::Approx(1.0));
  CHECK(metrics::miss_rate(far, 10) == doctest::Approx(1.0));  // top_k clamped to K
  CHECK_THROWS_AS((void)metrics::miss_rate(far, 0), std::invalid_argument);
}

TEST_CASE("empty set is an explicit error") {
  PredictionSet set(4, 0.1);
  CHECK_THROWS_AS((void)metrics::min_metrics(set), std::invalid_argument);
  CHECK_THROWS_AS((void)metrics::compute_report(set), std::invalid_argument);
}

TEST_CASE("short ground truth is excluded and counted") {
  PredictionSet set(4, 1.0);
  CHECK(!set.add(linear_mixture(4, 1.0, 1.0, 0.0), linear_track(3, 1.0, 1.0, 0.0)));
  CHECK(set.add(linear_mixture(4, 1.0, 1.0, 0.0), linear_track(4, 1.0, 1.0, 0.0)));
  CHECK(set.excluded() == 1);
  const auto report = metrics::compute_report(set);
  CHECK(report.agents == 1);
  CHECK(report.excluded == 1);
  CHECK(report.coverage == doctest::Approx(0.5));
}

TEST_CASE("matches the brute-force oracle on 100 random instances") {
  Rng rng(101);
  for (int instance = 0; instance < 100; ++instance) {
    const int agents = 1 + rng.uniform_int(6);
    const int K = 1 + rng.uniform_int(8);
    const int T = 1 + rng.uniform_int(20);
    PredictionSet set(T, 0.1);
    std::vector<oracles::RawAgent> raw;
    for (int a = 0; a < agents; ++a) {
      const TrajectoryMixture m = oracles::random_mixture(rng, K, T, 0.1);
      const geometry::Track gt = oracles::random_future(rng, T, 0.1);
      raw.push_back(oracles::to_raw(m, gt));
      set.add(m, gt);
    }
    const auto brute = oracles::brute_metrics(raw);
    const auto report = metrics::compute_report(set);

    CHECK(std::abs(report.min_msd - brute.min_msd) < 1e-12);
    CHECK(std::abs(report.min_ade - brute.min_ade) < 1e-12);
    CHECK(std::abs(report.min_fde - brute.min_fde) < 1e-12);
    CHECK(std::abs(report.conf_msd - brute.conf_msd) < 1e-12);
    CHECK(std::abs(report.conf_ade - brute.conf_ade) < 1e-12);
    CHECK(std::abs(report.conf_fde - brute.conf_fde) < 1e-12);
    CHECK(std::abs(report.weight_fde - brute.weight_fde) < 1e-12);
    CHECK(std::abs(report.min_ade_x - brute.min_ade_x) < 1e-12);
    CHECK(std::abs(report.min_ade_y - brute.min_ade_y) < 1e-12);
    CHECK(std::abs(report.miss_rate_top1 - brute.miss1) < 1e-12);
    CHECK(std::abs(report.miss_rate_top5 - brute.miss5) < 1e-12);
    CHECK(std::abs(report.miss_rate_top10 - brute.miss10) < 1e-12);

    // order invariants (also the conf >= min comparisons)
    CHECK(report.min_ade * report.min_ade <= report.min_msd + 1e-12);
    CHECK(report.min_fde <= report.conf_fde + 1e-12);
    CHECK(report.min_fde <= report.weight_fde + 1e-12);
    CHECK(report.conf_msd >= report.min_msd - 1e-12);
    CHECK(report.conf_ade >= report.min_ade - 1e-12);
    CHECK(report.miss_rate_top10 <= report.miss_rate_top5 + 1e-12);
    CHECK(report.miss_rate_top5 <= report.miss_rate_top1 + 1e-12);
    // per-axis conf MSD decomposes exactly; min is superadditive
    CHECK(report.conf_msd_x + report.conf_msd_y == doctest::Approx(report.conf_msd).epsilon(1e-12));
    CHECK(report.min_msd_x + report.min_msd_y <= report.min_msd + 1e-12);
  }
}

TEST_CASE("metrics are invariant under component permutation") {
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 2 + rng.uniform_int(6);
    const TrajectoryMixture m = oracles::random_mixture(rng, K, 8, 0.1);
    const geometry::Track gt = oracles::random_future(rng, 8, 0.1);
    TrajectoryMixture perm = m;
    std::rotate(perm.components.begin(), perm.components.begin() + 1, perm.components.end());

    PredictionSet a(8, 0.1);
    a.add(m, gt);
    PredictionSet b(8, 0.1);
    b.add(perm, gt);
    const auto ra = metrics::compute_report(a);
    const auto rb = metrics::compute_report(b);
    CHECK(ra.min_ade == doctest::Approx(rb.min_ade).epsilon(1e-12));
    CHECK(ra.conf_fde == doctest::Approx(rb.conf_fde).epsilon(1e-12));
    CHECK(ra.weight_fde == doctest::Approx(rb.weight_fde).epsilon(1e-12));
    CHECK(ra.miss_rate_top1 == doctest::Approx(rb.miss_rate_top1));
  }
}

TEST_CASE("scaling predictions and truth scales the metrics") {
  Rng rng(56);
  const TrajectoryMixture m = oracles::random_mixture(rng, 4, 6, 0.1);
  const geometry::Track gt = oracles::random_future(rng, 6, 0.1);
  PredictionSet base(6, 0.1);
  base.add(m, gt);

  const double s = 2.5;
  TrajectoryMixture scaled = m;
  for (auto& comp : scaled.components) {
    for (auto& a : comp.coeffs_x.a) a *= s;
    for (auto& a : comp.coeffs_y.a) a *= s;
  }
  geometry::Track gts = gt;
  for (auto& sample : gts.samples) {
    sample.pose.x *= s;
    sample.pose.y *= s;
  }
  PredictionSet big(6, 0.1);
  big.add(scaled, gts);

  const auto ra = metrics::compute_report(base);
  const auto rb = metrics::compute_report(big);
  CHECK(rb.min_ade == doctest::Approx(s * ra.min_ade).epsilon(1e-9));
  CHECK(rb.min_fde == doctest::Approx(s * ra.min_fde).epsilon(1e-9));
  CHECK(rb.min_msd == doctest::Approx(s * s * ra.min_msd).epsilon(1e-9));
}

TEST_CASE("parallel and serial reports agree bitwise") {
  Rng rng(57);
  PredictionSet set(10, 0.1);
  for (int a = 0; a < 200; ++a) {
    set.add(oracles::random_mixture(rng, 6, 10, 0.1), oracles::random_future(rng, 10, 0.1));
  }
  const auto serial = metrics::compute_report(set, false);
  const auto parallel = metrics::compute_report(set, true);
  CHECK(serial.min_ade == parallel.min_ade);
  CHECK(serial.conf_msd == parallel.conf_msd);
  CHECK(serial.weight_fde == parallel.weight_fde);
  CHECK(serial.miss_rate_top5 == parallel.miss_rate_top5);
}
