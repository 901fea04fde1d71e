#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "trajpred/geometry.hpp"
#include "trajpred/rng.hpp"

using namespace trajpred;
using geometry::Pose2;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("to_frame translates") {
  const Pose2 p = geometry::to_frame(Pose2{6, 0, 0}, Pose2{5, 0, 0});
  CHECK(p.x == doctest::Approx(1.0));
  CHECK(p.y == doctest::Approx(0.0));
  CHECK(p.yaw == doctest::Approx(0.0));
}

TEST_CASE("to_frame rotates lateral offset into longitudinal") {
  const Pose2 p = geometry::to_frame(Pose2{0, 1, kPi / 2}, Pose2{0, 0, kPi / 2});
  CHECK(p.x == doctest::Approx(1.0));
  CHECK(p.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.yaw == doctest::Approx(0.0));
}

TEST_CASE("frame round trip is identity") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Pose2 ref{rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-kPi, kPi)};
    const Pose2 p{rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-kPi, kPi)};
    const Pose2 back = geometry::from_frame(geometry::to_frame(p, ref), ref);
    CHECK(std::abs(back.x - p.x) < 1e-12);
    CHECK(std::abs(back.y - p.y) < 1e-12);
    CHECK(std::abs(geometry::normalize_angle(back.yaw - p.yaw)) < 1e-12);
  }
}

TEST_CASE("frame transforms preserve pairwise distances") {
  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    const Pose2 ref{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-kPi, kPi)};
    const Pose2 a{rng.uniform(-30, 30), rng.uniform(-30, 30), 0};
    const Pose2 b{rng.uniform(-30, 30), rng.uniform(-30, 30), 0};
    const Pose2 ta = geometry::to_frame(a, ref);
    const Pose2 tb = geometry::to_frame(b, ref);
    const double before = std::hypot(a.x - b.x, a.y - b.y);
    const double after = std::hypot(ta.x - tb.x, ta.y - tb.y);
    CHECK(std::abs(before - after) < 1e-12);
  }
}

TEST_CASE("normalize_angle lands in (-pi, pi]") {
  CHECK(geometry::normalize_angle(kPi) == doctest::Approx(kPi));
  CHECK(geometry::normalize_angle(-kPi) == doctest::Approx(kPi));
  CHECK(geometry::normalize_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(geometry::normalize_angle(0.1) == doctest::Approx(0.1));
}

TEST_CASE("poly_eval basics") {
  CHECK(geometry::poly_eval(geometry::PolyCoeffs{{0, 0, 0, 7.5}}, 1.0) == doctest::Approx(7.5));
  CHECK(geometry::poly_eval(geometry::PolyCoeffs{{1, 0, 0, 0}}, 2.0) == doctest::Approx(16.0));
  CHECK(geometry::poly_eval(geometry::PolyCoeffs{{0.3, -1, 2, 4}}, 0.0) == 0.0);
}

TEST_CASE("poly_fit recovers exact coefficients") {
  const geometry::PolyCoeffs truth{{0.1, -0.2, 0.3, 1.0}};
  std::vector<std::pair<double, double>> pts;
  for (int i = 1; i <= 40; ++i) {
    const double t = 0.1 * i;
    pts.emplace_back(t, geometry::poly_eval(truth, t));
  }
  const geometry::PolyCoeffs fit = geometry::poly_fit(pts);
  for (int d = 0; d < 4; ++d) {
    CHECK(std::abs(fit.a[static_cast<size_t>(d)] - truth.a[static_cast<size_t>(d)]) < 1e-9);
  }
  // and reproduces the data
  for (const auto& [t, v] : pts) CHECK(std::abs(geometry::poly_eval(fit, t) - v) < 1e-9);
}

TEST_CASE("poly_fit of zeros is zero") {
  std::vector<std::pair<double, double>> pts;
  for (int i = 1; i <= 10; ++i) pts.emplace_back(0.1 * i, 0.0);
  const geometry::PolyCoeffs fit = geometry::poly_fit(pts);
  for (const double a : fit.a) CHECK(std::abs(a) < 1e-12);
}

TEST_CASE("poly_fit of linear data") {
  std::vector<std::pair<double, double>> pts;
  for (int i = 1; i <= 40; ++i) pts.emplace_back(0.1 * i, 0.2 * i);  // value = 2t
  const geometry::PolyCoeffs fit = geometry::poly_fit(pts);
  CHECK(std::abs(fit.a[0]) < 1e-9);
  CHECK(std::abs(fit.a[1]) < 1e-9);
  CHECK(std::abs(fit.a[2]) < 1e-9);
  CHECK(fit.a[3] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("poly_fit rejects bad input") {
  std::vector<std::pair<double, double>> three{{0.1, 1}, {0.2, 2}, {0.3, 3}};
  CHECK_THROWS_AS((void)geometry::poly_fit(three), std::invalid_argument);

  std::vector<std::pair<double, double>> nonpositive{{0.0, 1}, {0.2, 2}, {0.3, 3}, {0.4, 4}};
  CHECK_THROWS_AS((void)geometry::poly_fit(nonpositive), std::invalid_argument);

  std::vector<std::pair<double, double>> degenerate{{0.5, 1}, {0.5, 2}, {0.5, 3}, {0.5, 4}};
  CHECK_THROWS_AS((void)geometry::poly_fit(degenerate), std::runtime_error);
}

TEST_CASE("poly_fit residual shrinks as points move toward the curve") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    geometry::PolyCoeffs truth;
    for (auto& a : truth.a) a = rng.uniform(-0.5, 0.5);
    std::vector<std::pair<double, double>> noisy;
    std::vector<std::pair<double, double>> closer;
    for (int i = 1; i <= 30; ++i) {
      const double t = 0.1 * i;
      const double clean = geometry::poly_eval(truth, t);
      const double eps = rng.normal();
      noisy.emplace_back(t, clean + eps);
      closer.emplace_back(t, clean + 0.3 * eps);
    }
    const auto residual = [](const std::vector<std::pair<double, double>>& pts) {
      const geometry::PolyCoeffs fit = geometry::poly_fit(pts);
      double acc = 0.0;
      for (const auto& [t, v] : pts) {
        const double r = v - geometry::poly_eval(fit, t);
        acc += r * r;
      }
      return acc;
    };
    CHECK(residual(closer) <= residual(noisy) + 1e-12);
  }
}

TEST_CASE("to_ego_frame maps the reference onto the origin") {
  geometry::Track track;
  track.sample_rate = 10.0;
  for (int i = 0; i < 5; ++i) {
    track.samples.push_back(
        geometry::TrackSample{0.1 * i, Pose2{3.0 + i, 2.0, 0.5}, 4.0});
  }
  const geometry::Track out = geometry::to_ego_frame(track, track.samples.back().pose);
  CHECK(std::abs(out.samples.back().pose.x) < 1e-12);
  CHECK(std::abs(out.samples.back().pose.y) < 1e-12);
  CHECK(std::abs(out.samples.back().pose.yaw) < 1e-12);
  CHECK(out.samples[0].speed == 4.0);
  out.validate();
}

TEST_CASE("track validation flags non-uniform spacing") {
  geometry::Track track;
  track.sample_rate = 10.0;
  track.samples.push_back(geometry::TrackSample{0.0, Pose2{}, 0.0});
  track.samples.push_back(geometry::TrackSample{0.25, Pose2{}, 0.0});
  CHECK_THROWS_AS(track.validate(), std::invalid_argument);
}
