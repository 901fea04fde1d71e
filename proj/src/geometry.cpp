#include "trajpred/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace trajpred::geometry {

double normalize_angle(double a) {
  constexpr double pi = 3.14159265358979323846;
  double r = std::fmod(a + pi, 2.0 * pi);
  if (r <= 0.0) r += 2.0 * pi;
  return r - pi;
}

Pose2 to_frame(const Pose2& p, const Pose2& reference) {
  const double c = std::cos(reference.yaw);
  const double s = std::sin(reference.yaw);
  const double dx = p.x - reference.x;
  const double dy = p.y - reference.y;
  return Pose2{c * dx + s * dy, -s * dx + c * dy, normalize_angle(p.yaw - reference.yaw)};
}

Pose2 from_frame(const Pose2& p, const Pose2& reference) {
  const double c = std::cos(reference.yaw);
  const double s = std::sin(reference.yaw);
  return Pose2{reference.x + c * p.x - s * p.y, reference.y + s * p.x + c * p.y,
               normalize_angle(p.yaw + reference.yaw)};
}

void Track::validate() const {
  if (sample_rate <= 0.0) throw std::invalid_argument("Track: sample_rate must be positive");
  const double dt = 1.0 / sample_rate;
  for (size_t i = 1; i < samples.size(); ++i) {
    const double gap = samples[i].t - samples[i - 1].t;
    if (gap <= 0.0) throw std::invalid_argument("Track: timestamps must be strictly increasing");
    if (std::abs(gap - dt) > 1e-9) {
      throw std::invalid_argument("Track: non-uniform sample spacing at index " + std::to_string(i));
    }
  }
}

Track to_ego_frame(const Track& track, const Pose2& reference) {
  Track out;
  out.sample_rate = track.sample_rate;
  out.samples.reserve(track.samples.size());
  for (const auto& s : track.samples) {
    out.samples.push_back(TrackSample{s.t, to_frame(s.pose, reference), s.speed});
  }
  return out;
}

double poly_eval(const PolyCoeffs& coeffs, double t) {
  // Horner over a0*t^4 + a1*t^3 + a2*t^2 + a3*t.
  return t * (coeffs.a[3] + t * (coeffs.a[2] + t * (coeffs.a[1] + t * coeffs.a[0])));
}

PolyCoeffs poly_fit(std::span<const std::pair<double, double>> points) {
  if (points.size() < 4) throw std::invalid_argument("poly_fit: need at least 4 points");
  for (const auto& [t, v] : points) {
    if (!(t > 0.0)) throw std::invalid_argument("poly_fit: times must be positive");
    if (!std::isfinite(t) || !std::isfinite(v)) {
      throw std::invalid_argument("poly_fit: non-finite input");
    }
  }

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(n, 4);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = points[static_cast<size_t>(i)].first;
    const double t2 = t * t;
    design(i, 0) = t2 * t2;
    design(i, 1) = t2 * t;
    design(i, 2) = t2;
    design(i, 3) = t;
    rhs(i) = points[static_cast<size_t>(i)].second;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 4) throw std::runtime_error("poly_fit: rank-deficient design matrix");
  const Eigen::Vector4d sol = qr.solve(rhs);

  PolyCoeffs out;
  for (int d = 0; d < 4; ++d) out.a[static_cast<size_t>(d)] = sol(d);
  return out;
}

}  // namespace trajpred::geometry
