#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace trajpred::geometry {

enum class Axis { x, y };

/// Planar pose. x is the longitudinal axis, y the lateral axis (positive
/// left), yaw in radians normalized to (-pi, pi].
struct Pose2 {
  double x{0.0};
  double y{0.0};
  double yaw{0.0};
};

// Wrap an angle into (-pi, pi].
double normalize_angle(double a);

// Express `p` (global) in the frame anchored at `reference`; the reference
// itself maps to the origin with yaw 0.
Pose2 to_frame(const Pose2& p, const Pose2& reference);

// Inverse of to_frame: map a reference-frame pose back to the global frame.
Pose2 from_frame(const Pose2& p, const Pose2& reference);

struct TrackSample {
  double t{0.0};  // seconds
  Pose2 pose;
  double speed{0.0};  // m/s
};

/// A uniformly sampled sequence of timed poses.
struct Track {
  std::vector<TrackSample> samples;
  double sample_rate{10.0};  // Hz

  size_t size() const { return samples.size(); }
  // Throws if timestamps are not strictly increasing with uniform spacing
  // 1/sample_rate (tolerance 1e-9 s).
  void validate() const;
};

Track to_ego_frame(const Track& track, const Pose2& reference);

/// Degree-4 polynomial of time with zero constant term:
///   mu(t) = a0*t^4 + a1*t^3 + a2*t^2 + a3*t
/// so mu(0) = 0 by construction.
struct PolyCoeffs {
  std::array<double, 4> a{0.0, 0.0, 0.0, 0.0};
};

double poly_eval(const PolyCoeffs& coeffs, double t);

// Least-squares fit of the four coefficients to (t, value) points, solved
// with a column-pivoting QR decomposition. Requires >= 4 points with
// distinct positive times; throws std::invalid_argument on bad input and
// std::runtime_error if the design matrix is rank deficient.
PolyCoeffs poly_fit(std::span<const std::pair<double, double>> points);

}  // namespace trajpred::geometry
