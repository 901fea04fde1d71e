#include "trajpred/bev.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace trajpred::bev {

bool cell_index(double x, double y, int& ix, int& iy) {
  const double fx = std::floor(x - kMinX);
  const double fy = std::floor(y - kMinY);
  if (fx < 0.0 || fx >= kCellsX || fy < 0.0 || fy >= kCellsY) return false;
  ix = static_cast<int>(fx);
  iy = static_cast<int>(fy);
  return true;
}

BevFrame rasterize_frame(std::span<const VehicleObs> vehicles, std::span<const LidarPoint> points,
                         const geometry::Pose2& ego, double ground_z_threshold) {
  BevFrame frame;
  std::vector<uint8_t> vehicle_mask(static_cast<size_t>(kCellsX) * kCellsY, 0);
  const auto mask_at = [&vehicle_mask](int ix, int iy) -> uint8_t& {
    return vehicle_mask[static_cast<size_t>(ix) * kCellsY + static_cast<size_t>(iy)];
  };

  // Vehicles first: center plus the four footprint corners each write their
  // own ego-frame position together with state and class.
  for (const auto& v : vehicles) {
    const geometry::Pose2 center = geometry::to_frame(v.pose, ego);
    std::array<std::pair<double, double>, 5> inserts;
    inserts[0] = {center.x, center.y};
    for (size_t c = 0; c < 4; ++c) {
      const geometry::Pose2 corner =
          geometry::to_frame(geometry::Pose2{v.corners[c].first, v.corners[c].second, 0.0}, ego);
      inserts[c + 1] = {corner.x, corner.y};
    }
    for (const auto& [px, py] : inserts) {
      int ix = 0;
      int iy = 0;
      if (!cell_index(px, py, ix, iy)) continue;
      frame.at(ix, iy, kChPosX) = px;
      frame.at(ix, iy, kChPosY) = py;
      frame.at(ix, iy, kChState) = v.state;
      frame.at(ix, iy, kChClass) = v.cls;
      mask_at(ix, iy) = 1;
    }
  }

  // Lidar: counts always accumulate; the mean position only fills cells not
  // claimed by a vehicle.
  std::vector<double> sum_x(static_cast<size_t>(kCellsX) * kCellsY, 0.0);
  std::vector<double> sum_y(static_cast<size_t>(kCellsX) * kCellsY, 0.0);
  for (const auto& p : points) {
    if (p.z < ground_z_threshold) continue;  // ground filter
    const geometry::Pose2 q = geometry::to_frame(geometry::Pose2{p.x, p.y, 0.0}, ego);
    int ix = 0;
    int iy = 0;
    if (!cell_index(q.x, q.y, ix, iy)) continue;
    frame.at(ix, iy, kChLidarCount) += 1.0;
    const size_t flat = static_cast<size_t>(ix) * kCellsY + static_cast<size_t>(iy);
    sum_x[flat] += q.x;
    sum_y[flat] += q.y;
  }
  for (int ix = 0; ix < kCellsX; ++ix) {
    for (int iy = 0; iy < kCellsY; ++iy) {
      const double count = frame.at(ix, iy, kChLidarCount);
      if (count > 0.0 && mask_at(ix, iy) == 0) {
        const size_t flat = static_cast<size_t>(ix) * kCellsY + static_cast<size_t>(iy);
        frame.at(ix, iy, kChPosX) = sum_x[flat] / count;
        frame.at(ix, iy, kChPosY) = sum_y[flat] / count;
      }
    }
  }
  return frame;
}

BevTensor accumulate(std::span<const SceneSnapshot> history, const geometry::Pose2& ego_now,
                     bool parallel, double ground_z_threshold) {
  if (history.size() != static_cast<size_t>(kFrames)) {
    throw std::invalid_argument("bev::accumulate: expected exactly " + std::to_string(kFrames) +
                                " snapshots, got " + std::to_string(history.size()));
  }
  BevTensor tensor;
  tensor.frames.resize(static_cast<size_t>(kFrames));
#pragma omp parallel for schedule(static) if (parallel)
  for (int f = 0; f < kFrames; ++f) {
    const auto& snap = history[static_cast<size_t>(f)];
    tensor.frames[static_cast<size_t>(f)] =
        rasterize_frame(snap.vehicles, snap.points, ego_now, ground_z_threshold);
  }
  return tensor;
}

std::vector<SceneSnapshot> pad_history(std::span<const SceneSnapshot> history, bool& padded) {
  if (history.empty()) throw std::invalid_argument("bev::pad_history: empty history");
  std::vector<SceneSnapshot> out;
  out.reserve(static_cast<size_t>(kFrames));
  padded = history.size() < static_cast<size_t>(kFrames);
  const size_t missing =
      history.size() < static_cast<size_t>(kFrames) ? static_cast<size_t>(kFrames) - history.size() : 0;
  for (size_t i = 0; i < missing; ++i) out.push_back(history.front());
  const size_t start = history.size() > static_cast<size_t>(kFrames)
                           ? history.size() - static_cast<size_t>(kFrames)
                           : 0;
  for (size_t i = start; i < history.size(); ++i) out.push_back(history[i]);
  return out;
}

namespace {

void put_u32le(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put_f32le(std::ostream& out, float f) {
  uint32_t v = 0;
  std::memcpy(&v, &f, 4);
  put_u32le(out, v);
}

uint32_t get_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("bev: truncated stream");
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

}  // namespace

void write_binary(const BevTensor& tensor, std::ostream& out) {
  out.write("BEV1", 4);
  put_u32le(out, kFrames);
  put_u32le(out, kCellsX);
  put_u32le(out, kCellsY);
  for (const auto& frame : tensor.frames) {
    for (const double v : frame.data) put_f32le(out, static_cast<float>(v));
  }
}

BevTensor read_binary(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "BEV1", 4) != 0) {
    throw std::runtime_error("bev: bad magic, not a BEV1 file");
  }
  const uint32_t frames = get_u32le(in);
  const uint32_t cx = get_u32le(in);
  const uint32_t cy = get_u32le(in);
  if (frames != kFrames || cx != kCellsX || cy != kCellsY) {
    throw std::runtime_error("bev: unexpected dimensions in header");
  }
  BevTensor tensor;
  tensor.frames.resize(kFrames);
  for (auto& frame : tensor.frames) {
    for (auto& v : frame.data) {
      const uint32_t raw = get_u32le(in);
      float f = 0.0f;
      std::memcpy(&f, &raw, 4);
      v = static_cast<double>(f);
    }
  }
  return tensor;
}

}  // namespace trajpred::bev
