#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "trajpred/geometry.hpp"

namespace trajpred::bev {

inline constexpr int kFrames = 20;
inline constexpr int kCellsX = 121;
inline constexpr int kCellsY = 21;
inline constexpr int kChannels = 5;
inline constexpr double kMinX = -60.5;  // cell (i,j) covers [i-60.5, i-59.5) x [j-10.5, j-9.5)
inline constexpr double kMinY = -10.5;

// Channel indices.
inline constexpr int kChPosX = 0;
inline constexpr int kChPosY = 1;
inline constexpr int kChState = 2;
inline constexpr int kChClass = 3;
inline constexpr int kChLidarCount = 4;

// State codes: 0 none, 1 parked, 2 stopped, 3 dynamic.
// Class codes: 0 none, 1 two-wheeler, 2 car, 3 truck.

struct VehicleObs {
  geometry::Pose2 pose;  // global frame
  std::array<std::pair<double, double>, 4> corners;  // global frame footprint
  int state{0};
  int cls{0};
};

struct LidarPoint {
  double x{0.0};
  double y{0.0};
  double z{0.0};
};

/// One rasterized 121x21x5 grid in the ego frame.
struct BevFrame {
  std::vector<double> data;  // [ix][iy][channel], row-major

  BevFrame() : data(static_cast<size_t>(kCellsX) * kCellsY * kChannels, 0.0) {}
  double& at(int ix, int iy, int ch) {
    return data[(static_cast<size_t>(ix) * kCellsY + static_cast<size_t>(iy)) * kChannels +
                static_cast<size_t>(ch)];
  }
  double at(int ix, int iy, int ch) const {
    return data[(static_cast<size_t>(ix) * kCellsY + static_cast<size_t>(iy)) * kChannels +
                static_cast<size_t>(ch)];
  }
};

// Returns false when the ego-frame position falls outside the grid.
bool cell_index(double x, double y, int& ix, int& iy);

// Rasterize one snapshot into the frame anchored at `ego`. Vehicle centers
// and corners write pos/state/class into their cells; non-ground lidar
// points (z >= ground_z_threshold) increment lidar_count and update the
// cell's running mean position when no vehicle occupies the cell.
// Out-of-range items are silently dropped.
BevFrame rasterize_frame(std::span<const VehicleObs> vehicles, std::span<const LidarPoint> points,
                         const geometry::Pose2& ego, double ground_z_threshold = 0.3);

struct SceneSnapshot {
  std::vector<VehicleObs> vehicles;
  std::vector<LidarPoint> points;
};

/// 20 stacked frames, oldest first, all rasterized in one common ego frame.
struct BevTensor {
  std::vector<BevFrame> frames;  // exactly kFrames
};

// History must hold exactly 20 snapshots (oldest first); throws otherwise.
// Every snapshot is rasterized in the CURRENT ego frame so static structure
// occupies the same cells across the stack.
BevTensor accumulate(std::span<const SceneSnapshot> history, const geometry::Pose2& ego_now,
                     bool parallel = true, double ground_z_threshold = 0.3);

// Pads a short history by repeating the oldest snapshot; sets `padded`.
std::vector<SceneSnapshot> pad_history(std::span<const SceneSnapshot> history, bool& padded);

// Binary dump: 16-byte header "BEV1" + three LE uint32 dims (20, 121, 21),
// then float32 LE values in C row-major order [frame][row_x][col_y][channel].
void write_binary(const BevTensor& tensor, std::ostream& out);
BevTensor read_binary(std::istream& in);

}  // namespace trajpred::bev
