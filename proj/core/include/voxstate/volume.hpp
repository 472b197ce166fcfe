#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxstate/errors.hpp"
#include "voxstate/matrix.hpp"

namespace voxstate {

// Condition labels share one fixed encoding across the whole toolkit.
enum Condition : int {
  kRest = 0,
  kNeutral = 1,
  kNegative = 2,
};
constexpr int kNumConditions = 3;

struct VolumeDims {
  std::uint32_t nx = 0, ny = 0, nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  bool operator==(const VolumeDims&) const = default;
};

// One 3D scan. Values are stored x-fastest: linear index
// x + nx * (y + ny * z). Files hold 32-bit floats; in memory we keep
// doubles like every other numeric path.
struct Volume {
  VolumeDims dims;
  std::vector<double> voxels;

  bool operator==(const Volume&) const = default;
};

// An ordered scan sequence for one (subject, run) pair with one
// condition label per timepoint. The ids are carried by the dataset
// manifest, not by the volume file itself.
struct VolumeSeries {
  std::string subject_id;
  std::string run_id;
  VolumeDims dims;
  std::vector<Volume> volumes;
  std::vector<int> labels;

  std::size_t n_timepoints() const { return volumes.size(); }
  void validate() const;
};

struct BrainMask {
  VolumeDims dims;
  std::vector<std::uint8_t> keep;

  std::size_t n_kept() const;
  // Linear indices (x-fastest) of kept voxels, ascending.
  std::vector<std::size_t> kept_indices() const;
  void validate() const;
};

// Rows = timepoints, columns = kept voxels in ascending x-fastest order.
Matrix apply_mask(const VolumeSeries& series, const BrainMask& mask);

}  // namespace voxstate
