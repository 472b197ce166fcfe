#include "voxstate/volume.hpp"

#include <cmath>
#include <string>

namespace voxstate {

void VolumeSeries::validate() const {
  if (labels.size() != volumes.size())
    throw config_error("VolumeSeries: " + std::to_string(labels.size()) +
                       " labels for " + std::to_string(volumes.size()) +
                       " volumes");
  for (std::size_t t = 0; t < volumes.size(); ++t) {
    const Volume& v = volumes[t];
    if (!(v.dims == dims))
      throw config_error("VolumeSeries: volume " + std::to_string(t) +
                         " dims differ from series dims");
    if (v.voxels.size() != dims.count())
      throw config_error("VolumeSeries: volume " + std::to_string(t) +
                         " has " + std::to_string(v.voxels.size()) +
                         " voxels, expected " + std::to_string(dims.count()));
    for (double x : v.voxels)
      if (!std::isfinite(x))
        throw numeric_error("VolumeSeries: non-finite voxel in volume " +
                            std::to_string(t));
  }
}

std::size_t BrainMask::n_kept() const {
  std::size_t n = 0;
  for (std::uint8_t b : keep) n += (b != 0);
  return n;
}

std::vector<std::size_t> BrainMask::kept_indices() const {
  std::vector<std::size_t> idx;
  idx.reserve(n_kept());
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i]) idx.push_back(i);
  return idx;
}

void BrainMask::validate() const {
  if (keep.size() != dims.count())
    throw config_error("BrainMask: keep length " +
                       std::to_string(keep.size()) + " != voxel count " +
                       std::to_string(dims.count()));
  if (n_kept() == 0) throw config_error("BrainMask: no voxels kept");
}

Matrix apply_mask(const VolumeSeries& series, const BrainMask& mask) {
  if (!(series.dims == mask.dims))
    throw config_error("apply_mask: series dims do not match mask dims");
  mask.validate();
  const std::vector<std::size_t> idx = mask.kept_indices();
  Matrix out(series.n_timepoints(), idx.size());
  for (std::size_t t = 0; t < series.n_timepoints(); ++t) {
    const std::vector<double>& vox = series.volumes[t].voxels;
    for (std::size_t j = 0; j < idx.size(); ++j) out(t, j) = vox[idx[j]];
  }
  return out;
}

}  // namespace voxstate
