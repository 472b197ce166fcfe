#pragma once

#include <string>
#include <vector>

#include "voxstate/volume.hpp"

namespace voxstate {

/**
 * Binary volume file, little-endian:
 *   "BVOL"  u32 version=1  u32 nx  u32 ny  u32 nz  u32 n_timepoints
 *   u8 label per timepoint
 *   n_timepoints * nx*ny*nz float32 voxels, x-fastest, timepoint-major
 *
 * Malformed input raises format_error naming the file and byte offset.
 * Voxel values are narrowed to float32 on write; a series whose values
 * are float32-representable round-trips bit-exactly. subject_id/run_id
 * live in the manifest, not in this file, so the reader leaves them
 * empty.
 */
void write_volume_file(const std::string& path, const VolumeSeries& series);
VolumeSeries read_volume_file(const std::string& path);

/**
 * Mask file, little-endian:
 *   "BMSK"  u32 version=1  u32 nx  u32 ny  u32 nz
 *   nx*ny*nz bytes, each 0 or 1
 */
void write_mask_file(const std::string& path, const BrainMask& mask);
BrainMask read_mask_file(const std::string& path);

// One dataset row: which subject/run a volume file belongs to. The path
// is stored as written (normally relative to the manifest's directory).
struct ManifestEntry {
  std::string subject_id;
  std::string run_id;
  std::string path;

  bool operator==(const ManifestEntry&) const = default;
};

// JSON-lines manifest: one {"subject_id","run_id","path"} object per line.
void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Interprets an entry path relative to the manifest's directory unless
// the entry path is absolute.
std::string resolve_manifest_path(const std::string& manifest_path,
                                  const std::string& entry_path);

}  // namespace voxstate
