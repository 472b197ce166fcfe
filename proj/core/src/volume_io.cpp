#include "voxstate/volume_io.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace voxstate {
namespace {

// Little-endian writer with an explicit byte count so error messages can
// name exact offsets.
class ByteWriter {
 public:
  ByteWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw format_error("cannot open for writing: " + path);
  }

  void u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    raw(b, 4);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u32(static_cast<std::uint32_t>(bits));
    u32(static_cast<std::uint32_t>(bits >> 32));
  }
  void bytes(const void* p, std::size_t n) {
    raw(static_cast<const unsigned char*>(p), n);
  }

  void close() {
    out_.close();
    if (!out_) throw format_error("write failed: " + path_);
  }

 private:
  void raw(const unsigned char* p, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw format_error("write failed: " + path_);
  }

  std::string path_;
  std::ofstream out_;
};

class ByteReader {
 public:
  ByteReader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw format_error("cannot open: " + path);
  }

  std::uint32_t u32() {
    unsigned char b[4];
    raw(b, 4);
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint8_t u8() {
    unsigned char b;
    raw(&b, 1);
    return b;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    std::uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void bytes(void* p, std::size_t n) { raw(static_cast<unsigned char*>(p), n); }

  void expect_magic(const char* magic) {
    char got[4];
    raw(reinterpret_cast<unsigned char*>(got), 4);
    if (std::memcmp(got, magic, 4) != 0)
      throw format_error(path_ + ": bad magic at offset 0, expected \"" +
                         std::string(magic, 4) + "\"");
  }

  std::size_t offset() const { return offset_; }

  void expect_eof() {
    char c;
    in_.read(&c, 1);
    if (!in_.eof())
      throw format_error(path_ + ": trailing bytes at offset " +
                         std::to_string(offset_));
  }

  const std::string& path() const { return path_; }

 private:
  void raw(unsigned char* p, std::size_t n) {
    in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw format_error(path_ + ": truncated at offset " +
                         std::to_string(offset_ + static_cast<std::size_t>(
                                                      in_.gcount())) +
                         ", needed " + std::to_string(n) + " more bytes");
    offset_ += n;
  }

  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

}  // namespace

void write_volume_file(const std::string& path, const VolumeSeries& series) {
  series.validate();
  ByteWriter w(path);
  w.bytes("BVOL", 4);
  w.u32(1);
  w.u32(series.dims.nx);
  w.u32(series.dims.ny);
  w.u32(series.dims.nz);
  w.u32(static_cast<std::uint32_t>(series.n_timepoints()));
  for (int label : series.labels) w.u8(static_cast<std::uint8_t>(label));
  for (const Volume& v : series.volumes)
    for (double x : v.voxels) w.f32(static_cast<float>(x));
  w.close();
}

VolumeSeries read_volume_file(const std::string& path) {
  ByteReader r(path);
  r.expect_magic("BVOL");
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw format_error(path + ": unsupported version " +
                       std::to_string(version) + " at offset 4");

  VolumeSeries s;
  s.dims.nx = r.u32();
  s.dims.ny = r.u32();
  s.dims.nz = r.u32();
  const std::uint32_t n_t = r.u32();
  const std::size_t voxels = s.dims.count();
  if (n_t > 0 && voxels == 0)
    throw format_error(path + ": zero voxel dims with " + std::to_string(n_t) +
                       " timepoints (header ends at offset 24)");

  s.labels.reserve(n_t);
  for (std::uint32_t t = 0; t < n_t; ++t) s.labels.push_back(r.u8());
  s.volumes.reserve(n_t);
  for (std::uint32_t t = 0; t < n_t; ++t) {
    Volume v;
    v.dims = s.dims;
    v.voxels.resize(voxels);
    for (std::size_t i = 0; i < voxels; ++i) v.voxels[i] = r.f32();
    s.volumes.push_back(std::move(v));
  }
  r.expect_eof();
  return s;
}

void write_mask_file(const std::string& path, const BrainMask& mask) {
  mask.validate();
  ByteWriter w(path);
  w.bytes("BMSK", 4);
  w.u32(1);
  w.u32(mask.dims.nx);
  w.u32(mask.dims.ny);
  w.u32(mask.dims.nz);
  for (std::uint8_t b : mask.keep) w.u8(b);
  w.close();
}

BrainMask read_mask_file(const std::string& path) {
  ByteReader r(path);
  r.expect_magic("BMSK");
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw format_error(path + ": unsupported version " +
                       std::to_string(version) + " at offset 4");
  BrainMask m;
  m.dims.nx = r.u32();
  m.dims.ny = r.u32();
  m.dims.nz = r.u32();
  m.keep.resize(m.dims.count());
  for (std::size_t i = 0; i < m.keep.size(); ++i) {
    const std::size_t at = r.offset();
    const std::uint8_t b = r.u8();
    if (b > 1)
      throw format_error(path + ": mask byte " + std::to_string(b) +
                         " at offset " + std::to_string(at) +
                         " is neither 0 nor 1");
    m.keep[i] = b;
  }
  r.expect_eof();
  m.validate();
  return m;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw format_error("cannot open for writing: " + path);
  for (const ManifestEntry& e : entries) {
    nlohmann::json j;
    j["subject_id"] = e.subject_id;
    j["run_id"] = e.run_id;
    j["path"] = e.path;
    out << j.dump() << "\n";
  }
  if (!out) throw format_error("write failed: " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw format_error(path + ": line " + std::to_string(line_no) +
                         " is not valid JSON: " + e.what());
    }
    for (const char* field : {"subject_id", "run_id", "path"})
      if (!j.contains(field) || !j[field].is_string())
        throw format_error(path + ": line " + std::to_string(line_no) +
                           " missing string field \"" + field + "\"");
    entries.push_back({j["subject_id"].get<std::string>(),
                       j["run_id"].get<std::string>(),
                       j["path"].get<std::string>()});
  }
  return entries;
}

std::string resolve_manifest_path(const std::string& manifest_path,
                                  const std::string& entry_path) {
  std::filesystem::path p(entry_path);
  if (p.is_absolute()) return entry_path;
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

}  // namespace voxstate
