#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "segfuse/volume.hpp"

namespace segfuse::nifti {

enum class Datatype : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kFloat32 = 16,
  kFloat64 = 64,
};

enum class ErrorKind {
  kIo,
  kBadMagic,
  kNifti2,
  kEndianness,
  kUnsupportedDatatype,
  kShape,
  kInvalidHeader,
  kTruncated,
  kCompression,
  kRange,
};

const char* to_string(ErrorKind kind);

class NiftiError : public std::runtime_error {
 public:
  NiftiError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline constexpr std::size_t kHeaderSize = 348;

/// Decoded subset of the 348-byte NIfTI-1 header that the reader uses.
struct Header {
  std::int16_t dim[8]{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  float pixdim[8]{};
  float vox_offset = 0.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quatern[3]{};
  float qoffset[3]{};
  float srow[3][4]{};
  char magic[4]{};
};

/// Parses and validates a little-endian NIfTI-1 header block.
/// `bytes` must hold at least kHeaderSize bytes.
Header parse_header(std::span<const std::uint8_t> bytes);

/// Reads .nii, .nii.gz (detected by the 0x1F 0x8B prefix, not the suffix)
/// and .hdr/.img pairs. Values are scaled by scl_slope/scl_inter when the
/// slope is nonzero.
ScalarVolume read_volume(const std::filesystem::path& path);

/// Decodes a complete in-memory single-file image (.nii or gzip of one).
ScalarVolume decode_volume(std::span<const std::uint8_t> file_bytes);

/// Serializes to a single-file image; gzip-compressed when `compress` is set.
/// The gzip stream carries no timestamp, so output is byte-deterministic.
std::vector<std::uint8_t> encode_volume(const ScalarVolume& v, Datatype datatype, bool compress);

void write_volume(const ScalarVolume& v, const std::filesystem::path& path, Datatype datatype,
                  bool compress);

inline void write_mask(const BinaryMask& m, const std::filesystem::path& path, bool compress) {
  write_volume(m.as_scalar(), path, Datatype::kUint8, compress);
}

/// True when the path name ends in ".gz".
bool has_gzip_suffix(const std::filesystem::path& path);

Datatype parse_datatype(const std::string& name);

}  // namespace segfuse::nifti
