#include "segfuse/nifti_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>

static_assert(std::endian::native == std::endian::little,
              "NIfTI payload decoding assumes a little-endian host");

namespace segfuse::nifti {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kBadMagic: return "bad magic";
    case ErrorKind::kNifti2: return "nifti-2 not supported";
    case ErrorKind::kEndianness: return "big-endian not supported";
    case ErrorKind::kUnsupportedDatatype: return "unsupported datatype";
    case ErrorKind::kShape: return "unsupported shape";
    case ErrorKind::kInvalidHeader: return "invalid header";
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kCompression: return "gzip error";
    case ErrorKind::kRange: return "value out of range";
  }
  return "nifti error";
}

namespace {

constexpr std::size_t kExtensionFlagSize = 4;
constexpr std::size_t kChunk = std::size_t{1} << 20;

template <typename T>
T load(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

template <typename T>
void store(std::vector<std::uint8_t>& bytes, std::size_t offset, T v) {
  std::memcpy(bytes.data() + offset, &v, sizeof(T));
}

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

// Sequential byte source. read() returns fewer bytes than requested only at
// end of stream.
class Reader {
 public:
  virtual ~Reader() = default;
  virtual std::size_t read(std::uint8_t* dst, std::size_t n) = 0;
};

class MemoryReader final : public Reader {
 public:
  explicit MemoryReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::size_t read(std::uint8_t* dst, std::size_t n) override {
    const std::size_t k = std::min(n, bytes_.size() - pos_);
    std::memcpy(dst, bytes_.data() + pos_, k);
    pos_ += k;
    return k;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

class FileReader final : public Reader {
 public:
  explicit FileReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw NiftiError(ErrorKind::kIo, "cannot open " + path.string());
  }
  std::size_t read(std::uint8_t* dst, std::size_t n) override {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (in_.bad()) throw NiftiError(ErrorKind::kIo, "read failed");
    return static_cast<std::size_t>(in_.gcount());
  }

 private:
  std::ifstream in_;
};

class GzipReader final : public Reader {
 public:
  explicit GzipReader(Reader& upstream) : upstream_(upstream) {
    stream_.zalloc = Z_NULL;
    stream_.zfree = Z_NULL;
    stream_.opaque = Z_NULL;
    if (inflateInit2(&stream_, 15 + 16) != Z_OK) {
      throw NiftiError(ErrorKind::kCompression, "inflateInit2 failed");
    }
  }
  ~GzipReader() override { inflateEnd(&stream_); }
  GzipReader(const GzipReader&) = delete;
  GzipReader& operator=(const GzipReader&) = delete;

  std::size_t read(std::uint8_t* dst, std::size_t n) override {
    std::size_t produced = 0;
    while (produced < n && !finished_) {
      if (stream_.avail_in == 0) {
        in_len_ = upstream_.read(in_buf_.data(), in_buf_.size());
        if (in_len_ == 0) {
          // Stream ends without a gzip trailer; whatever was inflated is all there is.
          finished_ = true;
          break;
        }
        stream_.next_in = in_buf_.data();
        stream_.avail_in = static_cast<uInt>(in_len_);
      }
      const std::size_t want = std::min<std::size_t>(n - produced, std::numeric_limits<uInt>::max());
      stream_.next_out = dst + produced;
      stream_.avail_out = static_cast<uInt>(want);
      const int rc = inflate(&stream_, Z_NO_FLUSH);
      produced += want - stream_.avail_out;
      if (rc == Z_STREAM_END) {
        finished_ = true;
      } else if (rc != Z_OK && rc != Z_BUF_ERROR) {
        throw NiftiError(ErrorKind::kCompression,
                         stream_.msg != nullptr ? stream_.msg : "corrupt gzip stream");
      }
    }
    return produced;
  }

 private:
  Reader& upstream_;
  z_stream stream_{};
  std::vector<std::uint8_t> in_buf_ = std::vector<std::uint8_t>(64 * 1024);
  std::size_t in_len_ = 0;
  bool finished_ = false;
};

std::size_t bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case 2: return 1;
    case 4: return 2;
    case 16: return 4;
    case 64: return 8;
    default: return 0;
  }
}

void read_exact(Reader& r, std::uint8_t* dst, std::size_t n, const char* what) {
  if (r.read(dst, n) != n) {
    throw NiftiError(ErrorKind::kTruncated, std::string("unexpected end of data in ") + what);
  }
}

void skip(Reader& r, std::size_t n) {
  std::vector<std::uint8_t> scratch(std::min(n, kChunk));
  while (n > 0) {
    const std::size_t k = std::min(n, scratch.size());
    read_exact(r, scratch.data(), k, "header extension");
    n -= k;
  }
}

// Grows the buffer with the data actually present rather than the declared
// size, so a corrupt dim field cannot force a huge allocation.
std::vector<std::uint8_t> read_payload(Reader& r, std::size_t n) {
  std::vector<std::uint8_t> out;
  while (out.size() < n) {
    const std::size_t k = std::min(n - out.size(), kChunk);
    const std::size_t old = out.size();
    out.resize(old + k);
    const std::size_t got = r.read(out.data() + old, k);
    if (got != k) {
      throw NiftiError(ErrorKind::kTruncated, "payload has " + std::to_string(old + got) +
                                                  " of " + std::to_string(n) + " bytes");
    }
  }
  return out;
}

std::size_t payload_offset(const Header& h) {
  if (!std::isfinite(h.vox_offset) || h.vox_offset < 0.0f ||
      h.vox_offset != std::floor(h.vox_offset) || h.vox_offset > 1.0e9f) {
    throw NiftiError(ErrorKind::kInvalidHeader, "vox_offset is not a valid byte offset");
  }
  return static_cast<std::size_t>(h.vox_offset);
}

Grid header_grid(const Header& h) {
  Spacing spacing{std::abs(static_cast<double>(h.pixdim[1])),
                  std::abs(static_cast<double>(h.pixdim[2])),
                  std::abs(static_cast<double>(h.pixdim[3]))};
  Affine affine = diagonal_affine(spacing);
  if (h.sform_code > 0) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) affine[r][c] = h.srow[r][c];
  } else if (h.qform_code > 0) {
    const double b = h.quatern[0];
    const double c = h.quatern[1];
    const double d = h.quatern[2];
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
    const double rot[3][3] = {
        {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
        {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
        {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b}};
    const double scale[3] = {spacing[0], spacing[1], qfac * spacing[2]};
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) affine[r][col] = rot[r][col] * scale[col];
      affine[r][3] = h.qoffset[r];
    }
  }
  return Grid({h.dim[1], h.dim[2], h.dim[3]}, spacing, affine);
}

template <typename T>
void convert(std::span<const std::uint8_t> raw, std::vector<float>& out, double slope,
             double inter, bool scale) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = load<T>(raw, i * sizeof(T));
    out[i] = scale ? static_cast<float>(static_cast<double>(v) * slope + inter)
                   : static_cast<float>(v);
  }
}

ScalarVolume decode_payload(const Header& h, std::span<const std::uint8_t> raw) {
  Grid grid = header_grid(h);
  std::vector<float> values(grid.voxel_count());
  const bool slope_set = std::isfinite(h.scl_slope) && h.scl_slope != 0.0f;
  const double slope = slope_set ? h.scl_slope : 1.0;
  const double inter = slope_set && std::isfinite(h.scl_inter) ? h.scl_inter : 0.0;
  const bool scale = slope_set && !(slope == 1.0 && inter == 0.0);
  switch (h.datatype) {
    case 2: convert<std::uint8_t>(raw, values, slope, inter, scale); break;
    case 4: convert<std::int16_t>(raw, values, slope, inter, scale); break;
    case 16: convert<float>(raw, values, slope, inter, scale); break;
    case 64: convert<double>(raw, values, slope, inter, scale); break;
    default: break;
  }
  return ScalarVolume(std::move(grid), std::move(values));
}

std::size_t payload_size(const Header& h) {
  std::size_t n = bytes_per_voxel(h.datatype);
  for (int i = 1; i <= 3; ++i) n *= static_cast<std::size_t>(h.dim[i]);
  return n;
}

// Reads header, skips extensions and decodes the payload from one stream.
// `available` is the total stream length when known up front.
ScalarVolume decode_stream(Reader& r, std::optional<std::size_t> available) {
  std::vector<std::uint8_t> header_bytes(kHeaderSize);
  read_exact(r, header_bytes.data(), kHeaderSize, "header");
  const Header h = parse_header(header_bytes);
  if (std::memcmp(h.magic, "ni1", 4) == 0) {
    throw NiftiError(ErrorKind::kBadMagic,
                     "two-file image (ni1) must be read through its .hdr path");
  }
  const std::size_t offset = payload_offset(h);
  if (offset < kHeaderSize) {
    throw NiftiError(ErrorKind::kInvalidHeader, "vox_offset lies inside the header");
  }
  const std::size_t n = payload_size(h);
  if (available && *available < offset + n) {
    throw NiftiError(ErrorKind::kTruncated, "file holds " + std::to_string(*available) +
                                                " bytes, header declares " +
                                                std::to_string(offset + n));
  }
  skip(r, offset - kHeaderSize);
  const auto raw = read_payload(r, n);
  return decode_payload(h, raw);
}

bool starts_with_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

std::vector<std::uint8_t> gzip(std::span<const std::uint8_t> in) {
  z_stream s{};
  if (deflateInit2(&s, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) !=
      Z_OK) {
    throw NiftiError(ErrorKind::kCompression, "deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&s, static_cast<uLong>(in.size())) + 32);
  s.next_in = const_cast<Bytef*>(in.data());
  s.avail_in = static_cast<uInt>(in.size());
  s.next_out = out.data();
  s.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&s, Z_FINISH);
  const std::size_t written = out.size() - s.avail_out;
  deflateEnd(&s);
  if (rc != Z_STREAM_END) throw NiftiError(ErrorKind::kCompression, "deflate did not finish");
  out.resize(written);
  return out;
}

void check_representable(const ScalarVolume& v, Datatype datatype) {
  double lo = 0.0;
  double hi = 0.0;
  switch (datatype) {
    case Datatype::kUint8: lo = 0; hi = 255; break;
    case Datatype::kInt16: lo = -32768; hi = 32767; break;
    default: return;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (!(x >= lo && x <= hi) || x != std::floor(x)) {
      throw NiftiError(ErrorKind::kRange, "voxel " + std::to_string(i) + " value " +
                                              std::to_string(x) +
                                              " is not representable in the output datatype");
    }
  }
}

}  // namespace

Header parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw NiftiError(ErrorKind::kTruncated, "header shorter than 348 bytes");
  }
  const auto sizeof_hdr = load<std::uint32_t>(bytes, 0);
  if (sizeof_hdr == 540) throw NiftiError(ErrorKind::kNifti2, "sizeof_hdr is 540");
  if (sizeof_hdr == byteswap32(348) || sizeof_hdr == byteswap32(540)) {
    throw NiftiError(ErrorKind::kEndianness, "header is byte-swapped");
  }
  if (sizeof_hdr != 348) {
    throw NiftiError(ErrorKind::kInvalidHeader,
                     "sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348");
  }

  Header h;
  std::memcpy(h.magic, bytes.data() + 344, 4);
  if (std::memcmp(h.magic, "n+2", 4) == 0) throw NiftiError(ErrorKind::kNifti2, "magic n+2");
  if (std::memcmp(h.magic, "n+1", 4) != 0 && std::memcmp(h.magic, "ni1", 4) != 0) {
    throw NiftiError(ErrorKind::kBadMagic, "magic is not \"n+1\" or \"ni1\"");
  }

  for (int i = 0; i < 8; ++i) h.dim[i] = load<std::int16_t>(bytes, 40 + 2 * i);
  h.datatype = load<std::int16_t>(bytes, 70);
  h.bitpix = load<std::int16_t>(bytes, 72);
  for (int i = 0; i < 8; ++i) h.pixdim[i] = load<float>(bytes, 76 + 4 * i);
  h.vox_offset = load<float>(bytes, 108);
  h.scl_slope = load<float>(bytes, 112);
  h.scl_inter = load<float>(bytes, 116);
  h.qform_code = load<std::int16_t>(bytes, 252);
  h.sform_code = load<std::int16_t>(bytes, 254);
  for (int i = 0; i < 3; ++i) {
    h.quatern[i] = load<float>(bytes, 256 + 4 * i);
    h.qoffset[i] = load<float>(bytes, 268 + 4 * i);
  }
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) h.srow[r][c] = load<float>(bytes, 280 + 16 * r + 4 * c);

  if (h.dim[0] > 7 || h.dim[0] < 0) {
    throw NiftiError(ErrorKind::kEndianness,
                     "dim[0] = " + std::to_string(h.dim[0]) + " implies a byte-swapped header");
  }
  if (h.dim[0] != 3 && h.dim[0] != 4) {
    throw NiftiError(ErrorKind::kShape, "dim[0] = " + std::to_string(h.dim[0]) +
                                            ", only 3D images are supported");
  }
  if (h.dim[0] == 4 && h.dim[4] != 1) {
    throw NiftiError(ErrorKind::kShape,
                     "dim[4] = " + std::to_string(h.dim[4]) + ", only single-channel supported");
  }
  for (int i = 1; i <= 3; ++i) {
    if (h.dim[i] < 1) {
      throw NiftiError(ErrorKind::kShape,
                       "dim[" + std::to_string(i) + "] = " + std::to_string(h.dim[i]));
    }
  }

  const std::size_t bpv = bytes_per_voxel(h.datatype);
  if (bpv == 0) {
    throw NiftiError(ErrorKind::kUnsupportedDatatype,
                     "datatype code " + std::to_string(h.datatype) + " is not supported");
  }
  if (static_cast<std::size_t>(h.bitpix) != 8 * bpv) {
    throw NiftiError(ErrorKind::kInvalidHeader,
                     "bitpix " + std::to_string(h.bitpix) + " does not match datatype " +
                         std::to_string(h.datatype));
  }
  for (int i = 1; i <= 3; ++i) {
    const float s = std::abs(h.pixdim[i]);
    if (!std::isfinite(s) || s <= 0.0f) {
      throw NiftiError(ErrorKind::kInvalidHeader,
                       "pixdim[" + std::to_string(i) + "] must be finite and nonzero");
    }
  }
  if (h.sform_code > 0) {
    for (const auto& row : h.srow)
      for (float x : row)
        if (!std::isfinite(x)) throw NiftiError(ErrorKind::kInvalidHeader, "non-finite srow");
  }
  payload_offset(h);
  return h;
}

ScalarVolume decode_volume(std::span<const std::uint8_t> file_bytes) {
  MemoryReader mem(file_bytes);
  if (starts_with_gzip(file_bytes)) {
    GzipReader gz(mem);
    return decode_stream(gz, std::nullopt);
  }
  return decode_stream(mem, file_bytes.size());
}

ScalarVolume read_volume(const std::filesystem::path& path) {
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) throw NiftiError(ErrorKind::kIo, "cannot stat " + path.string() + ": " + ec.message());

  FileReader file(path);
  std::uint8_t prefix[2] = {0, 0};
  const std::size_t got = file.read(prefix, 2);
  FileReader stream(path);
  if (got == 2 && prefix[0] == 0x1F && prefix[1] == 0x8B) {
    GzipReader gz(stream);
    return decode_stream(gz, std::nullopt);
  }

  if (path.extension() == ".hdr") {
    std::vector<std::uint8_t> header_bytes(kHeaderSize);
    read_exact(stream, header_bytes.data(), kHeaderSize, "header");
    const Header h = parse_header(header_bytes);
    if (std::memcmp(h.magic, "ni1", 4) != 0) {
      throw NiftiError(ErrorKind::kBadMagic, ".hdr file does not carry the ni1 magic");
    }
    auto image_path = path;
    image_path.replace_extension(".img");
    const auto image_size = std::filesystem::file_size(image_path, ec);
    if (ec) throw NiftiError(ErrorKind::kIo, "cannot stat " + image_path.string());
    const std::size_t offset = payload_offset(h);
    const std::size_t n = payload_size(h);
    if (image_size < offset + n) {
      throw NiftiError(ErrorKind::kTruncated, image_path.string() + " is shorter than declared");
    }
    FileReader image(image_path);
    skip(image, offset);
    return decode_payload(h, read_payload(image, n));
  }
  return decode_stream(stream, static_cast<std::size_t>(file_size));
}

std::vector<std::uint8_t> encode_volume(const ScalarVolume& v, Datatype datatype, bool compress) {
  check_representable(v, datatype);
  const Grid& g = v.grid();
  const std::size_t bpv = bytes_per_voxel(static_cast<std::int16_t>(datatype));
  const std::size_t offset = kHeaderSize + kExtensionFlagSize;
  for (int i = 0; i < 3; ++i) {
    if (g.dims()[i] > std::numeric_limits<std::int16_t>::max()) {
      throw NiftiError(ErrorKind::kShape, "dimension exceeds the NIfTI-1 limit of 32767");
    }
  }

  std::vector<std::uint8_t> out(offset + bpv * v.size(), 0);
  store<std::int32_t>(out, 0, 348);
  const std::int16_t dim[8] = {3,
                               static_cast<std::int16_t>(g.nx()),
                               static_cast<std::int16_t>(g.ny()),
                               static_cast<std::int16_t>(g.nz()),
                               1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) store<std::int16_t>(out, 40 + 2 * i, dim[i]);
  store<std::int16_t>(out, 70, static_cast<std::int16_t>(datatype));
  store<std::int16_t>(out, 72, static_cast<std::int16_t>(8 * bpv));
  const float pixdim[8] = {1.0f,
                           static_cast<float>(g.spacing()[0]),
                           static_cast<float>(g.spacing()[1]),
                           static_cast<float>(g.spacing()[2]),
                           0.0f, 0.0f, 0.0f, 0.0f};
  for (int i = 0; i < 8; ++i) store<float>(out, 76 + 4 * i, pixdim[i]);
  store<float>(out, 108, static_cast<float>(offset));
  store<float>(out, 112, 1.0f);
  store<float>(out, 116, 0.0f);
  out[123] = 2;  // xyzt_units: millimetres
  store<std::int16_t>(out, 252, 0);
  store<std::int16_t>(out, 254, 1);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      store<float>(out, 280 + 16 * r + 4 * c, static_cast<float>(g.affine()[r][c]));
  std::memcpy(out.data() + 344, "n+1\0", 4);

  std::uint8_t* payload = out.data() + offset;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float x = v[i];
    switch (datatype) {
      case Datatype::kUint8: payload[i] = static_cast<std::uint8_t>(x); break;
      case Datatype::kInt16: {
        const auto s = static_cast<std::int16_t>(x);
        std::memcpy(payload + 2 * i, &s, 2);
        break;
      }
      case Datatype::kFloat32: std::memcpy(payload + 4 * i, &x, 4); break;
      case Datatype::kFloat64: {
        const double d = x;
        std::memcpy(payload + 8 * i, &d, 8);
        break;
      }
    }
  }
  return compress ? gzip(out) : out;
}

void write_volume(const ScalarVolume& v, const std::filesystem::path& path, Datatype datatype,
                  bool compress) {
  const auto bytes = encode_volume(v, datatype, compress);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NiftiError(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw NiftiError(ErrorKind::kIo, "short write to " + path.string());
}

bool has_gzip_suffix(const std::filesystem::path& path) { return path.extension() == ".gz"; }

Datatype parse_datatype(const std::string& name) {
  if (name == "uint8") return Datatype::kUint8;
  if (name == "int16") return Datatype::kInt16;
  if (name == "float32") return Datatype::kFloat32;
  if (name == "float64") return Datatype::kFloat64;
  throw ValidationError("unknown datatype '" + name + "' (expected uint8, int16, float32, float64)");
}

}  // namespace segfuse::nifti
