#include "trajguide/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include <openssl/evp.h>

#include "trajguide/error.hpp"

namespace trajguide {
namespace {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

constexpr std::array<char, 4> kMagic{'L', 'T', 'N', 'S'};

struct Header {
  FileDtype dtype;
  Shape shape;
};

void put_u16(std::vector<std::uint8_t>& out, std::size_t v) {
  if (v > std::numeric_limits<std::uint16_t>::max()) throw Error("tensor dimension " + std::to_string(v) + " exceeds 65535");
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

std::vector<std::uint8_t> header_bytes(FileDtype dtype, const Shape& s) {
  std::vector<std::uint8_t> h(kMagic.begin(), kMagic.end());
  h.push_back(static_cast<std::uint8_t>(dtype));
  h.push_back(4);
  h.push_back(0);
  h.push_back(0);
  for (std::size_t d : {s.channels, s.frames, s.height, s.width}) put_u16(h, d);
  return h;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& head, const void* data,
                std::size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Header parse_header(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  if (bytes.size() < 16 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw Error(path.string() + ": not a tensor file");
  const auto dtype = static_cast<FileDtype>(bytes[4]);
  if (dtype != FileDtype::kFloat64 && dtype != FileDtype::kUint8) throw Error(path.string() + ": unknown dtype");
  if (bytes[5] != 4) throw Error(path.string() + ": only rank-4 tensors are supported");
  auto dim = [&](std::size_t i) { return static_cast<std::size_t>(bytes[8 + 2 * i]) | (std::size_t{bytes[9 + 2 * i]} << 8); };
  Header h{dtype, Shape{dim(0), dim(1), dim(2), dim(3)}};
  if (h.shape.numel() == 0) throw Error(path.string() + ": zero-sized dimension");
  const std::size_t elem = dtype == FileDtype::kFloat64 ? 8 : 1;
  if (bytes.size() != 16 + h.shape.numel() * elem)
    throw Error(path.string() + ": payload size does not match header shape " + to_string(h.shape));
  return h;
}

std::uint8_t to_byte(double v, double lo, double hi) {
  const double a = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(a * 255.0));
}

void write_netpbm(const std::filesystem::path& path, const char* magic, std::size_t w, std::size_t h,
                  const std::vector<std::uint8_t>& px) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

void check_frame(const Tensor& video, std::size_t t) {
  if (t >= video.shape().frames) throw Error("frame index " + std::to_string(t) + " out of range");
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  const auto v = tensor.values();
  write_file(path, header_bytes(FileDtype::kFloat64, tensor.shape()), v.data(), v.size() * sizeof(double));
}

void write_mask(const std::filesystem::path& path, const ValidityMask& mask) {
  const auto v = mask.values();
  write_file(path, header_bytes(FileDtype::kUint8, mask.shape()), v.data(), v.size());
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  std::vector<double> v(depth.values().begin(), depth.values().end());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!depth.validity()[i]) v[i] = 0.0;
  write_file(path, header_bytes(FileDtype::kFloat64, Shape{1, 1, depth.height(), depth.width()}), v.data(),
             v.size() * sizeof(double));
}

Tensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const Header h = parse_header(bytes, path);
  std::vector<double> v(h.shape.numel());
  if (h.dtype == FileDtype::kFloat64) {
    std::memcpy(v.data(), bytes.data() + 16, v.size() * sizeof(double));
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = bytes[16 + i];
  }
  Tensor t(h.shape, std::move(v));
  require_finite(t, path.string());
  return t;
}

ValidityMask read_mask(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const Header h = parse_header(bytes, path);
  std::vector<std::uint8_t> v(h.shape.numel());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double x = 0.0;
    if (h.dtype == FileDtype::kUint8) {
      x = bytes[16 + i];
    } else {
      std::memcpy(&x, bytes.data() + 16 + 8 * i, sizeof(double));
    }
    if (x != 0.0 && x != 1.0) throw Error(path.string() + ": mask entries must be 0 or 1");
    v[i] = static_cast<std::uint8_t>(x);
  }
  return ValidityMask(h.shape, std::move(v));
}

DepthMap read_depth(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  const Shape& s = t.shape();
  if (s.channels != 1 || s.frames != 1) throw Error(path.string() + ": depth files are [1, 1, H, W]");
  DepthMap d(s.height, s.width);
  for (std::size_t y = 0; y < s.height; ++y)
    for (std::size_t x = 0; x < s.width; ++x) {
      const double v = t.at(0, 0, y, x);
      if (v == 0.0) {
        d.set_invalid(y, x);
      } else {
        d.set(y, x, v);
      }
    }
  return d;
}

void write_pgm(const std::filesystem::path& path, const Tensor& video, std::size_t channel, std::size_t t, double lo,
               double hi) {
  check_frame(video, t);
  const Shape& s = video.shape();
  if (channel >= s.channels) throw Error("channel index out of range");
  std::vector<std::uint8_t> px(s.plane());
  for (std::size_t y = 0; y < s.height; ++y)
    for (std::size_t x = 0; x < s.width; ++x) px[y * s.width + x] = to_byte(video.at(channel, t, y, x), lo, hi);
  write_netpbm(path, "P5", s.width, s.height, px);
}

void write_ppm(const std::filesystem::path& path, const Tensor& video, std::size_t t, double lo, double hi) {
  check_frame(video, t);
  const Shape& s = video.shape();
  if (s.channels != 3) throw Error("PPM output needs exactly three channels");
  std::vector<std::uint8_t> px;
  px.reserve(3 * s.plane());
  for (std::size_t y = 0; y < s.height; ++y)
    for (std::size_t x = 0; x < s.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) px.push_back(to_byte(video.at(c, t, y, x), lo, hi));
  write_netpbm(path, "P6", s.width, s.height, px);
}

void write_channel_strip(const std::filesystem::path& path, const Tensor& video, std::size_t t, double lo, double hi) {
  check_frame(video, t);
  const Shape& s = video.shape();
  const std::size_t w = s.width * s.channels;
  std::vector<std::uint8_t> px(w * s.height);
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t y = 0; y < s.height; ++y)
      for (std::size_t x = 0; x < s.width; ++x) px[y * w + c * s.width + x] = to_byte(video.at(c, t, y, x), lo, hi);
  write_netpbm(path, "P5", w, s.height, px);
}

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string magic;
  std::size_t w = 0;
  std::size_t h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w == 0 || h == 0) throw Error(path.string() + ": expected an 8-bit P5 image");
  in.get();
  std::vector<std::uint8_t> px(w * h);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!in) throw Error(path.string() + ": truncated image");
  Tensor t(Shape{1, 1, h, w});
  for (std::size_t i = 0; i < px.size(); ++i) t[i] = px[i] / 255.0;
  return t;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_all(path)); }

std::string tensor_hash(const Tensor& tensor) {
  auto bytes = header_bytes(FileDtype::kFloat64, tensor.shape());
  const auto v = tensor.values();
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  bytes.insert(bytes.end(), p, p + v.size() * sizeof(double));
  return sha256_hex(bytes);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace trajguide
