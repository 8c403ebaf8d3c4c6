#include "llvd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace llvd {

namespace {

constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void io_fail(const std::string& path, const std::string& why) {
  throw IoError(path + ": " + why);
}

// Reads one whitespace-delimited token, skipping '#' comments to end of
// line, as the textual PPM/PGM header allows. The delimiter after the
// token stays in the stream: the caller consumes the single whitespace
// byte that separates the header from the raster.
std::string next_token(std::istream& in, const std::string& path) {
  int ch;
  while ((ch = in.peek()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) break;
    in.get();
  }
  std::string tok;
  while ((ch = in.peek()) != EOF && !std::isspace(ch) && ch != '#') {
    tok.push_back(static_cast<char>(in.get()));
  }
  if (tok.empty()) io_fail(path, "truncated header");
  return tok;
}

int64_t parse_dim(const std::string& tok, const std::string& path) {
  try {
    size_t pos = 0;
    const long long v = std::stoll(tok, &pos);
    if (pos != tok.size() || v < 1) io_fail(path, "bad header value '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    io_fail(path, "bad header value '" + tok + "'");
  }
}

void write_u32le(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32le(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) io_fail(path, "truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

Tensor load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  const std::string magic = next_token(in, path);
  int64_t channels;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    io_fail(path, "not a binary PPM/PGM file (magic '" + magic + "')");
  }
  const int64_t w = parse_dim(next_token(in, path), path);
  const int64_t h = parse_dim(next_token(in, path), path);
  const int64_t maxval = parse_dim(next_token(in, path), path);
  if (maxval > 65535) io_fail(path, "maxval " + std::to_string(maxval) + " out of range");
  // Exactly one whitespace byte separates the header from the raster.
  const int sep = in.get();
  if (sep == EOF || !std::isspace(sep)) io_fail(path, "missing raster separator");

  const int bytes_per_sample = maxval > 255 ? 2 : 1;
  const int64_t samples = w * h * channels;
  std::vector<unsigned char> raw(samples * bytes_per_sample);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    io_fail(path, "truncated raster");
  }

  Tensor out = Tensor::zeros({channels, h, w});
  float* dst = out.data();
  const float inv = 1.0f / static_cast<float>(maxval);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t c = 0; c < channels; ++c) {
        const int64_t si = (y * w + x) * channels + c;
        uint32_t v;
        if (bytes_per_sample == 2) {
          v = (static_cast<uint32_t>(raw[si * 2]) << 8) | raw[si * 2 + 1];  // big-endian
        } else {
          v = raw[si];
        }
        if (v > static_cast<uint32_t>(maxval)) io_fail(path, "sample exceeds maxval");
        dst[(c * h + y) * w + x] = static_cast<float>(v) * inv;
      }
    }
  }
  return out;
}

uint32_t quantize_unit(float v, uint32_t maxval) {
  const float clamped = std::clamp(v, 0.0f, 1.0f);
  const uint32_t q = static_cast<uint32_t>(
      std::floor(static_cast<double>(clamped) * maxval + 0.5));
  return std::min(q, maxval);
}

void save_image(const std::string& path, const Tensor& image, int bit_depth) {
  if (image.rank() != 3 || (image.dims[0] != 1 && image.dims[0] != 3)) {
    throw ShapeError("save_image: expected [1,H,W] or [3,H,W], got " + shape_str(image.dims));
  }
  if (bit_depth != 8 && bit_depth != 16) throw ValueError("save_image: bit depth must be 8 or 16");
  const int64_t c = image.dims[0], h = image.dims[1], w = image.dims[2];
  const uint32_t maxval = bit_depth == 8 ? 255u : 65535u;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail(path, "cannot open for writing");
  out << (c == 3 ? "P6" : "P5") << "\n" << w << " " << h << "\n" << maxval << "\n";

  std::vector<unsigned char> raw(static_cast<size_t>(c * h * w) * (bit_depth == 8 ? 1 : 2));
  const float* src = image.data();
  size_t o = 0;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t ci = 0; ci < c; ++ci) {
        const uint32_t q = quantize_unit(src[(ci * h + y) * w + x], maxval);
        if (bit_depth == 16) {
          raw[o++] = static_cast<unsigned char>(q >> 8);  // big-endian
          raw[o++] = static_cast<unsigned char>(q & 0xff);
        } else {
          raw[o++] = static_cast<unsigned char>(q);
        }
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) io_fail(path, "write failed");
}

Tensor read_tensor(std::istream& in, const std::string& context) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "LLVT", 4) != 0) {
    io_fail(context, "not a tensor record");
  }
  const int version = in.get();
  if (version != 1) io_fail(context, "unsupported tensor version " + std::to_string(version));
  const int rank = in.get();
  if (rank < 1 || rank > 8) io_fail(context, "bad tensor rank " + std::to_string(rank));
  std::vector<int64_t> dims(rank);
  for (int i = 0; i < rank; ++i) {
    dims[i] = read_u32le(in, context);
    if (dims[i] < 1) io_fail(context, "zero extent in dim " + std::to_string(i));
  }
  Tensor t = Tensor::zeros(dims);
  static_assert(sizeof(float) == 4);
  if (!in.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * sizeof(float)))) {
    io_fail(context, "truncated tensor data");
  }
  return t;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.empty()) throw ValueError("write_tensor: empty tensor");
  for (int64_t d : t.dims) {
    if (d > UINT32_MAX) throw ValueError("write_tensor: extent too large for container");
  }
  out.write("LLVT", 4);
  out.put(1);
  out.put(static_cast<char>(t.rank()));
  for (int64_t d : t.dims) write_u32le(out, static_cast<uint32_t>(d));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  return read_tensor(in, path);
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail(path, "cannot open for writing");
  write_tensor(out, t);
  if (!out) io_fail(path, "write failed");
}

namespace {

bool is_image_name(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".ppm" || ext == ".pgm";
}

std::vector<Tensor> load_clip_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_name(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Tensor> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(load_image(f.string()));
  for (size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].dims != frames[0].dims) {
      throw ShapeError(dir.string() + ": frame " + std::to_string(i) + " is " +
                       shape_str(frames[i].dims) + ", frame 0 is " + shape_str(frames[0].dims));
    }
  }
  return frames;
}

}  // namespace

std::vector<std::vector<Tensor>> load_clip_tree(const std::string& dir) {
  const std::filesystem::path root(dir);
  if (!std::filesystem::is_directory(root)) io_fail(dir, "not a directory");
  std::vector<std::filesystem::path> subdirs;
  for (const auto& e : std::filesystem::directory_iterator(root)) {
    if (e.is_directory()) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());

  std::vector<std::vector<Tensor>> clips;
  if (subdirs.empty()) {
    auto frames = load_clip_dir(root);
    if (frames.empty()) io_fail(dir, "no .ppm/.pgm frames found");
    clips.push_back(std::move(frames));
    return clips;
  }
  for (const auto& sd : subdirs) {
    auto frames = load_clip_dir(sd);
    if (!frames.empty()) clips.push_back(std::move(frames));
  }
  if (clips.empty()) io_fail(dir, "no clip directories with .ppm/.pgm frames");
  return clips;
}

uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t derive_stream_seed(uint64_t seed, uint64_t stream) {
  // Two splitmix64 steps: finalize the seed, then fold in the stream id.
  const uint64_t a = mix64(seed + 0x9E3779B97F4A7C15ULL);
  return mix64(a + stream * 0x9E3779B97F4A7C15ULL + 0x9E3779B97F4A7C15ULL);
}

NoiseStream::NoiseStream(uint64_t seed, uint64_t stream) {
  const uint64_t derived = derive_stream_seed(seed, stream);
  std::seed_seq sq{static_cast<uint32_t>(derived), static_cast<uint32_t>(derived >> 32)};
  gen_.seed(sq);
}

double NoiseStream::uniform() {
  return (static_cast<double>(gen_()) + 0.5) / 4294967296.0;
}

double NoiseStream::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * kPi * u2);
  have_spare_ = true;
  return r * std::cos(2.0 * kPi * u2);
}

int64_t NoiseStream::uniform_int(int64_t n) {
  if (n < 1) throw ValueError("uniform_int: n must be >= 1");
  const uint64_t range = static_cast<uint64_t>(n);
  const uint64_t limit = (1ULL << 32) - ((1ULL << 32) % range);
  uint64_t v;
  do {
    v = gen_();
  } while (v >= limit);
  return static_cast<int64_t>(v % range);
}

Tensor add_awgn(const Tensor& frame, double sigma, NoiseStream& stream) {
  if (sigma < 0) throw ValueError("add_awgn: sigma must be >= 0");
  Tensor out = frame.clone();
  const double s = sigma / 255.0;
  float* p = out.data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) p[i] = static_cast<float>(p[i] + s * stream.gaussian());
  return out;
}

std::vector<Tensor> add_awgn_sequence(const std::vector<Tensor>& frames, double sigma,
                                      uint64_t seed, uint64_t sequence_id) {
  NoiseStream stream(seed, sequence_id);
  std::vector<Tensor> out;
  out.reserve(frames.size());
  for (const Tensor& f : frames) out.push_back(add_awgn(f, sigma, stream));
  return out;
}

CropRect choose_crop(int64_t h, int64_t w, int64_t crop_h, int64_t crop_w,
                     bool bayer_aligned, NoiseStream& stream) {
  if (crop_h < 1 || crop_w < 1 || crop_h > h || crop_w > w) {
    throw ShapeError("choose_crop: crop " + shape_str({crop_h, crop_w}) +
                     " does not fit in " + shape_str({h, w}));
  }
  CropRect r;
  r.height = crop_h;
  r.width = crop_w;
  if (bayer_aligned) {
    r.top = 2 * stream.uniform_int((h - crop_h) / 2 + 1);
    r.left = 2 * stream.uniform_int((w - crop_w) / 2 + 1);
  } else {
    r.top = stream.uniform_int(h - crop_h + 1);
    r.left = stream.uniform_int(w - crop_w + 1);
  }
  return r;
}

std::vector<Tensor> crop_sequence(const std::vector<Tensor>& frames, const CropRect& rect) {
  std::vector<Tensor> out;
  out.reserve(frames.size());
  for (const Tensor& f : frames) {
    if (f.rank() != 3) throw ShapeError("crop_sequence: frames must be [C,H,W]");
    const int64_t c = f.dims[0], h = f.dims[1], w = f.dims[2];
    if (rect.top + rect.height > h || rect.left + rect.width > w) {
      throw ShapeError("crop_sequence: rect exceeds frame " + shape_str(f.dims));
    }
    Tensor t = Tensor::zeros({c, rect.height, rect.width});
    for (int64_t ci = 0; ci < c; ++ci) {
      for (int64_t y = 0; y < rect.height; ++y) {
        std::memcpy(t.data() + (ci * rect.height + y) * rect.width,
                    f.data() + (ci * h + rect.top + y) * w + rect.left,
                    sizeof(float) * rect.width);
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

size_t mirror_index(size_t i, size_t t) {
  if (t == 0) throw ValueError("mirror_index: empty clip");
  if (t == 1) return 0;
  const size_t period = 2 * (t - 1);
  const size_t m = i % period;
  return m < t ? m : period - m;
}

std::vector<Tensor> mirror_extend(const std::vector<Tensor>& frames, size_t target_len) {
  if (frames.empty()) throw ValueError("mirror_extend: empty clip");
  std::vector<Tensor> out;
  out.reserve(target_len);
  for (size_t i = 0; i < target_len; ++i) out.push_back(frames[mirror_index(i, frames.size())]);
  return out;
}

Tensor pack_bayer(const Tensor& mosaic) {
  if (mosaic.rank() != 3 || mosaic.dims[0] != 1) {
    throw ShapeError("pack_bayer: expected [1,H,W], got " + shape_str(mosaic.dims));
  }
  const int64_t h = mosaic.dims[1], w = mosaic.dims[2];
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("pack_bayer: spatial dims must be even, got " + shape_str({h, w}));
  }
  Tensor out = Tensor::zeros({4, h / 2, w / 2});
  const float* src = mosaic.data();
  float* dst = out.data();
  const int64_t oh = h / 2, ow = w / 2;
  for (int64_t dy = 0; dy < 2; ++dy) {
    for (int64_t dx = 0; dx < 2; ++dx) {
      float* plane = dst + (dy * 2 + dx) * oh * ow;
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t x = 0; x < ow; ++x) plane[y * ow + x] = src[(y * 2 + dy) * w + (x * 2 + dx)];
      }
    }
  }
  return out;
}

Tensor unpack_bayer(const Tensor& planes) {
  if (planes.rank() != 3 || planes.dims[0] != 4) {
    throw ShapeError("unpack_bayer: expected [4,h,w], got " + shape_str(planes.dims));
  }
  const int64_t oh = planes.dims[1], ow = planes.dims[2];
  Tensor out = Tensor::zeros({1, oh * 2, ow * 2});
  const float* src = planes.data();
  float* dst = out.data();
  for (int64_t dy = 0; dy < 2; ++dy) {
    for (int64_t dx = 0; dx < 2; ++dx) {
      const float* plane = src + (dy * 2 + dx) * oh * ow;
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t x = 0; x < ow; ++x) {
          dst[(y * 2 + dy) * (ow * 2) + (x * 2 + dx)] = plane[y * ow + x];
        }
      }
    }
  }
  return out;
}

}  // namespace llvd
