#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "llvd/tensor.hpp"

// Frame and clip plumbing: binary PPM/PGM image files, a raw float tensor
// container, deterministic noise streams, and the clip-shaping helpers
// (crop, mirror extension, Bayer packing) used to assemble training data.
//
// Pixels live in [0,1] as floats. Files quantize with round-half-up and
// clamp on save; in memory values may leave [0,1] (noisy frames do).

namespace llvd {

/// Reads binary PPM (P6) into [3,H,W] or binary PGM (P5) into [1,H,W].
/// 16-bit files (maxval > 255) use the format's big-endian sample order.
Tensor load_image(const std::string& path);

/// Writes [3,H,W] as P6 or [1,H,W] as P5. bit_depth is 8 or 16.
void save_image(const std::string& path, const Tensor& image, int bit_depth = 8);

/// Clamps to [0,1], then rounds half up: floor(v * maxval + 0.5).
uint32_t quantize_unit(float v, uint32_t maxval);

/// Raw tensor container: magic "LLVT", version byte, rank byte, extents as
/// u32 little-endian, then float32 little-endian data in row-major order.
Tensor load_tensor(const std::string& path);
void save_tensor(const std::string& path, const Tensor& t);

/// Same container as one record of a larger stream (checkpoints embed
/// these). `context` names the source in error messages.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in, const std::string& context);

/// Loads training clips: every subdirectory of `dir` holding .ppm/.pgm
/// files becomes one clip (frames in filename order); if `dir` itself
/// holds images it is one clip.
std::vector<std::vector<Tensor>> load_clip_tree(const std::string& dir);

/// Pure 64-bit mixing function (splitmix64 finalizer). Used to derive
/// independent per-stream seeds from one experiment seed.
uint64_t mix64(uint64_t z);

/// Deterministic seed for substream `stream` of experiment `seed`.
uint64_t derive_stream_seed(uint64_t seed, uint64_t stream);

/// One deterministic random stream: a mt19937 seeded from (seed, stream)
/// plus a Box-Muller transform for Gaussian draws. Streams with different
/// ids are independent; the same (seed, stream) always replays the same
/// values, which keeps noising reproducible per sequence.
class NoiseStream {
 public:
  NoiseStream(uint64_t seed, uint64_t stream);

  /// Uniform in (0,1): (draw + 0.5) / 2^32, never exactly 0 or 1.
  double uniform();

  /// Standard normal via Box-Muller; consumes two uniforms per pair and
  /// caches the second draw.
  double gaussian();

  /// Uniform integer in [0, n); rejection sampling, no modulo bias.
  int64_t uniform_int(int64_t n);

 private:
  std::mt19937 gen_;
  bool have_spare_ = false;
  double spare_ = 0;
};

/// frame + sigma/255 * N(0,1), element by element in row-major order.
/// The result is not clamped.
Tensor add_awgn(const Tensor& frame, double sigma, NoiseStream& stream);

/// Noises a whole clip from the stream (seed, sequence_id), frames in
/// order. sigma is on the 8-bit scale (e.g. 25 means 25/255 in [0,1]).
std::vector<Tensor> add_awgn_sequence(const std::vector<Tensor>& frames, double sigma,
                                      uint64_t seed, uint64_t sequence_id);

struct CropRect {
  int64_t top = 0;
  int64_t left = 0;
  int64_t height = 0;
  int64_t width = 0;
};

/// Draws one crop offset for a whole clip. bayer_aligned forces even
/// offsets so a 2x2 color filter tiling is preserved.
CropRect choose_crop(int64_t h, int64_t w, int64_t crop_h, int64_t crop_w,
                     bool bayer_aligned, NoiseStream& stream);

/// Applies the same rectangle to every [C,H,W] frame.
std::vector<Tensor> crop_sequence(const std::vector<Tensor>& frames, const CropRect& rect);

/// Index into a length-t clip extended by reflection without repeating the
/// endpoints: period 2(t-1), e.g. t=3 plays 0,1,2,1,0,1,2,...
size_t mirror_index(size_t i, size_t t);

/// Extends a clip to target_len frames by mirror_index. Frames are shared,
/// not copied.
std::vector<Tensor> mirror_extend(const std::vector<Tensor>& frames, size_t target_len);

/// [1,H,W] mosaic with even H,W -> [4,H/2,W/2] planes in reading order of
/// each 2x2 cell (RGGB for an RGGB mosaic).
Tensor pack_bayer(const Tensor& mosaic);

/// Inverse of pack_bayer: [4,h,w] -> [1,2h,2w].
Tensor unpack_bayer(const Tensor& planes);

}  // namespace llvd
