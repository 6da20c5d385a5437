#pragma once

#include <string>
#include <vector>

#include "omni/nn.hpp"

namespace omni {

struct ImageTensor {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<double> data;  // h*w*3, row-major, values in [0,1]

  double at(int64_t y, int64_t x, int64_t c) const {
    return data[static_cast<size_t>((y * width + x) * 3 + c)];
  }
  double& at(int64_t y, int64_t x, int64_t c) {
    return data[static_cast<size_t>((y * width + x) * 3 + c)];
  }
};

ImageTensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const ImageTensor& img);
ImageTensor resize_bilinear(const ImageTensor& img, int64_t height, int64_t width);

struct PatchPlan {
  int64_t grid_rows = 1;
  int64_t grid_cols = 1;
  int64_t tile_size = 448;
  bool include_thumbnail = false;
  int64_t resized_height = 448;
  int64_t resized_width = 448;

  int64_t detail_tiles() const { return grid_rows * grid_cols; }
  int64_t total_tiles() const { return detail_tiles() + (include_thumbnail ? 1 : 0); }
};

// Picks the grid whose aspect ratio cols/rows is closest to width/height,
// subject to rows*cols <= max_tiles; ties prefer fewer tiles, then fewer rows.
// The thumbnail does not count toward the budget.
PatchPlan plan_patches(int64_t width, int64_t height, int64_t max_tiles = 12);

struct FrameSchedule {
  std::vector<double> timestamps;  // strictly increasing, within [0, duration]
};

// < 4 s: 4 frames; 4..16 s: 1 fps (floor(duration)); > 16 s: 16 frames.
// Uniform sampling takes midpoints of equal sub-intervals.
FrameSchedule sample_frames(double duration_s);

struct VisionConfig {
  int64_t d_vis = 64;
  int64_t n_blocks = 2;
  int64_t n_heads = 4;
  int64_t tile_size = 448;
  int64_t patch_size = 28;  // 16x16 grid -> 256 tokens per tile

  int64_t tokens_per_tile() const {
    const int64_t g = tile_size / patch_size;
    return g * g;
  }
};

struct VisionEncoder {
  VisionConfig cfg;
  Linear patch_embed;
  PositionalEmbedding pos;
  std::vector<TransformerBlock> blocks;

  VisionEncoder() = default;
  VisionEncoder(Rng& rng, const VisionConfig& c);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  // tile must be exactly tile_size x tile_size; output [256 x d_vis]
  Var encode_tile(Tape& t, const ImageTensor& tile);
  // dynamic patching + optional thumbnail; output [256*tiles x d_vis]
  Var encode_image(Tape& t, const ImageTensor& img, int64_t max_tiles = 12);
  // one tile per frame, no patching; output [256*frames x d_vis]
  Var encode_video(Tape& t, const std::vector<ImageTensor>& frames);
};

struct VisionAdapter {
  Mlp2 mlp;  // linear, GELU, linear; per token

  VisionAdapter() = default;
  VisionAdapter(Rng& rng, int64_t d_vis, int64_t d_llm) : mlp(rng, d_vis, d_llm, d_llm) {}
  void register_params(ParamRegistry& reg, const std::string& prefix) {
    mlp.register_params(reg, prefix);
  }
  Var forward(Tape& t, Var tokens) { return mlp.forward(t, tokens); }
};

struct VideoInput {
  std::vector<ImageTensor> frames;  // all frames on disk, 1-based numbering
  double duration_s = 0.0;
  double fps = 0.0;
};

// Directory of numbered PPM frames (frame_000001.ppm, ...) plus a one-line
// "duration_s=<float> fps=<float>" meta file.
VideoInput read_video_dir(const std::string& dir);

// Applies the sampling policy to pick frames from a video input.
std::vector<ImageTensor> select_video_frames(const VideoInput& video);

}  // namespace omni
