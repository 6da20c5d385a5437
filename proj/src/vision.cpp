#include "omni/vision.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "omni/errors.hpp"

namespace omni {

ImageTensor read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("ppm: cannot open " + path);
  std::string magic;
  is >> magic;
  if (magic != "P6") throw DataError("ppm: expected P6, got '" + magic + "' in " + path);
  auto next_int = [&]() -> int64_t {
    // skip whitespace and '#' comments
    for (;;) {
      int c = is.peek();
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(c)) {
        is.get();
      } else {
        break;
      }
    }
    int64_t v = 0;
    is >> v;
    return v;
  };
  const int64_t w = next_int(), h = next_int(), maxval = next_int();
  if (!is || w <= 0 || h <= 0 || maxval != 255) throw DataError("ppm: bad header in " + path);
  is.get();  // single whitespace after maxval
  ImageTensor img;
  img.width = w;
  img.height = h;
  img.data.resize(static_cast<size_t>(w * h * 3));
  std::vector<unsigned char> raw(static_cast<size_t>(w * h * 3));
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!is) throw DataError("ppm: truncated pixel data in " + path);
  for (size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

void write_ppm(const std::string& path, const ImageTensor& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("ppm: cannot open for writing: " + path);
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  for (double v : img.data) {
    const double c = std::min(1.0, std::max(0.0, v));
    os.put(static_cast<char>(std::lround(c * 255.0)));
  }
  if (!os) throw DataError("ppm: write failed: " + path);
}

ImageTensor resize_bilinear(const ImageTensor& img, int64_t height, int64_t width) {
  if (img.height <= 0 || img.width <= 0) throw DataError("resize: empty image");
  ImageTensor out;
  out.height = height;
  out.width = width;
  out.data.resize(static_cast<size_t>(height * width * 3));
  const double sy = static_cast<double>(img.height) / height;
  const double sx = static_cast<double>(img.width) / width;
  for (int64_t y = 0; y < height; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    const int64_t y0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(fy)), 0, img.height - 1);
    const int64_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = std::clamp(fy - static_cast<double>(y0), 0.0, 1.0);
    for (int64_t x = 0; x < width; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      const int64_t x0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(fx)), 0, img.width - 1);
      const int64_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = std::clamp(fx - static_cast<double>(x0), 0.0, 1.0);
      for (int64_t c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        const double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        out.at(y, x, c) = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

PatchPlan plan_patches(int64_t width, int64_t height, int64_t max_tiles) {
  if (width < 1 || height < 1) throw DataError("plan_patches: image dims must be positive");
  if (max_tiles < 1) throw DataError("plan_patches: max_tiles must be positive");
  const double target = static_cast<double>(width) / static_cast<double>(height);
  int64_t best_r = 1, best_c = 1;
  double best_dist = std::fabs(1.0 - target);
  for (int64_t r = 1; r <= max_tiles; ++r) {
    for (int64_t c = 1; r * c <= max_tiles; ++c) {
      const double dist = std::fabs(static_cast<double>(c) / static_cast<double>(r) - target);
      const bool better = dist < best_dist ||
                          (dist == best_dist && (r * c < best_r * best_c ||
                                                 (r * c == best_r * best_c && r < best_r)));
      if (better) {
        best_dist = dist;
        best_r = r;
        best_c = c;
      }
    }
  }
  PatchPlan plan;
  plan.grid_rows = best_r;
  plan.grid_cols = best_c;
  plan.include_thumbnail = best_r * best_c > 1;
  plan.resized_height = best_r * plan.tile_size;
  plan.resized_width = best_c * plan.tile_size;
  return plan;
}

FrameSchedule sample_frames(double duration_s) {
  if (duration_s <= 0.0) throw DataError("sample_frames: duration must be positive");
  int64_t count;
  if (duration_s < 4.0) {
    count = 4;
  } else if (duration_s <= 16.0) {
    count = static_cast<int64_t>(std::floor(duration_s));  // 1 fps
  } else {
    count = 16;
  }
  FrameSchedule sched;
  sched.timestamps.resize(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    // midpoint of the i-th of `count` equal sub-intervals
    sched.timestamps[static_cast<size_t>(i)] =
        duration_s * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
  }
  return sched;
}

VisionEncoder::VisionEncoder(Rng& rng, const VisionConfig& c) : cfg(c) {
  if (c.tile_size % c.patch_size != 0) {
    throw ConfigError("vision encoder: patch size must divide tile size");
  }
  const int64_t patch_dim = c.patch_size * c.patch_size * 3;
  patch_embed = Linear(rng, patch_dim, c.d_vis);
  pos = PositionalEmbedding(rng, cfg.tokens_per_tile(), c.d_vis);
  blocks.reserve(static_cast<size_t>(c.n_blocks));
  for (int64_t i = 0; i < c.n_blocks; ++i) blocks.emplace_back(rng, c.d_vis, c.n_heads);
}

void VisionEncoder::register_params(ParamRegistry& reg, const std::string& prefix) {
  patch_embed.register_params(reg, prefix + ".patch_embed");
  pos.register_params(reg, prefix + ".pos");
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].register_params(reg, prefix + ".block" + std::to_string(i));
}

Var VisionEncoder::encode_tile(Tape& t, const ImageTensor& tile) {
  if (tile.height != cfg.tile_size || tile.width != cfg.tile_size) {
    throw ShapeError("encode_tile: expected " + std::to_string(cfg.tile_size) + "x" +
                     std::to_string(cfg.tile_size) + " tile, got " + std::to_string(tile.width) +
                     "x" + std::to_string(tile.height));
  }
  const int64_t g = cfg.tile_size / cfg.patch_size;
  const int64_t p = cfg.patch_size;
  const int64_t patch_dim = p * p * 3;
  Tensor patches({g * g, patch_dim});
  for (int64_t gy = 0; gy < g; ++gy) {
    for (int64_t gx = 0; gx < g; ++gx) {
      double* row = &patches.at(gy * g + gx, 0);
      for (int64_t dy = 0; dy < p; ++dy)
        for (int64_t dx = 0; dx < p; ++dx)
          for (int64_t c = 0; c < 3; ++c)
            row[(dy * p + dx) * 3 + c] = tile.at(gy * p + dy, gx * p + dx, c);
    }
  }
  Var x = patch_embed.forward(t, t.constant(std::move(patches)));
  x = ops::add(t, x, pos.forward(t, g * g));
  for (auto& b : blocks) x = b.forward(t, x, /*causal=*/false);
  return x;
}

Var VisionEncoder::encode_image(Tape& t, const ImageTensor& img, int64_t max_tiles) {
  const PatchPlan plan = plan_patches(img.width, img.height, max_tiles);
  const ImageTensor resized = resize_bilinear(img, plan.resized_height, plan.resized_width);
  std::vector<Var> tiles;
  tiles.reserve(static_cast<size_t>(plan.total_tiles()));
  for (int64_t r = 0; r < plan.grid_rows; ++r) {
    for (int64_t c = 0; c < plan.grid_cols; ++c) {
      ImageTensor tile;
      tile.height = plan.tile_size;
      tile.width = plan.tile_size;
      tile.data.resize(static_cast<size_t>(plan.tile_size * plan.tile_size * 3));
      for (int64_t y = 0; y < plan.tile_size; ++y)
        for (int64_t x = 0; x < plan.tile_size; ++x)
          for (int64_t ch = 0; ch < 3; ++ch)
            tile.at(y, x, ch) = resized.at(r * plan.tile_size + y, c * plan.tile_size + x, ch);
      tiles.push_back(encode_tile(t, tile));
    }
  }
  if (plan.include_thumbnail) {
    tiles.push_back(encode_tile(t, resize_bilinear(img, plan.tile_size, plan.tile_size)));
  }
  return tiles.size() == 1 ? tiles[0] : ops::concat_rows(t, tiles);
}

Var VisionEncoder::encode_video(Tape& t, const std::vector<ImageTensor>& frames) {
  if (frames.empty()) throw DataError("encode_video: no frames");
  std::vector<Var> encoded;
  encoded.reserve(frames.size());
  for (const auto& f : frames)
    encoded.push_back(encode_tile(t, resize_bilinear(f, cfg.tile_size, cfg.tile_size)));
  return encoded.size() == 1 ? encoded[0] : ops::concat_rows(t, encoded);
}

VideoInput read_video_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path meta_path = fs::path(dir) / "meta.txt";
  std::ifstream meta(meta_path);
  if (!meta) throw DataError("video: missing meta file " + meta_path.string());
  std::string line;
  std::getline(meta, line);
  VideoInput video;
  if (std::sscanf(line.c_str(), "duration_s=%lf fps=%lf", &video.duration_s, &video.fps) != 2) {
    throw DataError("video: malformed meta line '" + line + "' in " + meta_path.string());
  }
  std::vector<std::string> frame_files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".ppm") frame_files.push_back(e.path().string());
  }
  std::sort(frame_files.begin(), frame_files.end());
  if (frame_files.empty()) throw DataError("video: no PPM frames in " + dir);
  for (const auto& f : frame_files) video.frames.push_back(read_ppm(f));
  return video;
}

std::vector<ImageTensor> select_video_frames(const VideoInput& video) {
  const FrameSchedule sched = sample_frames(video.duration_s);
  std::vector<ImageTensor> out;
  out.reserve(sched.timestamps.size());
  const auto n = static_cast<int64_t>(video.frames.size());
  for (double ts : sched.timestamps) {
    auto idx = static_cast<int64_t>(std::floor(ts * video.fps));
    idx = std::clamp<int64_t>(idx, 0, n - 1);
    out.push_back(video.frames[static_cast<size_t>(idx)]);
  }
  return out;
}

}  // namespace omni
