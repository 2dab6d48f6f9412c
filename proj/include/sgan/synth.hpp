#pragma once
// Synthetic dataset generator: 1-3 colored shapes per image over procedural
// background textures, with exact ground-truth masks, image-level labels and
// a saliency oracle (clean = exactly the foreground; optionally corrupted by
// morphology and tile holes).
//
// All randomness flows through per-sample PCG streams split from the dataset
// seed, and the texture noise is built on integer hashing, so generation is
// byte-reproducible across platforms.
//
// Class shapes: 1 circle, 2 square, 3 triangle, 4 plus-cross, 5 ring. With
// co-occurrence bias enabled, class 1 only ever appears on top of texture 0
// ("water"), and texture 0 only ever appears when class 1 is present — the
// co-occurrence pathology that makes unguided attention leak onto background.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "sgan/data.hpp"
#include "sgan/rng.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

struct SaliencyCorruption {
  int dilate_px = 0;       // square structuring element radius
  int erode_px = 0;
  double hole_prob = 0.0;  // per 8x8 foreground tile

  void validate() const {
    require(dilate_px >= 0 && erode_px >= 0, "saliency corruption: radii must be >= 0");
    require(hole_prob >= 0.0 && hole_prob <= 1.0,
            "saliency corruption: hole_prob outside [0,1]");
  }
};

struct DatasetConfig {
  int image_size = 64;
  int num_classes = 5;  // uses the first num_classes of the 5 shape kinds
  int shapes_min = 1, shapes_max = 3;
  bool co_occurrence_bias = false;
  SaliencyCorruption corruption;
  uint64_t rng_seed = 0;
  int train_count = 200, val_count = 50;

  void validate() const {
    require(image_size >= 16 && image_size % 4 == 0,
            "dataset config: image_size must be >= 16 and divisible by 4");
    require(num_classes >= 1 && num_classes <= 5,
            "dataset config: num_classes must be in 1..5");
    require(shapes_min >= 1 && shapes_max >= shapes_min &&
                shapes_max <= num_classes,
            "dataset config: need 1 <= shapes_min <= shapes_max <= num_classes");
    require(train_count >= 1 && val_count >= 0, "dataset config: bad counts");
    corruption.validate();
  }
};

constexpr int kBiasedClass = 1;    // circle
constexpr int kPairedTexture = 0;  // water

namespace detail {

inline uint64_t hash_cell(uint64_t seed, int x, int y, int salt) {
  uint64_t s = seed ^ (static_cast<uint64_t>(static_cast<uint32_t>(x)) * 0x9E3779B97F4AULL) ^
               (static_cast<uint64_t>(static_cast<uint32_t>(y)) * 0xC2B2AE3D27D4ULL) ^
               (static_cast<uint64_t>(static_cast<uint32_t>(salt)) << 17);
  return splitmix64(s);
}

// Bilinear value noise on a lattice of the given cell size, in [0,1).
inline double value_noise(uint64_t seed, int x, int y, int cell, int salt) {
  const int cx = x / cell, cy = y / cell;
  const double fx = static_cast<double>(x % cell) / cell;
  const double fy = static_cast<double>(y % cell) / cell;
  auto corner = [&](int gx, int gy) {
    return static_cast<double>(hash_cell(seed, gx, gy, salt) >> 11) * 0x1.0p-53;
  };
  const double v00 = corner(cx, cy), v10 = corner(cx + 1, cy);
  const double v01 = corner(cx, cy + 1), v11 = corner(cx + 1, cy + 1);
  const double top = v00 + (v10 - v00) * fx;
  const double bot = v01 + (v11 - v01) * fx;
  return top + (bot - top) * fy;
}

inline uint8_t clamp_byte(double v) {
  return static_cast<uint8_t>(std::min(255.0, std::max(0.0, v)));
}

// Texture palettes: 0 water (blue ripples), 1 grass (green), 2 sand (tan).
inline void texture_pixel(uint64_t seed, int tex, int x, int y, uint8_t rgb[3]) {
  const double n =
      0.7 * value_noise(seed, x, y, 8, tex * 3 + 1) +
      0.3 * value_noise(seed, x, y, 4, tex * 3 + 2);
  static const double base[3][3] = {{60, 86, 122}, {58, 108, 52}, {158, 138, 98}};
  static const double gain[3][3] = {{52, 62, 96}, {34, 52, 30}, {52, 48, 40}};
  for (int c = 0; c < 3; ++c)
    rgb[c] = clamp_byte(base[tex][c] + n * gain[tex][c]);
}

// Shape base colors, index = class - 1.
inline const int (&shape_color(int cls))[3] {
  static const int colors[5][3] = {
      {204, 44, 44},    // circle: red
      {44, 176, 60},    // square: green
      {52, 84, 208},    // triangle: blue
      {212, 198, 48},   // plus-cross: yellow
      {188, 60, 188}};  // ring: magenta
  return colors[cls - 1];
}

struct ShapeSpec {
  int cls = 0;         // 1..5
  int cx = 0, cy = 0;  // center
  int size = 0;        // radius-like extent
  double ramp_dir = 0; // shading ramp angle
};

inline bool shape_covers(const ShapeSpec& s, int x, int y) {
  const int dx = x - s.cx, dy = y - s.cy;
  switch (s.cls) {
    case 1:  // circle
      return dx * dx + dy * dy <= s.size * s.size;
    case 2:  // square
      return std::abs(dx) <= s.size && std::abs(dy) <= s.size;
    case 3:  // triangle: upward, apex at cy - size
      if (dy < -s.size || dy > s.size) return false;
      return std::abs(dx) * 2 * s.size <= (dy + s.size) * s.size;
    case 4: {  // plus-cross
      const int arm = std::max(1, s.size / 3);
      return (std::abs(dx) <= arm && std::abs(dy) <= s.size) ||
             (std::abs(dy) <= arm && std::abs(dx) <= s.size);
    }
    case 5: {  // ring
      const int d2 = dx * dx + dy * dy;
      const int outer = s.size, inner = std::max(1, (2 * s.size) / 3);
      return d2 <= outer * outer && d2 >= inner * inner;
    }
    default: fail("shape_covers: class out of range");
  }
}

}  // namespace detail

// Morphological closing-style corruption plus random tile holes. Input must
// be binary {0,255}; output is binary {0,255}.
inline GrayImage corrupt_saliency(const GrayImage& clean, const SaliencyCorruption& cfg,
                                  Pcg32& rng) {
  cfg.validate();
  for (uint8_t v : clean.pixels)
    require(v == 0 || v == 255, "corrupt_saliency: input must be binary 0/255");
  const int h = clean.height, w = clean.width;
  auto morph = [&](const GrayImage& src, int radius, bool dilate) {
    if (radius == 0) return src;
    GrayImage dst = src;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        uint8_t acc = dilate ? 0 : 255;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx) {
            const int yy = y + dy, xx = x + dx;
            const uint8_t v =
                (yy < 0 || yy >= h || xx < 0 || xx >= w) ? 0 : src.at(yy, xx);
            acc = dilate ? std::max(acc, v) : std::min(acc, v);
          }
        dst.at(y, x) = acc;
      }
    return dst;
  };
  GrayImage out = morph(morph(clean, cfg.dilate_px, true), cfg.erode_px, false);
  if (cfg.hole_prob > 0) {
    constexpr int kTile = 8;
    for (int ty = 0; ty < h; ty += kTile)
      for (int tx = 0; tx < w; tx += kTile) {
        bool has_fg = false;
        for (int y = ty; y < std::min(ty + kTile, h) && !has_fg; ++y)
          for (int x = tx; x < std::min(tx + kTile, w); ++x)
            if (out.at(y, x) == 255) {
              has_fg = true;
              break;
            }
        // one draw per foreground tile, in scan order
        if (has_fg && rng.bernoulli(cfg.hole_prob))
          for (int y = ty; y < std::min(ty + kTile, h); ++y)
            for (int x = tx; x < std::min(tx + kTile, w); ++x) out.at(y, x) = 0;
      }
  }
  return out;
}

namespace detail {

inline Sample generate_sample(const DatasetConfig& cfg, uint64_t stream,
                              const std::string& id) {
  Pcg32 rng(cfg.rng_seed, stream);
  const int sz = cfg.image_size;

  for (int attempt = 0; attempt < 64; ++attempt) {
    // class multiset: distinct classes, uniformly chosen
    const int count = rng.uniform_int(cfg.shapes_min, cfg.shapes_max);
    std::vector<int> classes(cfg.num_classes);
    for (int i = 0; i < cfg.num_classes; ++i) classes[i] = i + 1;
    for (int i = cfg.num_classes - 1; i > 0; --i)
      std::swap(classes[i], classes[rng.uniform_int(0, i)]);
    classes.resize(count);

    const bool has_biased =
        cfg.co_occurrence_bias &&
        std::find(classes.begin(), classes.end(), kBiasedClass) != classes.end();

    // background: one texture, or a split with the paired texture on one side
    int tex_main, tex_other = -1;
    bool split_vertical = false;
    int split_at = 0, paired_side = 0;
    if (has_biased) {
      tex_main = kPairedTexture;
      tex_other = 1 + rng.uniform_int(0, 1);
      split_vertical = rng.bernoulli(0.5);
      split_at = sz / 2 + rng.uniform_int(-sz / 8, sz / 8);
      paired_side = rng.uniform_int(0, 1);
    } else {
      tex_main = cfg.co_occurrence_bias ? 1 + rng.uniform_int(0, 1)
                                        : rng.uniform_int(0, 2);
    }
    auto in_paired_region = [&](int x, int y) {
      if (!has_biased) return !cfg.co_occurrence_bias;
      const int coord = split_vertical ? x : y;
      return paired_side == 0 ? coord < split_at : coord >= split_at;
    };

    // place shapes; the biased class must sit inside the paired region
    std::vector<ShapeSpec> shapes;
    bool placement_ok = true;
    for (int cls : classes) {
      ShapeSpec s;
      s.cls = cls;
      s.size = rng.uniform_int(sz / 8, sz / 5);
      s.ramp_dir = rng.uniform(0.0, 2.0 * 3.14159265358979);
      bool placed = false;
      for (int tries = 0; tries < 40 && !placed; ++tries) {
        s.cx = rng.uniform_int(s.size + 1, sz - s.size - 2);
        s.cy = rng.uniform_int(s.size + 1, sz - s.size - 2);
        if (cfg.co_occurrence_bias && cls == kBiasedClass) {
          // whole bounding box inside the paired region
          placed = in_paired_region(s.cx - s.size, s.cy - s.size) &&
                   in_paired_region(s.cx + s.size, s.cy + s.size);
        } else {
          placed = true;
        }
      }
      if (!placed) {
        placement_ok = false;
        break;
      }
      shapes.push_back(s);
    }
    if (!placement_ok) continue;

    // rasterize: topmost shape wins; later shapes draw over earlier ones
    Sample sample;
    sample.id = id;
    sample.image.width = sample.image.height = sz;
    sample.image.pixels.resize(static_cast<size_t>(sz) * sz * 3);
    sample.mask.width = sample.mask.height = sz;
    sample.mask.pixels.assign(static_cast<size_t>(sz) * sz, kBackground);
    std::vector<int64_t> full_area(shapes.size(), 0), visible_area(shapes.size(), 0);

    const uint64_t tex_seed = hash_u64(cfg.rng_seed ^ stream);
    for (int y = 0; y < sz; ++y)
      for (int x = 0; x < sz; ++x) {
        int top = -1;
        for (size_t si = 0; si < shapes.size(); ++si)
          if (shape_covers(shapes[si], x, y)) {
            ++full_area[si];
            top = static_cast<int>(si);
          }
        uint8_t rgb[3];
        if (top < 0) {
          const int tex = in_paired_region(x, y) || tex_other < 0 ? tex_main : tex_other;
          texture_pixel(tex_seed, tex, x, y, rgb);
        } else {
          ++visible_area[top];
          const ShapeSpec& s = shapes[top];
          const auto& base = shape_color(s.cls);
          // strong linear shade ramp across the shape plus per-pixel hash
          // noise: one side of every object is dim and weakly discriminative,
          // so activation maps trained on image labels stay partial
          const double proj = ((x - s.cx) * std::cos(s.ramp_dir) +
                               (y - s.cy) * std::sin(s.ramp_dir)) /
                              std::max(1, s.size);
          const double shade = 1.0 + 0.45 * proj;
          for (int c = 0; c < 3; ++c) {
            const double noise =
                (static_cast<double>(hash_cell(tex_seed, x, y, 100 + c) >> 11) *
                     0x1.0p-53 -
                 0.5) *
                44.0;
            rgb[c] = clamp_byte(base[c] * shade + noise);
          }
          sample.mask.at(y, x) = static_cast<uint8_t>(s.cls);
        }
        for (int c = 0; c < 3; ++c) sample.image.at(y, x, c) = rgb[c];
      }

    // occlusion check: at least 30% of every shape visible
    bool visible_ok = true;
    for (size_t si = 0; si < shapes.size(); ++si)
      if (visible_area[si] * 10 < full_area[si] * 3 || full_area[si] == 0)
        visible_ok = false;
    if (!visible_ok) continue;

    // labels = classes actually visible (occlusion can in principle not
    // remove one entirely given the check above, but derive from the mask)
    std::vector<uint8_t> present(cfg.num_classes + 1, 0);
    for (uint8_t v : sample.mask.pixels)
      if (v != kBackground) present[v] = 1;
    for (int c = 1; c <= cfg.num_classes; ++c)
      if (present[c]) sample.labels.push_back(c);
    if (sample.labels.empty()) continue;

    // saliency: clean oracle = foreground, then corruption
    GrayImage clean;
    clean.width = clean.height = sz;
    clean.pixels.resize(sample.mask.pixels.size());
    for (size_t i = 0; i < clean.pixels.size(); ++i)
      clean.pixels[i] = sample.mask.pixels[i] == kBackground ? 0 : 255;
    sample.saliency = corrupt_saliency(clean, cfg.corruption, rng);
    return sample;
  }
  fail("generate_sample: no feasible placement for " + id + " after 64 attempts");
}

}  // namespace detail

inline Dataset generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.num_classes = cfg.num_classes;
  ds.image_size = cfg.image_size;
  char buf[32];
  for (int i = 0; i < cfg.train_count; ++i) {
    std::snprintf(buf, sizeof buf, "train_%04d", i);
    ds.train.push_back(detail::generate_sample(cfg, static_cast<uint64_t>(i), buf));
  }
  for (int i = 0; i < cfg.val_count; ++i) {
    std::snprintf(buf, sizeof buf, "val_%04d", i);
    ds.val.push_back(
        detail::generate_sample(cfg, 1000000ull + static_cast<uint64_t>(i), buf));
  }
  return ds;
}

}  // namespace sgan
