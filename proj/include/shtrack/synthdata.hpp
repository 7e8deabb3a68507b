// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shtrack/geometry.hpp"
#include "shtrack/random.hpp"

namespace shtrack {

/// Interleaved RGB raster with channel values in [0, 1].
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;

  ImageBuffer() = default;
  ImageBuffer(int width, int height, double fill = 0.0) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw std::invalid_argument("ImageBuffer: dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  double& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void clamp() {
    for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
  }

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// [0,1] -> 8 bit, rounding half away from zero.
inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline ImageBuffer from_rgb8(const std::vector<std::uint8_t>& rgb, int width, int height) {
  ImageBuffer img(width, height);
  if (rgb.size() != img.size()) throw std::invalid_argument("from_rgb8: buffer size mismatch");
  for (std::size_t k = 0; k < rgb.size(); ++k) img.data()[k] = rgb[k] / 255.0;
  return img;
}

inline std::vector<std::uint8_t> to_rgb8(const ImageBuffer& img) {
  std::vector<std::uint8_t> out(img.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = quantize(img.data()[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Camera sensor effects

/// Sampling ranges and apply probability. Loaded from an augmentation
/// profile file by the CLI.
struct AugmentProfile {
  double apply_probability = 0.5;
  double noise_sigma_max = 0.05;
  double blur_sigma_max = 3.0;
  double ca_scale_min = 0.998;
  double ca_scale_max = 1.002;
  double ca_shift_max = 2.0;
  double exposure_stops_max = 1.0;
  double color_shift_max = 0.05;
};

struct SensorEffectParams {
  bool noise_on = false;
  double noise_sigma = 0.0;
  bool blur_on = false;
  double blur_sigma = 0.0;
  bool ca_on = false;
  double ca_scale = 1.0;
  double ca_shift = 0.0;
  bool exposure_on = false;
  double exposure_stops = 0.0;
  bool color_shift_on = false;
  std::array<double, 3> color_shift{0.0, 0.0, 0.0};
  std::uint64_t seed = 0;  // noise stream

  bool any_enabled() const { return noise_on || blur_on || ca_on || exposure_on || color_shift_on; }
};

/// Throws if a field is outside the profile's declared ranges.
inline void validate(const SensorEffectParams& p, const AugmentProfile& r = {}) {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("sensor effects: ") + what + " out of range");
  };
  check(p.noise_sigma >= 0.0 && p.noise_sigma <= r.noise_sigma_max, "noise_sigma");
  check(p.blur_sigma >= 0.0 && p.blur_sigma <= r.blur_sigma_max, "blur_sigma");
  check(p.ca_scale >= r.ca_scale_min && p.ca_scale <= r.ca_scale_max, "ca_scale");
  check(std::abs(p.ca_shift) <= r.ca_shift_max, "ca_shift");
  check(std::abs(p.exposure_stops) <= r.exposure_stops_max, "exposure_stops");
  for (double c : p.color_shift) check(std::abs(c) <= r.color_shift_max, "color_shift");
}

/// Each effect is enabled independently; strengths are uniform within the
/// profile ranges. The draw order is fixed so a seed always yields the
/// same parameters.
inline SensorEffectParams sample_effect_params(Rng& rng, const AugmentProfile& prof = {}) {
  SensorEffectParams p;
  p.noise_on = rng.bernoulli(prof.apply_probability);
  p.noise_sigma = rng.uniform(0.0, prof.noise_sigma_max);
  p.blur_on = rng.bernoulli(prof.apply_probability);
  p.blur_sigma = rng.uniform(0.0, prof.blur_sigma_max);
  p.ca_on = rng.bernoulli(prof.apply_probability);
  p.ca_scale = rng.uniform(prof.ca_scale_min, prof.ca_scale_max);
  p.ca_shift = rng.uniform(-prof.ca_shift_max, prof.ca_shift_max);
  p.exposure_on = rng.bernoulli(prof.apply_probability);
  p.exposure_stops = rng.uniform(-prof.exposure_stops_max, prof.exposure_stops_max);
  p.color_shift_on = rng.bernoulli(prof.apply_probability);
  for (double& c : p.color_shift) c = rng.uniform(-prof.color_shift_max, prof.color_shift_max);
  p.seed = rng.next();
  return p;
}

namespace detail {

inline double sample_bilinear(const ImageBuffer& img, double x, double y, int c) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
  const double bot = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
  return (1.0 - fy) * top + fy * bot;
}

// Red is magnified by `scale` and moved right by `shift` about the image
// center; blue gets the reciprocal scale and opposite shift.
inline ImageBuffer chromatic_aberration(const ImageBuffer& in, double scale, double shift) {
  ImageBuffer out = in;
  const double cx = 0.5 * (in.width() - 1);
  const double cy = 0.5 * (in.height() - 1);
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x) {
      out.at(x, y, 0) = sample_bilinear(in, cx + (x - cx - shift) / scale, cy + (y - cy) / scale, 0);
      out.at(x, y, 2) = sample_bilinear(in, cx + (x - cx + shift) * scale, cy + (y - cy) * scale, 2);
    }
  return out;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable blur with edge replication.
inline ImageBuffer gaussian_blur(const ImageBuffer& in, double sigma) {
  if (sigma <= 0.0) return in;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  ImageBuffer tmp = in;
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x)
      for (int c = 0; c < ImageBuffer::kChannels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[i + radius] * in.at(std::clamp(x + i, 0, in.width() - 1), y, c);
        tmp.at(x, y, c) = acc;
      }
  ImageBuffer out = tmp;
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x)
      for (int c = 0; c < ImageBuffer::kChannels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[i + radius] * tmp.at(x, std::clamp(y + i, 0, in.height() - 1), c);
        out.at(x, y, c) = acc;
      }
  return out;
}

}  // namespace detail

/**
 * Applies the enabled effects in a fixed order: chromatic aberration,
 * Gaussian blur, exposure gain (2^stops), additive Gaussian noise, color
 * shift. Values are clamped to [0, 1] after every stage.
 */
inline ImageBuffer apply_sensor_effects(const ImageBuffer& img, const SensorEffectParams& p) {
  ImageBuffer out = img;
  if (p.ca_on) {
    out = detail::chromatic_aberration(out, p.ca_scale, p.ca_shift);
    out.clamp();
  }
  if (p.blur_on) {
    out = detail::gaussian_blur(out, p.blur_sigma);
    out.clamp();
  }
  if (p.exposure_on) {
    const double gain = std::exp2(p.exposure_stops);
    for (double& v : out.data()) v *= gain;
    out.clamp();
  }
  if (p.noise_on) {
    Rng rng(p.seed);
    for (double& v : out.data()) v += p.noise_sigma * rng.normal();
    out.clamp();
  }
  if (p.color_shift_on) {
    auto& d = out.data();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += p.color_shift[k % ImageBuffer::kChannels];
    out.clamp();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flat-color masks

enum class ObjectClass { Shooter, Gun, Civilian, Background };

inline std::string_view to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::Shooter: return "shooter";
    case ObjectClass::Gun: return "gun";
    case ObjectClass::Civilian: return "civilian";
    case ObjectClass::Background: return "background";
  }
  return "background";
}

inline std::optional<ObjectClass> parse_object_class(std::string_view s) {
  if (s == "shooter") return ObjectClass::Shooter;
  if (s == "gun") return ObjectClass::Gun;
  if (s == "civilian") return ObjectClass::Civilian;
  if (s == "background") return ObjectClass::Background;
  return std::nullopt;
}

struct Rgb8 {
  std::uint8_t r = 0, g = 0, b = 0;

  std::uint32_t packed() const { return (std::uint32_t{r} << 16) | (std::uint32_t{g} << 8) | b; }
  static Rgb8 unpack(std::uint32_t v) {
    return {static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
            static_cast<std::uint8_t>(v)};
  }
  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

inline Rgb8 pixel_color(const ImageBuffer& img, int x, int y) {
  return {quantize(img.at(x, y, 0)), quantize(img.at(x, y, 1)), quantize(img.at(x, y, 2))};
}

struct ColorEntry {
  Rgb8 color;
  ObjectClass cls = ObjectClass::Background;
  int object_id = 0;

  friend bool operator==(const ColorEntry&, const ColorEntry&) = default;
};

/// Exact mask color -> object identity. Colors and object ids are unique;
/// at most one entry is background.
class ColorMap {
 public:
  ColorMap() = default;
  explicit ColorMap(std::vector<ColorEntry> entries) {
    for (auto& e : entries) add(e);
  }

  void add(const ColorEntry& e) {
    if (find(e.color)) throw std::invalid_argument("color map: duplicate color");
    for (const auto& o : entries_) {
      if (o.object_id == e.object_id) {
        throw std::invalid_argument("color map: duplicate object id " + std::to_string(e.object_id));
      }
      if (o.cls == ObjectClass::Background && e.cls == ObjectClass::Background) {
        throw std::invalid_argument("color map: more than one background color");
      }
    }
    by_color_.emplace(e.color.packed(), entries_.size());
    entries_.push_back(e);
  }

  const ColorEntry* find(Rgb8 c) const {
    const auto it = by_color_.find(c.packed());
    return it == by_color_.end() ? nullptr : &entries_[it->second];
  }

  const std::vector<ColorEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const ColorMap& a, const ColorMap& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<ColorEntry> entries_;
  std::map<std::uint32_t, std::size_t> by_color_;
};

struct RecolorOptions {
  bool randomize_background = false;
  // Colors covering fewer pixels than this are reported as likely
  // anti-aliasing artifacts.
  std::int64_t min_pixels = 4;
};

struct RecolorResult {
  ImageBuffer image;
  ColorMap map;                        // entries for colors present in the mask
  std::map<std::uint32_t, Rgb8> remap;  // old packed color -> new color
  std::vector<std::string> warnings;
};

inline std::string to_hex(Rgb8 c) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(6, '0');
  const std::uint32_t v = c.packed();
  for (int k = 0; k < 6; ++k) s[5 - k] = digits[(v >> (4 * k)) & 0xf];
  return s;
}

/**
 * Maps every distinct mask color to a fresh uniformly random color,
 * resampling on collision so the mapping stays injective. The background
 * entry of `map` keeps its color unless `randomize_background` is set.
 */
inline RecolorResult recolor_mask(const ImageBuffer& mask, const ColorMap& map, Rng& rng,
                                  const RecolorOptions& opt = {}) {
  std::map<std::uint32_t, std::int64_t> histogram;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) ++histogram[pixel_color(mask, x, y).packed()];

  RecolorResult res;
  std::set<std::uint32_t> taken;
  if (!opt.randomize_background) {
    for (const auto& e : map.entries())
      if (e.cls == ObjectClass::Background && histogram.count(e.color.packed())) {
        res.remap[e.color.packed()] = e.color;
        taken.insert(e.color.packed());
      }
  }
  for (const auto& [packed, count] : histogram) {
    if (count < opt.min_pixels) {
      res.warnings.push_back("color " + to_hex(Rgb8::unpack(packed)) + " covers only " +
                             std::to_string(count) + " pixel(s); mask may be anti-aliased");
    }
    if (res.remap.count(packed)) continue;
    Rgb8 fresh;
    do {
      fresh = {rng.byte(), rng.byte(), rng.byte()};
    } while (taken.count(fresh.packed()));
    taken.insert(fresh.packed());
    res.remap[packed] = fresh;
  }

  res.image = mask;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      const Rgb8 c = res.remap.at(pixel_color(mask, x, y).packed());
      res.image.at(x, y, 0) = c.r / 255.0;
      res.image.at(x, y, 1) = c.g / 255.0;
      res.image.at(x, y, 2) = c.b / 255.0;
    }
  for (const auto& e : map.entries()) {
    const auto it = res.remap.find(e.color.packed());
    if (it != res.remap.end()) res.map.add({it->second, e.cls, e.object_id});
  }
  return res;
}

struct ExtractedBox {
  ObjectClass cls = ObjectClass::Shooter;
  int object_id = 0;
  BBox box;

  friend bool operator==(const ExtractedBox&, const ExtractedBox&) = default;
};

/**
 * Tight box around all pixels of each non-background map color (one
 * object per color, so disjoint regions merge). Boxes whose shorter side
 * is below `min_side` are dropped. Output follows map order.
 */
inline std::vector<ExtractedBox> extract_boxes(const ImageBuffer& mask, const ColorMap& map, int min_side) {
  struct Extent {
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max();
    int x1 = -1, y1 = -1;
  };
  std::vector<Extent> ext(map.size());
  const auto& entries = map.entries();
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      const ColorEntry* e = map.find(pixel_color(mask, x, y));
      if (e == nullptr || e->cls == ObjectClass::Background) continue;
      Extent& r = ext[static_cast<std::size_t>(e - entries.data())];
      r.x0 = std::min(r.x0, x);
      r.y0 = std::min(r.y0, y);
      r.x1 = std::max(r.x1, x);
      r.y1 = std::max(r.y1, y);
    }

  std::vector<ExtractedBox> out;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Extent& r = ext[k];
    if (r.x1 < 0) continue;
    const int w = r.x1 - r.x0 + 1;
    const int h = r.y1 - r.y0 + 1;
    if (std::min(w, h) < min_side) continue;
    out.push_back({entries[k].cls, entries[k].object_id,
                   BBox{static_cast<double>(r.x0), static_cast<double>(r.y0),
                        static_cast<double>(w), static_cast<double>(h)}});
  }
  return out;
}

}  // namespace shtrack
