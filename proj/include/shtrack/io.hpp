// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "shtrack/metrics.hpp"
#include "shtrack/sweep.hpp"
#include "shtrack/synthdata.hpp"
#include "shtrack/tracker.hpp"

namespace shtrack {

/// Malformed or invalid input data. Messages name the offending line.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Text primitives

/// Fixed notation with at most six decimals, trailing zeros trimmed.
/// Locale independent.
inline std::string format_real(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("format_real: non-finite value");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  std::string s(buf, res.ptr);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string at_line(std::size_t line) { return ", line " + std::to_string(line); }

inline long long parse_int(std::string_view s, std::size_t line, const char* what) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InputError(std::string("invalid ") + what + " '" + std::string(s) + "'" + at_line(line));
  }
  return v;
}

inline double parse_real(std::string_view s, std::size_t line, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InputError(std::string("invalid ") + what + " '" + std::string(s) + "'" + at_line(line));
  }
  return v;
}

// Calls fn(fields, line_no) for every non-blank, non-comment line. Lines
// starting with '#' are comments unless `hash_comments` is false.
template <typename Fn>
void for_each_record(std::istream& in, std::size_t expected_fields, Fn&& fn, bool hash_comments = true) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto t = trim(raw);
    if (t.empty() || (hash_comments && t.front() == '#')) continue;
    const auto fields = split_csv(t);
    if (fields.size() != expected_fields) {
      throw InputError("malformed line: expected " + std::to_string(expected_fields) + " fields, got " +
                       std::to_string(fields.size()) + at_line(line));
    }
    fn(fields, line);
  }
}

inline int parse_frame(std::string_view s, std::size_t line) {
  const long long f = parse_int(s, line, "frame");
  if (f < 1 || f > 100'000'000) throw InputError("frame must be a positive integer" + at_line(line));
  return static_cast<int>(f - 1);
}

inline ClassId parse_class(std::string_view s, std::size_t line) {
  const long long c = parse_int(s, line, "class");
  if (c != 0 && c != 1) throw InputError("class must be 0 (shooter) or 1 (gun)" + at_line(line));
  return static_cast<ClassId>(c);
}

inline BBox parse_box(const std::vector<std::string_view>& f, std::size_t first, std::size_t line) {
  BBox b{parse_real(f[first], line, "x"), parse_real(f[first + 1], line, "y"),
         parse_real(f[first + 2], line, "w"), parse_real(f[first + 3], line, "h")};
  if (b.w < 0.0 || b.h < 0.0) throw InputError("negative box width or height" + at_line(line));
  return b;
}

inline void write_box(std::ostream& out, const BBox& b) {
  out << format_real(b.x) << ',' << format_real(b.y) << ',' << format_real(b.w) << ',' << format_real(b.h);
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Detections: frame,class,x,y,w,h,conf

inline std::vector<Detection> read_detections(std::istream& in) {
  std::vector<Detection> out;
  detail::for_each_record(in, 7, [&](const auto& f, std::size_t line) {
    Detection d;
    d.frame = detail::parse_frame(f[0], line);
    d.cls = detail::parse_class(f[1], line);
    d.bbox = detail::parse_box(f, 2, line);
    if (d.bbox.w <= 0.0 || d.bbox.h <= 0.0) throw InputError("zero-area detection box" + detail::at_line(line));
    d.confidence = detail::parse_real(f[6], line, "confidence");
    if (d.confidence < 0.0 || d.confidence > 1.0) {
      throw InputError("confidence out of range" + detail::at_line(line));
    }
    out.push_back(std::move(d));
  });
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
  return out;
}

inline std::vector<Detection> read_detections(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  try {
    return read_detections(in);
  } catch (const InputError& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

inline void write_detections(std::ostream& out, std::span<const Detection> dets) {
  for (const auto& d : dets) {
    out << d.frame + 1 << ',' << static_cast<int>(d.cls) << ',';
    detail::write_box(out, d.bbox);
    out << ',' << format_real(d.confidence) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Embeddings: JSON Lines {"frame": int, "det": int, "v": [reals]}

/**
 * Reads embeddings and validates them against `dets` (already loaded,
 * grouped by frame in file order). `det` is the 0-based index of the
 * detection within its frame. Vectors are L2-normalized on load.
 */
inline EmbeddingTable read_embeddings(std::istream& in, std::span<const Detection> dets) {
  std::map<int, int> per_frame;
  for (const auto& d : dets) ++per_frame[d.frame];

  EmbeddingTable table;
  std::optional<std::size_t> dim;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto t = detail::trim(raw);
    if (t.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(t);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("invalid JSON (") + e.what() + ")" + detail::at_line(line));
    }
    if (!j.is_object() || !j.contains("frame") || !j.contains("det") || !j.contains("v") ||
        !j["frame"].is_number_integer() || !j["det"].is_number_integer() || !j["v"].is_array()) {
      throw InputError("embedding record needs integer 'frame', integer 'det' and array 'v'" + detail::at_line(line));
    }
    const long long frame1 = j["frame"].get<long long>();
    const long long index = j["det"].get<long long>();
    if (frame1 < 1) throw InputError("frame must be a positive integer" + detail::at_line(line));
    const int frame = static_cast<int>(frame1 - 1);
    const auto it = per_frame.find(frame);
    const int count = it == per_frame.end() ? 0 : it->second;
    if (index < 0 || index >= count) {
      throw InputError("embedding references missing detection: frame " + std::to_string(frame1) + ", det " +
                       std::to_string(index) + detail::at_line(line));
    }
    Embedding e;
    for (const auto& x : j["v"]) {
      if (!x.is_number()) throw InputError("non-numeric embedding value" + detail::at_line(line));
      const double v = x.get<double>();
      if (!std::isfinite(v)) throw InputError("non-finite embedding value" + detail::at_line(line));
      e.values.push_back(v);
    }
    if (e.values.empty()) throw InputError("empty embedding vector" + detail::at_line(line));
    if (dim && *dim != e.dim()) {
      throw InputError("inconsistent embedding dimension: " + std::to_string(e.dim()) + " vs " +
                       std::to_string(*dim) + detail::at_line(line));
    }
    dim = e.dim();
    try {
      normalize(e);
    } catch (const std::invalid_argument& err) {
      throw InputError(std::string(err.what()) + detail::at_line(line));
    }
    if (!table.emplace(std::pair{frame, static_cast<int>(index)}, std::move(e)).second) {
      throw InputError("duplicate embedding for frame " + std::to_string(frame1) + ", det " +
                       std::to_string(index) + detail::at_line(line));
    }
  }
  return table;
}

inline EmbeddingTable read_embeddings(const std::filesystem::path& p, std::span<const Detection> dets) {
  auto in = detail::open_in(p);
  try {
    return read_embeddings(in, dets);
  } catch (const InputError& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

inline void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  for (const auto& [key, e] : table) {
    out << "{\"frame\": " << key.first + 1 << ", \"det\": " << key.second << ", \"v\": [";
    for (std::size_t k = 0; k < e.dim(); ++k) {
      if (k) out << ", ";
      out << format_real(e.values[k]);
    }
    out << "]}\n";
  }
}

// ---------------------------------------------------------------------------
// Ground truth: frame,id,class,x,y,w,h

inline std::vector<GtBox> read_ground_truth(std::istream& in) {
  std::vector<GtBox> out;
  detail::for_each_record(in, 7, [&](const auto& f, std::size_t line) {
    GtBox g;
    g.frame = detail::parse_frame(f[0], line);
    g.id = static_cast<int>(detail::parse_int(f[1], line, "id"));
    g.cls = detail::parse_class(f[2], line);
    g.bbox = detail::parse_box(f, 3, line);
    out.push_back(g);
  });
  std::stable_sort(out.begin(), out.end(), [](const GtBox& a, const GtBox& b) { return a.frame < b.frame; });
  return out;
}

inline std::vector<GtBox> read_ground_truth(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  try {
    return read_ground_truth(in);
  } catch (const InputError& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

inline void write_ground_truth(std::ostream& out, std::span<const GtBox> gt) {
  for (const auto& g : gt) {
    out << g.frame + 1 << ',' << g.id << ',' << static_cast<int>(g.cls) << ',';
    detail::write_box(out, g.bbox);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Tracks: frame,id,class,x,y,w,h,conf,confirmed

inline std::vector<TrackRecord> read_tracks(std::istream& in) {
  std::vector<TrackRecord> out;
  detail::for_each_record(in, 9, [&](const auto& f, std::size_t line) {
    TrackRecord r;
    r.frame = detail::parse_frame(f[0], line);
    r.id = static_cast<int>(detail::parse_int(f[1], line, "id"));
    r.cls = detail::parse_class(f[2], line);
    r.bbox = detail::parse_box(f, 3, line);
    r.confidence = detail::parse_real(f[7], line, "confidence");
    if (r.confidence < 0.0 || r.confidence > 1.0) throw InputError("confidence out of range" + detail::at_line(line));
    const long long c = detail::parse_int(f[8], line, "confirmed");
    if (c != 0 && c != 1) throw InputError("confirmed must be 0 or 1" + detail::at_line(line));
    r.confirmed = c == 1;
    out.push_back(r);
  });
  std::stable_sort(out.begin(), out.end(), [](const TrackRecord& a, const TrackRecord& b) { return a.frame < b.frame; });
  return out;
}

inline std::vector<TrackRecord> read_tracks(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  try {
    return read_tracks(in);
  } catch (const InputError& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

inline void write_tracks(std::ostream& out, std::span<const TrackRecord> recs) {
  for (const auto& r : recs) {
    out << r.frame + 1 << ',' << r.id << ',' << static_cast<int>(r.cls) << ',';
    detail::write_box(out, r.bbox);
    out << ',' << format_real(r.confidence) << ',' << (r.confirmed ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Metric tables

inline constexpr std::string_view kReportHeader =
    "mota,idf1,idp,idr,precision,recall,matched,fp,fn,idsw,num_gt,idtp,idfp,idfn";

inline void write_report_fields(std::ostream& out, const Evaluation& e) {
  const auto& r = e.report;
  const auto& c = e.counts;
  out << format_optional(r.mota) << ',' << format_optional(r.idf1) << ',' << format_optional(r.idp) << ','
      << format_optional(r.idr) << ',' << format_optional(r.precision) << ',' << format_optional(r.recall) << ','
      << c.matched << ',' << c.fp << ',' << c.fn << ',' << c.idsw << ',' << c.num_gt << ',' << c.idtp << ','
      << c.idfp << ',' << c.idfn;
}

inline void write_report(std::ostream& out, const Evaluation& e) {
  out << kReportHeader << '\n';
  write_report_fields(out, e);
  out << '\n';
}

inline void write_sweep(std::ostream& out, std::span<const SweepRow> rows) {
  out << "mode,gun_thresh,shooter_thresh," << kReportHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.mode) << ',' << format_real(r.gun_thresh) << ',' << format_real(r.shooter_thresh) << ',';
    write_report_fields(out, r.eval);
    out << '\n';
  }
}

inline void write_windowed(std::ostream& out, std::span<const WindowedReport> rows) {
  out << "window,precision,recall,f1\n";
  for (const auto& r : rows) {
    out << r.window << ',' << format_real(r.precision) << ',' << format_real(r.recall) << ',' << format_real(r.f1)
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Color map: color_hex,class,object_id (with header row)

inline Rgb8 parse_hex_color(std::string_view s, std::size_t line) {
  if (!s.empty() && s.front() == '#') s.remove_prefix(1);
  unsigned v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (s.size() != 6 || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InputError("invalid color '" + std::string(s) + "'" + detail::at_line(line));
  }
  return Rgb8::unpack(v);
}

inline ColorMap read_color_map(std::istream& in) {
  ColorMap map;
  bool header_seen = false;
  detail::for_each_record(in, 3, [&](const auto& f, std::size_t line) {
    if (!header_seen) {
      header_seen = true;
      if (f[0] == "color_hex") return;
    }
    const Rgb8 c = parse_hex_color(f[0], line);
    const auto cls = parse_object_class(f[1]);
    if (!cls) throw InputError("unknown object class '" + std::string(f[1]) + "'" + detail::at_line(line));
    const int id = static_cast<int>(detail::parse_int(f[2], line, "object_id"));
    try {
      map.add({c, *cls, id});
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string(e.what()) + detail::at_line(line));
    }
  }, false);
  return map;
}

inline ColorMap read_color_map(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  try {
    return read_color_map(in);
  } catch (const InputError& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

inline void write_color_map(std::ostream& out, const ColorMap& map) {
  out << "color_hex,class,object_id\n";
  for (const auto& e : map.entries()) out << to_hex(e.color) << ',' << to_string(e.cls) << ',' << e.object_id << '\n';
}

// ---------------------------------------------------------------------------
// Flat key = value configuration

using KeyValues = std::map<std::string, std::string, std::less<>>;

inline KeyValues read_key_values(std::istream& in) {
  KeyValues kv;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto t = detail::trim(raw);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw InputError("expected 'key = value'" + detail::at_line(line));
    const auto key = detail::trim(t.substr(0, eq));
    const auto value = detail::trim(t.substr(eq + 1));
    if (key.empty()) throw InputError("empty key" + detail::at_line(line));
    kv[std::string(key)] = std::string(value);
  }
  return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  try {
    return read_key_values(in);
  } catch (const InputError& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

namespace detail {

inline double kv_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw InputError("config key '" + key + "': invalid number '" + v + "'");
  }
  return out;
}

inline int kv_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw InputError("config key '" + key + "': invalid integer '" + v + "'");
  }
  return out;
}

inline bool kv_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InputError("config key '" + key + "': invalid boolean '" + v + "'");
}

}  // namespace detail

/// Applies recognised keys onto `cfg`; unknown keys are errors.
inline void apply_tracker_config(const KeyValues& kv, TrackerConfig& cfg) {
  for (const auto& [key, v] : kv) {
    if (key == "shooter_conf_thresh") cfg.shooter_conf_thresh = detail::kv_real(key, v);
    else if (key == "gun_conf_thresh") cfg.gun_conf_thresh = detail::kv_real(key, v);
    else if (key == "gun_overlap_mode") {
      if (v == "any_overlap") cfg.gun_overlap_mode = GunOverlapMode::AnyOverlap;
      else if (v == "containment") cfg.gun_overlap_mode = GunOverlapMode::Containment;
      else throw InputError("config key 'gun_overlap_mode': expected any_overlap or containment");
    }
    else if (key == "gun_containment_min") cfg.gun_containment_min = detail::kv_real(key, v);
    else if (key == "iou_gate") cfg.iou_gate = detail::kv_real(key, v);
    else if (key == "lambda_ocm") cfg.lambda_ocm = detail::kv_real(key, v);
    else if (key == "lambda_app") cfg.lambda_app = detail::kv_real(key, v);
    else if (key == "w_aw") cfg.w_aw = detail::kv_real(key, v);
    else if (key == "delta_t") cfg.delta_t = detail::kv_int(key, v);
    else if (key == "alpha_fixed") cfg.alpha_fixed = detail::kv_real(key, v);
    else if (key == "conf_floor") cfg.conf_floor = detail::kv_real(key, v);
    else if (key == "max_age") cfg.max_age = detail::kv_int(key, v);
    else if (key == "min_hits") cfg.min_hits = detail::kv_int(key, v);
    else if (key == "gun_confirmation") cfg.gun_confirmation = detail::kv_bool(key, v);
    else if (key == "use_ocr") cfg.use_ocr = detail::kv_bool(key, v);
    else throw InputError("unknown config key '" + key + "'");
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

inline void apply_augment_profile(const KeyValues& kv, AugmentProfile& p) {
  for (const auto& [key, v] : kv) {
    const double x = detail::kv_real(key, v);
    if (key == "apply_probability") p.apply_probability = x;
    else if (key == "noise_sigma_max") p.noise_sigma_max = x;
    else if (key == "blur_sigma_max") p.blur_sigma_max = x;
    else if (key == "ca_scale_min") p.ca_scale_min = x;
    else if (key == "ca_scale_max") p.ca_scale_max = x;
    else if (key == "ca_shift_max") p.ca_shift_max = x;
    else if (key == "exposure_stops_max") p.exposure_stops_max = x;
    else if (key == "color_shift_max") p.color_shift_max = x;
    else throw InputError("unknown profile key '" + key + "'");
  }
  if (!(p.apply_probability >= 0.0 && p.apply_probability <= 1.0) || p.noise_sigma_max < 0.0 ||
      p.blur_sigma_max < 0.0 || p.ca_scale_min <= 0.0 || p.ca_scale_min > p.ca_scale_max || p.ca_shift_max < 0.0 ||
      p.exposure_stops_max < 0.0 || p.color_shift_max < 0.0) {
    throw InputError("augmentation profile: inconsistent ranges");
  }
}

}  // namespace shtrack
