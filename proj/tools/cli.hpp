// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "shtrack/io.hpp"
#include "shtrack/metrics.hpp"
#include "shtrack/png_io.hpp"
#include "shtrack/sweep.hpp"
#include "shtrack/synthdata.hpp"
#include "shtrack/tracker.hpp"
#include "shtrack/version.hpp"

namespace shtrack::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kInvalidInput = 2, kInternal = 3 };

inline constexpr const char* kConfigEnv = "SHTRACK_CONFIG";

namespace detail {

struct TrackerFlags {
  std::string config;
  std::optional<double> gun_thresh;
  std::optional<double> shooter_thresh;
  bool no_gun_confirm = false;
  bool no_ocr = false;
};

// Config file (explicit or from the environment) first, flags on top.
inline TrackerConfig resolve_tracker_config(const TrackerFlags& f) {
  TrackerConfig cfg;
  std::string path = f.config;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') path = env;
  }
  if (!path.empty()) apply_tracker_config(read_key_values(fs::path(path)), cfg);
  if (f.gun_thresh) cfg.gun_conf_thresh = *f.gun_thresh;
  if (f.shooter_thresh) cfg.shooter_conf_thresh = *f.shooter_thresh;
  if (f.no_gun_confirm) cfg.gun_confirmation = false;
  if (f.no_ocr) cfg.use_ocr = false;
  cfg.validate();
  return cfg;
}

inline void add_tracker_flags(CLI::App* cmd, TrackerFlags& f) {
  cmd->add_option("--config", f.config, "Tracker config file (key = value); default from $SHTRACK_CONFIG");
  cmd->add_option("--gun-thresh", f.gun_thresh, "Gun confidence threshold")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--shooter-thresh", f.shooter_thresh, "Shooter confidence threshold")->check(CLI::Range(0.0, 1.0));
  cmd->add_flag("--no-gun-confirm", f.no_gun_confirm, "Start tracks without a confirming gun detection");
  cmd->add_flag("--no-ocr", f.no_ocr, "Disable the recovery association stage");
}

inline std::vector<int> parse_windows(const std::string& spec) {
  std::vector<int> out;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto colon = part.find(':');
    try {
      if (colon == std::string::npos) {
        out.push_back(std::stoi(part));
      } else {
        const int a = std::stoi(part.substr(0, colon));
        const int b = std::stoi(part.substr(colon + 1));
        if (a > b) throw CLI::ValidationError("--windows", "empty range " + part);
        for (int w = a; w <= b; ++w) out.push_back(w);
      }
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--windows", "expected N, A:B or a comma list, got '" + spec + "'");
    }
  }
  for (int w : out)
    if (w < 1) throw CLI::ValidationError("--windows", "window sizes must be >= 1");
  if (out.empty()) throw CLI::ValidationError("--windows", "no windows given");
  return out;
}

inline std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Runs fn(i) for i in [0, n) on `jobs` threads; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(1, jobs); ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline nlohmann::json describe(const CLI::App& app) {
  nlohmann::json j;
  j["name"] = app.get_name();
  j["description"] = app.get_description();
  j["options"] = nlohmann::json::array();
  for (const CLI::Option* opt : app.get_options()) {
    nlohmann::json o;
    o["name"] = opt->get_name();
    o["description"] = opt->get_description();
    o["required"] = opt->get_required();
    o["takes_value"] = opt->get_items_expected_max() > 0;
    j["options"].push_back(o);
  }
  j["subcommands"] = nlohmann::json::array();
  for (const CLI::App* sub : app.get_subcommands({})) j["subcommands"].push_back(describe(*sub));
  return j;
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_track(const std::string& dets_path, const std::string& embs_path, const TrackerFlags& flags,
                      const std::string& out_path) {
  const TrackerConfig cfg = resolve_tracker_config(flags);
  const auto dets = read_detections(fs::path(dets_path));
  std::optional<EmbeddingTable> embs;
  if (!embs_path.empty()) embs = read_embeddings(fs::path(embs_path), dets);
  const auto frames = run_sequence(dets, embs ? &*embs : nullptr, cfg);
  auto out = shtrack::detail::open_out(out_path);
  write_tracks(out, to_records(frames));
}

inline void cmd_eval(const std::string& gt_path, const std::string& tracks_path, double iou_thresh,
                     const std::string& out_path) {
  const auto gt = read_ground_truth(fs::path(gt_path));
  const auto tracks = read_tracks(fs::path(tracks_path));
  const Evaluation e = evaluate(gt, tracks, iou_thresh);
  auto out = shtrack::detail::open_out(out_path);
  write_report(out, e);
}

inline void cmd_sweep(const std::string& dets_path, const std::string& gt_path, const std::string& embs_path,
                      const TrackerFlags& flags, double iou_thresh, int jobs, const std::string& out_path) {
  const TrackerConfig base = resolve_tracker_config(flags);
  const auto dets = read_detections(fs::path(dets_path));
  const auto gt = read_ground_truth(fs::path(gt_path));
  std::optional<EmbeddingTable> embs;
  if (!embs_path.empty()) embs = read_embeddings(fs::path(embs_path), dets);
  int num_frames = 0;
  for (const auto& g : gt) num_frames = std::max(num_frames, g.frame + 1);
  const auto grid = default_threshold_grid();
  const auto rows = sweep_thresholds(dets, embs ? &*embs : nullptr, gt, base, grid, jobs, iou_thresh, num_frames);
  auto out = shtrack::detail::open_out(out_path);
  write_sweep(out, rows);
}

inline void cmd_sysmetric(const std::string& gt_path, const std::string& tracks_path, const std::string& windows,
                          double iou_thresh, const std::string& out_path) {
  const auto sizes = parse_windows(windows);
  const auto gt = read_ground_truth(fs::path(gt_path));
  const auto tracks = read_tracks(fs::path(tracks_path));
  std::vector<WindowedReport> rows;
  for (int w : sizes) rows.push_back(windowed_prf(gt, tracks, w, iou_thresh));
  auto out = shtrack::detail::open_out(out_path);
  write_windowed(out, rows);
}

inline void cmd_augment(const std::string& in_dir, const std::string& out_dir, std::uint64_t seed,
                        const std::string& profile_path, int jobs) {
  AugmentProfile profile;
  if (!profile_path.empty()) apply_augment_profile(read_key_values(fs::path(profile_path)), profile);
  const auto images = list_pngs(in_dir);
  fs::create_directories(out_dir);
  std::vector<SensorEffectParams> params(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k));
    params[k] = sample_effect_params(rng, profile);
    const ImageBuffer img = read_png(images[k]);
    write_png(fs::path(out_dir) / images[k].filename(), apply_sensor_effects(img, params[k]));
  });

  auto log = shtrack::detail::open_out(fs::path(out_dir) / "effects.csv");
  log << "image,noise,noise_sigma,blur,blur_sigma,ca,ca_scale,ca_shift,exposure,exposure_stops,"
         "color_shift,shift_r,shift_g,shift_b\n";
  for (std::size_t k = 0; k < images.size(); ++k) {
    const auto& p = params[k];
    log << images[k].filename().string() << ',' << p.noise_on << ',' << format_real(p.noise_sigma) << ','
        << p.blur_on << ',' << format_real(p.blur_sigma) << ',' << p.ca_on << ',' << format_real(p.ca_scale) << ','
        << format_real(p.ca_shift) << ',' << p.exposure_on << ',' << format_real(p.exposure_stops) << ','
        << p.color_shift_on << ',' << format_real(p.color_shift[0]) << ',' << format_real(p.color_shift[1]) << ','
        << format_real(p.color_shift[2]) << '\n';
  }
}

inline void cmd_recolor(const std::string& in_dir, const std::string& out_dir, const std::string& map_path,
                        std::uint64_t seed, const RecolorOptions& opt, int jobs, std::ostream& err) {
  const ColorMap map = read_color_map(fs::path(map_path));
  const auto images = list_pngs(in_dir);
  fs::create_directories(out_dir);
  std::vector<std::vector<std::string>> warnings(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k));
    const ImageBuffer mask = read_png(images[k]);
    RecolorResult res = recolor_mask(mask, map, rng, opt);
    const fs::path out_png = fs::path(out_dir) / images[k].filename();
    write_png(out_png, res.image);
    auto sidecar = shtrack::detail::open_out(fs::path(out_dir) / (images[k].stem().string() + ".map.csv"));
    write_color_map(sidecar, res.map);
    warnings[k] = std::move(res.warnings);
  });
  for (std::size_t k = 0; k < images.size(); ++k)
    for (const auto& w : warnings[k]) err << "warning: " << images[k].filename().string() << ": " << w << '\n';
}

inline void cmd_annotate(const std::string& in_dir, const std::string& map_path, int min_side,
                         const std::string& out_path) {
  const ColorMap default_map = read_color_map(fs::path(map_path));
  const auto images = list_pngs(in_dir);
  std::vector<Detection> dets;
  for (std::size_t k = 0; k < images.size(); ++k) {
    const fs::path sidecar = images[k].parent_path() / (images[k].stem().string() + ".map.csv");
    const ColorMap map = fs::exists(sidecar) ? read_color_map(sidecar) : default_map;
    for (const auto& b : extract_boxes(read_png(images[k]), map, min_side)) {
      if (b.cls != ObjectClass::Shooter && b.cls != ObjectClass::Gun) continue;
      Detection d;
      d.frame = static_cast<int>(k);
      d.cls = b.cls == ObjectClass::Shooter ? ClassId::Shooter : ClassId::Gun;
      d.bbox = b.box;
      d.confidence = 1.0;
      dets.push_back(d);
    }
  }
  auto out = shtrack::detail::open_out(out_path);
  write_detections(out, dets);
}

inline void cmd_bench(const std::string& dets_path, const std::string& embs_path, const TrackerFlags& flags,
                      int repeat, std::ostream& out) {
  const TrackerConfig cfg = resolve_tracker_config(flags);
  auto dets = read_detections(fs::path(dets_path));
  if (!embs_path.empty()) {
    const auto embs = read_embeddings(fs::path(embs_path), dets);
    std::map<int, int> seen;
    for (auto& d : dets) {
      const int idx = seen[d.frame]++;
      if (const auto it = embs.find({d.frame, idx}); it != embs.end()) d.embedding = it->second;
    }
  }
  int last = -1;
  for (const auto& d : dets) last = std::max(last, d.frame);
  std::vector<std::vector<Detection>> by_frame(static_cast<std::size_t>(last + 1));
  for (const auto& d : dets) by_frame[d.frame].push_back(d);

  std::vector<double> predict, associate, recover, initialize, maintain, total;
  for (int r = 0; r < repeat; ++r) {
    Tracker tracker(cfg);
    for (int f = 0; f <= last; ++f) {
      StageTimings t;
      tracker.step(f, by_frame[f], &t);
      predict.push_back(t.predict);
      associate.push_back(t.associate);
      recover.push_back(t.recover);
      initialize.push_back(t.initialize);
      maintain.push_back(t.maintain);
      total.push_back(t.total());
    }
  }

  out << "# tracking stage only; detector latency is not measured\n";
  out << "stage,mean_ms,p50_ms,p95_ms\n";
  auto row = [&](const char* name, const std::vector<double>& v) {
    out << name << ',' << format_real(mean(v)) << ',' << format_real(percentile(v, 0.5)) << ','
        << format_real(percentile(v, 0.95)) << '\n';
  };
  row("predict", predict);
  row("associate", associate);
  row("recover", recover);
  row("initialize", initialize);
  row("maintain", maintain);
  row("total", total);
  const double m = mean(total);
  out << "frames," << total.size() << '\n';
  out << "fps," << (m > 0.0 ? format_real(1000.0 / m) : std::string("inf")) << '\n';
}

}  // namespace detail

/**
 * Entry point shared by the binary and the tests. Exit codes: 0 success,
 * 1 usage error, 2 input validation error, 3 internal error. Diagnostics
 * go to `err`; only data goes to `out` or files.
 */
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Shooter tracking, evaluation and synthetic-data tools", "shtrack"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  bool help_json = false;
  app.add_flag("--help-json", help_json, "Print the command and flag tree as JSON");

  std::string dets, embs, gt, tracks, out_path, in_dir, out_dir, map_path, profile, windows = "1:60";
  double iou_thresh = 0.5;
  int jobs = 1, min_side = 8, repeat = 10;
  std::uint64_t seed = 0;
  TrackerFlags tflags;
  RecolorOptions recolor_opt;

  auto* track = app.add_subcommand("track", "Run the tracker over a detection file");
  track->add_option("--dets", dets, "Detection CSV")->required();
  track->add_option("--embs", embs, "Embedding JSON Lines");
  add_tracker_flags(track, tflags);
  track->add_option("--out", out_path, "Track output CSV")->required();

  auto* eval = app.add_subcommand("eval", "CLEAR-MOT and identity metrics");
  eval->add_option("--gt", gt, "Ground truth CSV")->required();
  eval->add_option("--tracks", tracks, "Track CSV")->required();
  eval->add_option("--iou", iou_thresh, "Match IoU threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--out", out_path, "Report CSV")->required();

  auto* sweep = app.add_subcommand("sweep", "Gun/shooter threshold grid, with and without gun confirmation");
  sweep->add_option("--dets", dets, "Raw detection CSV")->required();
  sweep->add_option("--gt", gt, "Ground truth CSV")->required();
  sweep->add_option("--embs", embs, "Embedding JSON Lines");
  sweep->add_option("--config", tflags.config, "Tracker config file");
  sweep->add_option("--iou", iou_thresh, "Match IoU threshold")->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_path, "Sweep CSV")->required();

  auto* sys = app.add_subcommand("sysmetric", "Windowed system-level precision/recall/F1");
  sys->add_option("--gt", gt, "Ground truth CSV")->required();
  sys->add_option("--tracks", tracks, "Track CSV")->required();
  sys->add_option("--windows", windows, "Window sizes: N, A:B, or comma list");
  sys->add_option("--iou", iou_thresh, "Match IoU threshold")->check(CLI::Range(0.0, 1.0));
  sys->add_option("--out", out_path, "Windowed report CSV")->required();

  auto* augment = app.add_subcommand("augment", "Apply random camera sensor effects to PNG images");
  augment->add_option("--in", in_dir, "Input directory")->required();
  augment->add_option("--out", out_dir, "Output directory")->required();
  augment->add_option("--seed", seed, "RNG seed")->required();
  augment->add_option("--profile", profile, "Augmentation profile (key = value)");
  augment->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* recolor = app.add_subcommand("recolor", "Randomize flat mask colors");
  recolor->add_option("--in", in_dir, "Input mask directory")->required();
  recolor->add_option("--out", out_dir, "Output directory")->required();
  recolor->add_option("--map", map_path, "Color map CSV for the input masks")->required();
  recolor->add_option("--seed", seed, "RNG seed")->required();
  recolor->add_flag("--randomize-background", recolor_opt.randomize_background, "Also recolor the background");
  recolor->add_option("--min-pixels", recolor_opt.min_pixels, "Warn on colors covering fewer pixels");
  recolor->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* annotate = app.add_subcommand("annotate", "Extract tight boxes from flat-color masks");
  annotate->add_option("--in", in_dir, "Mask directory")->required();
  annotate->add_option("--map", map_path, "Color map CSV (per-image <stem>.map.csv overrides)")->required();
  annotate->add_option("--min-side", min_side, "Drop boxes whose shorter side is below this")
      ->check(CLI::NonNegativeNumber);
  annotate->add_option("--out", out_path, "Detection CSV")->required();

  auto* bench = app.add_subcommand("bench", "Per-stage tracking latency");
  bench->add_option("--dets", dets, "Detection CSV")->required();
  bench->add_option("--embs", embs, "Embedding JSON Lines");
  add_tracker_flags(bench, tflags);
  bench->add_option("--repeat", repeat, "Passes over the sequence")->check(CLI::PositiveNumber);

  // --help-json must work without a subcommand.
  for (int k = 1; k < argc; ++k) {
    if (std::string_view(argv[k]) == "--help-json") {
      out << describe(app).dump(2) << '\n';
      return kOk;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (track->parsed()) cmd_track(dets, embs, tflags, out_path);
    else if (eval->parsed()) cmd_eval(gt, tracks, iou_thresh, out_path);
    else if (sweep->parsed()) cmd_sweep(dets, gt, embs, tflags, iou_thresh, jobs, out_path);
    else if (sys->parsed()) cmd_sysmetric(gt, tracks, windows, iou_thresh, out_path);
    else if (augment->parsed()) cmd_augment(in_dir, out_dir, seed, profile, jobs);
    else if (recolor->parsed()) cmd_recolor(in_dir, out_dir, map_path, seed, recolor_opt, jobs, err);
    else if (annotate->parsed()) cmd_annotate(in_dir, map_path, min_side, out_path);
    else if (bench->parsed()) cmd_bench(dets, embs, tflags, repeat, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const PngError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}

}  // namespace shtrack::cli
