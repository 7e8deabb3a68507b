// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli_util.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "shtrack/assignment.hpp"
#include "shtrack/io.hpp"
#include "shtrack/kalman.hpp"
#include "shtrack/metrics.hpp"
#include "shtrack/png_io.hpp"
#include "shtrack/synthdata.hpp"
#include "shtrack/tracker.hpp"

using namespace shtrack;
namespace fs = std::filesystem;

namespace {

// Collects failed checks for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++count_;
  }
  bool ok() const { return count_ == 0; }
  std::string summary() const {
    std::string s;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + f;
    if (count_ > static_cast<int>(failures_.size())) s += "; +" + std::to_string(count_ - failures_.size()) + " more";
    return s;
  }

 private:
  std::vector<std::string> failures_;
  int count_ = 0;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// 1 ------------------------------------------------------------------------
Outcome metric_arithmetic() {
  const auto t0 = std::chrono::steady_clock::now();
  MotCounts c;
  c.fp = 432;
  c.fn = 1673;
  c.idsw = 24;
  c.num_gt = 2568;
  c.matched = 895;
  const MetricsReport r = make_report(c);
  const double secs = seconds_since(t0);
  Check ck;
  ck.expect(r.mota && std::abs(*r.mota - 0.171) <= 0.001, "MOTA");
  ck.expect(r.precision && std::abs(*r.precision - 0.674) <= 0.001, "precision");
  ck.expect(r.recall && std::abs(*r.recall - 0.349) <= 0.001, "recall");
  ck.expect(secs < 1.0, "runtime");
  return {ck.ok(), "MOTA=" + fmt(r.mota.value_or(NAN)) + " P=" + fmt(r.precision.value_or(NAN)) +
                       " R=" + fmt(r.recall.value_or(NAN)) + (ck.ok() ? "" : " [" + ck.summary() + "]")};
}

// 2 ------------------------------------------------------------------------
Outcome assignment_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20260101);
  Check ck;
  int cases = 0;
  for (int n = 2; n <= 7; ++n)
    for (int k = 0; k < 100; ++k, ++cases) {
      const CostMatrix c = fixture::random_cost_matrix(rng, n, n);
      std::vector<std::vector<double>> d(n, std::vector<double>(n));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d[i][j] = c.at(i, j);
      const Assignment a = solve_assignment(c);
      ck.expect(static_cast<int>(a.matches.size()) == n && assignment_cost(c, a) == oracle::brute_force_assignment(d),
                "n=" + std::to_string(n) + " case " + std::to_string(k));
    }
  const double secs = seconds_since(t0);
  ck.expect(secs < 10.0, "runtime " + fmt(secs, 2) + "s");
  return {ck.ok(), std::to_string(cases) + " matrices, " + fmt(secs, 3) + "s" + (ck.ok() ? "" : " [" + ck.summary() + "]")};
}

// 3 ------------------------------------------------------------------------
Outcome oru_equivalence() {
  std::mt19937_64 rng(31415);
  std::uniform_real_distribution<double> pos(0, 400), len(10, 90), step(-6, 6);
  std::uniform_int_distribution<int> gap(2, 20);
  Check ck;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    BBox b{pos(rng), pos(rng), len(rng), len(rng)};
    KalmanState s = kf_init(b);
    const int warm = 3 + k % 5;
    for (int f = 1; f <= warm; ++f) {
      b = b.translated(step(rng), step(rng));
      s = kf_update(kf_predict(s), b);
    }
    const int g = gap(rng);
    const BBox z_new{b.x + g * step(rng), b.y + g * step(rng), len(rng), len(rng)};
    const KalmanState got = oru_reupdate({warm, s}, b, z_new, warm, warm + g);

    oracle::RefState ref;
    for (int i = 0; i < 7; ++i) {
      ref.x[i] = s.mean(i);
      for (int j = 0; j < 7; ++j) ref.p[i][j] = s.covariance(i, j);
    }
    const auto want = oracle::ref_reupdate(ref, oracle::measure(b.x, b.y, b.w, b.h),
                                           oracle::measure(z_new.x, z_new.y, z_new.w, z_new.h), warm, warm + g);
    for (int i = 0; i < 7; ++i) {
      const double diff = std::abs(got.mean(i) - want.x[i]);
      worst = std::max(worst, diff);
      ck.expect(diff <= 1e-9, "scenario " + std::to_string(k) + " component " + std::to_string(i));
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "50 scenarios, max |diff| = %.3g", worst);
  return {ck.ok(), std::string(buf) + (ck.ok() ? "" : " [" + ck.summary() + "]")};
}

// 4 ------------------------------------------------------------------------
Outcome ocr_fixture() {
  const auto dets = read_detections(fixture::data_dir() / "occlusion_dets.csv");
  const auto gt = read_ground_truth(fixture::data_dir() / "occlusion_gt.csv");
  TrackerConfig cfg;
  cfg.max_age = 30;
  const auto with = run_sequence(dets, nullptr, cfg);
  const auto ids_with = fixture::distinct_ids(with);
  const MotCounts c = compute_clear(gt, to_records(with));
  cfg.use_ocr = false;
  const auto ids_without = fixture::distinct_ids(run_sequence(dets, nullptr, cfg));
  Check ck;
  ck.expect(ids_with.size() == 1, "OCR on: " + std::to_string(ids_with.size()) + " ids");
  ck.expect(c.idsw == 0, "OCR on: idsw " + std::to_string(c.idsw));
  ck.expect(ids_without.size() >= 2, "OCR off: " + std::to_string(ids_without.size()) + " ids");
  return {ck.ok(), "ids with OCR=" + std::to_string(ids_with.size()) + " idsw=" + std::to_string(c.idsw) +
                       ", ids without OCR=" + std::to_string(ids_without.size()) +
                       (ck.ok() ? "" : " [" + ck.summary() + "]")};
}

// 5 ------------------------------------------------------------------------
Outcome gun_confirmation() {
  TrackerConfig cfg;
  cfg.gun_conf_thresh = 0.8;
  cfg.shooter_conf_thresh = 0.6;
  Check ck;

  const auto gunless = fixture::stationary_scene(100, {}, {100, 100, 40, 80}, 0.6, 0.8);
  const std::size_t a = fixture::emitted_boxes(run_sequence(gunless, nullptr, cfg));
  ck.expect(a == 0, "(a) emitted " + std::to_string(a));

  const auto first_gun = fixture::stationary_scene(100, {0}, {100, 100, 40, 80}, 0.6, 0.8);
  const auto frames = run_sequence(first_gun, nullptr, cfg);
  std::size_t emitted = 0;
  std::set<int> ids;
  for (const auto& f : frames) {
    emitted += f.entries.size() == 1 ? 1 : 0;
    for (const auto& e : f.entries) ids.insert(e.track_id);
  }
  ck.expect(emitted == 100 && ids.size() == 1, "(b) emitted on " + std::to_string(emitted) + "/100 frames");

  TrackerConfig open = cfg;
  open.gun_confirmation = false;
  const std::size_t c = fixture::emitted_boxes(run_sequence(gunless, nullptr, open));
  ck.expect(c >= 1, "(c) emitted " + std::to_string(c));
  return {ck.ok(), "(a) " + std::to_string(a) + " boxes, (b) " + std::to_string(emitted) + "/100 frames, (c) " +
                       std::to_string(c) + " boxes" + (ck.ok() ? "" : " [" + ck.summary() + "]")};
}

// 6 ------------------------------------------------------------------------
Outcome identity_oracle() {
  std::mt19937_64 rng(60606);
  Check ck;
  for (int k = 0; k < 50; ++k) {
    const auto fx = fixture::random_id_fixture(rng, 5, 5);
    const IdentityTable t = build_identity_table(fx.gt, fx.pred);
    const std::int64_t best = oracle::best_identity_pairing(t.matches, t.pred_ids.size());
    const IdCounts c = compute_id_metrics(fx.gt, fx.pred);
    ck.expect(c.idtp == best && c.idfp == static_cast<std::int64_t>(fx.pred.size()) - best &&
                  c.idfn == static_cast<std::int64_t>(fx.gt.size()) - best,
              "fixture " + std::to_string(k));
  }
  return {ck.ok(), "50 fixtures" + (ck.ok() ? std::string() : " [" + ck.summary() + "]")};
}

// 7 ------------------------------------------------------------------------
Outcome windowed_properties() {
  std::mt19937_64 rng(7777);
  Check ck;
  for (int k = 0; k < 50; ++k) {
    const auto fx = fixture::random_window_fixture(rng);
    double prev = -1.0;
    for (int w = 1; w <= 61; ++w) {
      const double r = windowed_prf(fx.gt, fx.pred, w).recall;
      ck.expect(r >= prev, "fixture " + std::to_string(k) + " window " + std::to_string(w));
      prev = r;
    }
    const WindowedReport one = windowed_prf(fx.gt, fx.pred, 1);
    const MetricsReport exact = make_report(compute_clear(fx.gt, fx.pred));
    ck.expect(one.precision == exact.precision.value_or(0.0) && one.recall == exact.recall.value_or(0.0),
              "fixture " + std::to_string(k) + " window 1");
  }
  std::vector<GtBox> gt;
  std::vector<TrackRecord> pred;
  for (int f = 0; f < 30; ++f) {
    gt.push_back({f, 1, ClassId::Shooter, {50, 50, 40, 80}});
    if (f % 2 == 0) pred.push_back({f, 1, ClassId::Shooter, {50, 50, 40, 80}, 1.0, true});
  }
  const double even = windowed_prf(gt, pred, 3).recall;
  ck.expect(even == 1.0, "even-frames recall " + fmt(even));
  return {ck.ok(), "50 fixtures monotone, even-frames recall@3=" + fmt(even) + (ck.ok() ? "" : " [" + ck.summary() + "]")};
}

// 8 ------------------------------------------------------------------------
Outcome augmentation() {
  Check ck;
  ImageBuffer img(48, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 48; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = ((x * 5 + y * 11 + c * 67) % 256) / 255.0;
  ck.expect(to_rgb8(apply_sensor_effects(img, SensorEffectParams{})) == to_rgb8(img), "identity round trip");

  SensorEffectParams exp;
  exp.exposure_on = true;
  exp.exposure_stops = 1.0;
  const auto bright = to_rgb8(apply_sensor_effects(ImageBuffer(32, 32, 0.25), exp));
  ck.expect(std::all_of(bright.begin(), bright.end(), [](std::uint8_t b) { return b == quantize(0.5); }),
            "exposure +1 stop");

  SensorEffectParams noise;
  noise.noise_on = true;
  noise.noise_sigma = 0.02;
  noise.seed = 20260;
  const auto noisy = apply_sensor_effects(ImageBuffer(256, 256, 0.5), noise);
  double s = 0.0, s2 = 0.0;
  for (double v : noisy.data()) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(noisy.size());
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  ck.expect(std::abs(sd - 0.02) <= 0.1 * 0.02, "noise std " + fmt(sd, 5));
  return {ck.ok(), "noise std=" + fmt(sd, 5) + (ck.ok() ? "" : " [" + ck.summary() + "]")};
}

// 9 ------------------------------------------------------------------------
Outcome mask_annotation() {
  const Rgb8 shooter{200, 10, 10}, gun{10, 200, 10}, civ{10, 10, 200};
  const ColorMap map({{{0, 0, 0}, ObjectClass::Background, 0},
                      {shooter, ObjectClass::Shooter, 1},
                      {gun, ObjectClass::Gun, 2},
                      {civ, ObjectClass::Civilian, 3}});
  Check ck;

  Rng rng(909);
  for (int k = 0; k < 30; ++k) {
    ImageBuffer m(80, 60, 0.0);
    const int w = 1 + static_cast<int>(rng.uniform(0, 40)), h = 1 + static_cast<int>(rng.uniform(0, 40));
    const int x = static_cast<int>(rng.uniform(0, 80 - w)), y = static_cast<int>(rng.uniform(0, 60 - h));
    fixture::paint(m, x, y, w, h, shooter);
    const auto boxes = extract_boxes(m, map, 1);
    ck.expect(boxes.size() == 1 && boxes[0].box == BBox{double(x), double(y), double(w), double(h)},
              "rectangle " + std::to_string(k));
  }

  ImageBuffer small(40, 40, 0.0);
  fixture::paint(small, 2, 2, 4, 4, gun);
  fixture::paint(small, 10, 10, 12, 20, shooter);
  const auto kept = extract_boxes(small, map, 8);
  ck.expect(kept.size() == 1 && kept[0].cls == ObjectClass::Shooter, "min_side filter");

  for (int k = 0; k < 20; ++k) {
    Rng g(derive_seed(4242, k));
    ImageBuffer m(64, 48, 0.0);
    for (const Rgb8& c : {shooter, gun, civ}) {
      const int w = 3 + static_cast<int>(g.uniform(0, 20)), h = 3 + static_cast<int>(g.uniform(0, 20));
      fixture::paint(m, static_cast<int>(g.uniform(0, 64 - w)), static_cast<int>(g.uniform(0, 48 - h)), w, h, c);
    }
    const auto res = recolor_mask(m, map, g);
    ck.expect(extract_boxes(res.image, res.map, 1) == extract_boxes(m, map, 1), "recolor mask " + std::to_string(k));
  }
  return {ck.ok(), "30 rectangles exact, 20 recolored masks" + (ck.ok() ? std::string() : " [" + ck.summary() + "]")};
}

// 10 -----------------------------------------------------------------------
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  if (!fs::exists(root)) return files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = clitest::slurp(e.path());
  return files;
}

// Drops wall-clock columns from bench output, keeping its structure.
std::string bench_shape(const std::string& out) {
  std::istringstream in(out);
  std::string line, shape;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const std::string key = line.substr(0, comma);
    shape += (key == "frames" || key.rfind("stage", 0) == 0 || line[0] == '#') ? line : key;
    shape += '\n';
  }
  return shape;
}

Outcome determinism() {
  clitest::TempDir tmp("accept-det");
  const fs::path root = tmp.path();
  const std::string dets = (fixture::data_dir() / "occlusion_dets.csv").string();
  const std::string gt = (fixture::data_dir() / "occlusion_gt.csv").string();

  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  Rng g(1234);
  for (int k = 0; k < 3; ++k) {
    ImageBuffer img(40, 30);
    for (double& v : img.data()) v = g.uniform01();
    write_png(root / "images" / ("img" + std::to_string(k) + ".png"), img);
    ImageBuffer m(40, 30, 0.0);
    fixture::paint(m, 3 + k, 4, 10, 12, {200, 10, 10});
    fixture::paint(m, 20, 10 + k, 9, 9, {10, 200, 10});
    write_png(root / "masks" / ("m" + std::to_string(k) + ".png"), m);
  }
  clitest::spit(root / "map.csv", "color_hex,class,object_id\n000000,background,0\nc80a0a,shooter,1\n0ac80a,gun,2\n");

  struct Cmd {
    std::string name;
    std::function<std::vector<std::string>(const fs::path&)> args;
  };
  const std::vector<Cmd> cmds{
      {"track", [&](const fs::path& o) { return std::vector<std::string>{"track", "--dets", dets, "--out", (o / "t.csv").string()}; }},
      {"eval", [&](const fs::path& o) {
         return std::vector<std::string>{"eval", "--gt", gt, "--tracks", (root / "ref_tracks.csv").string(), "--out", (o / "r.csv").string()};
       }},
      {"sweep", [&](const fs::path& o) {
         return std::vector<std::string>{"sweep", "--dets", dets, "--gt", gt, "--jobs", "3", "--out", (o / "s.csv").string()};
       }},
      {"sysmetric", [&](const fs::path& o) {
         return std::vector<std::string>{"sysmetric", "--gt", gt, "--tracks", (root / "ref_tracks.csv").string(), "--out", (o / "w.csv").string()};
       }},
      {"augment", [&](const fs::path& o) {
         return std::vector<std::string>{"augment", "--in", (root / "images").string(), "--out", (o / "aug").string(), "--seed", "77", "--jobs", "2"};
       }},
      {"recolor", [&](const fs::path& o) {
         return std::vector<std::string>{"recolor", "--in", (root / "masks").string(), "--out", (o / "rec").string(), "--map",
                                         (root / "map.csv").string(), "--seed", "5", "--jobs", "2"};
       }},
      {"annotate", [&](const fs::path& o) {
         return std::vector<std::string>{"annotate", "--in", (root / "masks").string(), "--map", (root / "map.csv").string(), "--out",
                                         (o / "a.csv").string()};
       }},
  };

  Check ck;
  ck.expect(clitest::run({"track", "--dets", dets, "--out", (root / "ref_tracks.csv").string()}).code == 0, "reference track");
  for (const auto& c : cmds) {
    std::map<std::string, std::string> runs[2];
    std::string stdout_runs[2];
    for (int r = 0; r < 2; ++r) {
      const fs::path o = root / (c.name + "_" + std::to_string(r));
      fs::create_directories(o);
      const auto res = clitest::run(c.args(o));
      ck.expect(res.code == 0, c.name + " exit " + std::to_string(res.code) + " " + res.err);
      runs[r] = snapshot(o);
      stdout_runs[r] = res.out;
    }
    ck.expect(!runs[0].empty(), c.name + " wrote nothing");
    ck.expect(runs[0] == runs[1] && stdout_runs[0] == stdout_runs[1], c.name + " differs");
  }
  const auto b0 = clitest::run({"bench", "--dets", dets, "--repeat", "1"});
  const auto b1 = clitest::run({"bench", "--dets", dets, "--repeat", "1"});
  ck.expect(b0.code == 0 && bench_shape(b0.out) == bench_shape(b1.out), "bench structure differs");
  return {ck.ok(), std::to_string(cmds.size()) + " file-writing commands byte-identical, bench layout stable" +
                       (ck.ok() ? "" : " [" + ck.summary() + "]")};
}

// 11 -----------------------------------------------------------------------
std::vector<Detection> throughput_scene(int frames) {
  // 10 confirmed walkers plus 10 gunless distractor boxes per frame.
  std::mt19937_64 rng(1111);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Detection> d;
  for (int f = 0; f < frames; ++f) {
    for (int k = 0; k < 10; ++k) {
      const BBox b{60.0 + 150.0 * k + 20.0 * std::sin(0.05 * f + k), 100.0 + 40.0 * (k % 3), 40, 80};
      d.push_back(fixture::shooter(f, b.translated(u(rng) - 0.5, u(rng) - 0.5), 0.9));
    }
    for (int k = 0; k < 9; ++k)
      d.push_back(fixture::shooter(f, {1800.0 * u(rng), 600 + 300 * u(rng), 30, 60}, 0.65));
    if (f == 0)
      for (int k = 0; k < 10; ++k) d.push_back(fixture::gun(f, {80.0 + 150.0 * k + 20.0 * std::sin(k), 130.0 + 40.0 * (k % 3), 12, 8}, 0.95));
    else
      d.push_back(fixture::gun(f, {1900, 1000, 12, 8}, 0.95));
  }
  return d;
}

Outcome throughput() {
  const int frames = 1000;
  const auto dets = throughput_scene(frames);
  std::vector<std::vector<Detection>> by_frame(frames);
  for (const auto& d : dets) by_frame[d.frame].push_back(d);

  Tracker tracker{TrackerConfig{}};
  std::vector<double> ms;
  std::size_t live = 0;
  for (int f = 0; f < frames; ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    tracker.step(f, by_frame[f]);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    live += tracker.tracks().size();
  }
  double mean = 0.0;
  for (double v : ms) mean += v;
  mean /= frames;
  std::size_t per_frame = 0;
  for (const auto& f : by_frame) per_frame += f.size();

  Check ck;
  ck.expect(mean <= 10.0, "mean " + fmt(mean) + " ms");
  const double avg_live = static_cast<double>(live) / frames;
  ck.expect(avg_live >= 9.5 && avg_live <= 10.5, "live tracks " + fmt(avg_live, 2));

  clitest::TempDir tmp("accept-bench");
  {
    std::ofstream f(tmp / "d.csv");
    write_detections(f, dets);
  }
  const auto b = clitest::run({"bench", "--dets", tmp / "d.csv", "--repeat", "1"});
  ck.expect(b.code == 0, "bench exit " + std::to_string(b.code));
  ck.expect(b.out.find("stage,mean_ms,p50_ms,p95_ms") != std::string::npos && b.out.find("\ntotal,") != std::string::npos,
            "bench lacks mean/p95");
  return {ck.ok(), "mean " + fmt(mean, 3) + " ms/frame, " + fmt(static_cast<double>(per_frame) / frames, 1) +
                       " dets/frame, " + fmt(avg_live, 2) + " live tracks" + (ck.ok() ? "" : " [" + ck.summary() + "]")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric arithmetic at the published operating point", metric_arithmetic},
      {"assignment equals exhaustive permutation minimum", assignment_oracle},
      {"observation re-update equals reference recursion", oru_equivalence},
      {"recovery bridges a 10-frame occlusion", ocr_fixture},
      {"gun confirmation gates initialization", gun_confirmation},
      {"identity metrics equal exhaustive pairing", identity_oracle},
      {"windowed metric properties", windowed_properties},
      {"sensor effect augmentation", augmentation},
      {"mask annotation", mask_annotation},
      {"CLI determinism", determinism},
      {"tracking throughput", throughput},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (k + 1 < 10 ? " " : "") << k + 1 << ". " << criteria[k].first
              << " -- " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
