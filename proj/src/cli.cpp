#include "dualfluoro/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <ostream>
#include <random>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "dualfluoro/calibration.hpp"
#include "dualfluoro/dataset.hpp"
#include "dualfluoro/drr.hpp"
#include "dualfluoro/errors.hpp"
#include "dualfluoro/metrics.hpp"
#include "dualfluoro/phantom.hpp"
#include "dualfluoro/registration.hpp"
#include "dualfluoro/system_io.hpp"
#include "dualfluoro/text_io.hpp"

namespace dualfluoro::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Config access

struct RunConfig {
  json doc;
  fs::path dir;  // relative paths resolve against the config file's directory
  fs::path output_dir;
  std::string hash;
  std::uint64_t seed = 0;

  std::vector<std::string> stamp() const { return {"config_hash " + hash, fmt::format("seed {}", seed)}; }

  const json& at(const json& node, const std::string& key) const {
    if (!node.is_object() || !node.contains(key)) throw Error(ErrorCode::Parse, fmt::format("config: missing '{}'", key));
    return node.at(key);
  }
  const json& at(const std::string& key) const { return at(doc, key); }

  fs::path path(const json& node, const std::string& key) const {
    const json& v = at(node, key);
    if (!v.is_string()) throw Error(ErrorCode::Parse, fmt::format("config: '{}' must be a path string", key));
    const fs::path p = v.get<std::string>();
    return p.is_absolute() ? p : dir / p;
  }
  fs::path path(const std::string& key) const { return path(doc, key); }
  bool has(const std::string& key) const { return doc.contains(key); }
};

template <typename T>
T get(const json& node, const std::string& key, const T& fallback) {
  if (!node.is_object() || !node.contains(key)) return fallback;
  try {
    return node.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, fmt::format("config: '{}': {}", key, e.what()));
  }
}

Vec3 vec3_of(const json& node, const std::string& key, const Vec3& fallback) {
  const auto v = get<std::vector<double>>(node, key, {fallback.x(), fallback.y(), fallback.z()});
  if (v.size() != 3) throw Error(ErrorCode::Parse, fmt::format("config: '{}' needs 3 values", key));
  return {v[0], v[1], v[2]};
}

RigidPose pose_of(const json& node) {
  return RigidPose{vec3_of(node, "theta", Vec3::Zero()), vec3_of(node, "tau", Vec3::Zero())};
}

RenderParams render_params_of(const json& node) {
  RenderParams p;
  p.width = get<int>(node, "width", 128);
  p.height = get<int>(node, "height", 128);
  p.scale = get<double>(node, "scale", 1.0);
  const auto window = get<std::vector<double>>(node, "window", {0.0, 1.0});
  if (window.size() != 2) throw Error(ErrorCode::Parse, "config: 'window' needs [lo, hi]");
  p.window_lo = window[0];
  p.window_hi = window[1];
  if (node.contains("view")) p.view = pose_of(node.at("view"));
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, std::string("config: ") + e.what());
  }
  return p;
}

RunConfig load_config(const fs::path& config_path, const std::string& output_override) {
  RunConfig cfg;
  const std::string bytes = text::read_file(config_path);
  try {
    cfg.doc = json::parse(bytes);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, fmt::format("{}: {}", config_path.string(), e.what()));
  }
  if (!cfg.doc.is_object()) throw Error(ErrorCode::Parse, "config must be a JSON object");
  cfg.dir = config_path.parent_path();
  cfg.hash = text::hex64(text::fnv1a64(bytes));
  cfg.seed = get<std::uint64_t>(cfg.doc, "seed", 0);
  cfg.output_dir = output_override.empty() ? cfg.path("output_dir") : fs::path(output_override);
  return cfg;
}

ordered_json pose_json(const RigidPose& p) {
  return {{"theta", {p.theta.x(), p.theta.y(), p.theta.z()}}, {"tau", {p.tau.x(), p.tau.y(), p.tau.z()}}};
}

ordered_json stamped(const RunConfig& cfg) {
  ordered_json j;
  j["config_hash"] = cfg.hash;
  j["seed"] = cfg.seed;
  return j;
}

std::string with_comments(const std::vector<std::string>& comments, const std::string& body) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  return out + body;
}

// ---------------------------------------------------------------------------
// render

int cmd_render(const RunConfig& cfg, std::ostream& out) {
  const CtVolume volume = load_volume(cfg.path("volume"));
  std::optional<LandmarkSet3D> landmarks;
  if (cfg.has("landmarks")) landmarks = load_landmark_set(cfg.path("landmarks"));
  const RenderParams params = render_params_of(cfg.at("render"));

  const Drr drr = landmarks ? render_drr(volume, *landmarks, params) : render_drr(volume, params);

  fs::create_directories(cfg.output_dir);
  write_pgm(cfg.output_dir / "drr.pgm", drr.image, cfg.stamp());
  if (drr.mask) {
    Image gray = *drr.mask;
    for (double& v : gray.pixels()) v *= 255.0;
    write_pgm(cfg.output_dir / "mask.pgm", gray, cfg.stamp());
  }
  if (landmarks) text::write_file(cfg.output_dir / "landmarks.txt", format_landmarks_2d(drr.landmarks2d, cfg.stamp()));
  out << fmt::format("rendered {}x{} DRR to {}\n", params.width, params.height, cfg.output_dir.string());
  return kSuccess;
}

// ---------------------------------------------------------------------------
// forge

Range range_of(const json& node, const Range& fallback) {
  const auto v = node.get<std::vector<double>>();
  if (v.size() != 2) throw Error(ErrorCode::Parse, "config: ranges are [lo, hi]");
  (void)fallback;
  return {v[0], v[1]};
}

int cmd_forge(const RunConfig& cfg, std::ostream& out) {
  const CtVolume volume = load_volume(cfg.path("volume"));
  const LandmarkSet3D landmarks = load_landmark_set(cfg.path("landmarks"));
  const RenderParams base = render_params_of(cfg.at("render"));
  SampleSpec spec;
  spec.seed = cfg.seed;
  if (cfg.has("sampling")) {
    const json& s = cfg.at("sampling");
    try {
      for (const char* key : {"rotation_deg", "translation_mm"}) {
        if (!s.contains(key)) continue;
        auto& dst = std::string(key) == "rotation_deg" ? spec.rotation_deg : spec.translation_mm;
        const json& arr = s.at(key);
        if (!arr.is_array() || arr.size() != 3) throw Error(ErrorCode::Parse, fmt::format("config: '{}' needs 3 ranges", key));
        for (std::size_t a = 0; a < 3; ++a) dst[a] = range_of(arr.at(a), dst[a]);
      }
      if (s.contains("scale")) spec.scale = range_of(s.at("scale"), spec.scale);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, std::string("config: sampling: ") + e.what());
    }
  }
  spec.segmented_fraction = get<double>(cfg.doc, "segmented_fraction", 0.0);
  const int n = get<int>(cfg.doc, "count", 1);
  const int test_count = get<int>(cfg.doc, "test_count", 0);
  try {
    spec.validate();
    plan_dataset(n, test_count, spec.segmented_fraction, spec.seed);
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, std::string("config: ") + e.what());
  }
  const auto manifest = generate_dataset(volume, landmarks, base, spec, n, test_count, cfg.output_dir, cfg.hash);
  out << fmt::format("forged {} samples ({} train / {} test, {} segmented) in {}\n", manifest.samples.size(),
                     manifest.train_count, manifest.test_count, manifest.segmented_count, cfg.output_dir.string());
  return kSuccess;
}

// ---------------------------------------------------------------------------
// calib-distortion

int cmd_calib_distortion(const RunConfig& cfg, std::ostream& out) {
  const std::vector<Vec2> ideal = parse_bead_table(text::read_file(cfg.path("ideal_beads")));
  std::vector<Vec2> observed;
  if (cfg.has("observed_beads")) {
    observed = parse_bead_table(text::read_file(cfg.path("observed_beads")));
  } else {
    // Detect beads on a plate image; pixel coordinates are converted to mm
    // about the image center with the declared pixel pitch.
    const Image plate = read_pgm(cfg.path("image"));
    const double pitch = get<double>(cfg.doc, "pixel_pitch", 0.0);
    if (!(pitch > 0.0)) throw Error(ErrorCode::Parse, "config: image input needs a positive 'pixel_pitch'");
    BeadDetectionOptions opt;
    if (cfg.has("detection")) {
      const json& d = cfg.at("detection");
      opt.threshold = get<double>(d, "threshold", opt.threshold);
      opt.min_area = get<int>(d, "min_area", opt.min_area);
      opt.max_area = get<int>(d, "max_area", opt.max_area);
      opt.dark_beads = get<bool>(d, "dark_beads", opt.dark_beads);
    }
    const Vec2 center(0.5 * (plate.width() + 1), 0.5 * (plate.height() + 1));
    std::vector<Vec2> ideal_px;
    for (const auto& p : ideal) ideal_px.push_back(p / pitch + center);
    for (const auto& px : detect_beads(plate, opt, ideal_px)) observed.push_back((px - center) * pitch);
  }
  const DistortionModel model = fit_distortion(BeadGrid{ideal, observed});
  const std::string name = get<std::string>(cfg.doc, "model_name", "distortion.txt");

  fs::create_directories(cfg.output_dir);
  text::write_file(cfg.output_dir / name, format_distortion_model(model, cfg.stamp()));
  ordered_json report = stamped(cfg);
  report["beads"] = ideal.size();
  report["rms_residual_mm"] = model.rms_residual();
  text::write_file(cfg.output_dir / "distortion_report.json", report.dump(2) + "\n");
  out << fmt::format("fitted distortion model on {} beads, RMS residual {:.3g} mm\n", ideal.size(), model.rms_residual());
  return kSuccess;
}

// ---------------------------------------------------------------------------
// calib-pose

int cmd_calib_pose(const RunConfig& cfg, std::ostream& out) {
  const DualFluoroSystem initial = load_system(cfg.path("system"));
  const ToolFile tool = parse_tool_file(text::read_file(cfg.path("tool")));
  const DualPoseCalibration cal = calibrate_dual_pose(tool.tool, initial, tool.tool_init);

  fs::create_directories(cfg.output_dir);
  text::write_file(cfg.output_dir / "system_calibrated.txt", with_comments(cfg.stamp(), format_system(cal.system)));
  ordered_json report = stamped(cfg);
  report["f2_pose"] = pose_json(cal.f2_pose);
  report["tool_pose"] = pose_json(cal.tool_pose);
  report["rms_mm"] = cal.rms_mm;
  report["bead_residuals_mm"] = {{"f1", cal.bead_residuals[0]}, {"f2", cal.bead_residuals[1]}};
  report["iterations"] = cal.iterations;
  report["converged"] = cal.converged;
  text::write_file(cfg.output_dir / "calibration_report.json", report.dump(2) + "\n");
  out << fmt::format("calibrated F2 pose, reprojection RMS {:.3g} mm\n", cal.rms_mm);
  return kSuccess;
}

// ---------------------------------------------------------------------------
// register

struct FrameOutcome {
  std::string name;
  std::string scenario;
  bool ok = false;
  std::string error;
  RegistrationResult result;
  std::optional<RigidPose> ground_truth;
};

PredictedLandmarks load_predictions(const RunConfig& cfg, const json& frame, const LandmarkSet3D& landmarks,
                                    const DualFluoroSystem& system) {
  const std::string units = get<std::string>(frame, "units", "mm");
  if (units != "mm" && units != "px") throw Error(ErrorCode::Parse, "config: frame 'units' must be 'mm' or 'px'");
  PredictedLandmarks pred;
  for (int v = 0; v < 2; ++v) {
    const std::string key = v == 0 ? "f1" : "f2";
    auto entries = parse_prediction_view(text::read_file(cfg.path(frame, key)), landmarks.size());
    const FluoroscopeGeometry& geom = system.view(v);
    if (units == "px")
      for (auto& e : entries) e.uv = geom.pixel_to_mm(e.uv);
    if (frame.contains(key + "_distortion")) {
      const DistortionModel model = parse_distortion_model(text::read_file(cfg.path(frame, key + "_distortion")));
      for (auto& e : entries) e.uv = model.apply(e.uv);
    }
    pred.views[static_cast<std::size_t>(v)] = std::move(entries);
  }
  return pred;
}

ColorImage overlay(const FrameOutcome& f, int view, const RunConfig& cfg, const json& frame, const LandmarkSet3D& landmarks,
                   const DualFluoroSystem& system, const PredictedLandmarks& pred) {
  const FluoroscopeGeometry& geom = system.view(view);
  const std::string key = view == 0 ? "f1_image" : "f2_image";
  ColorImage img = frame.contains(key) ? ColorImage::from_gray(read_pgm(cfg.path(frame, key)))
                                       : ColorImage(geom.image_width(), geom.image_height());
  constexpr Rgb kModel{40, 90, 255}, kManual{255, 220, 0}, kPredicted{255, 40, 40};
  auto projected = [&](const RigidPose& pose, int i) -> std::optional<Vec2> {
    try {
      return geom.mm_to_pixel(project_point(geom, pose.apply(landmarks.point(i))).uv);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  for (int i = 0; i < landmarks.size(); ++i) {
    if (auto px = projected(f.result.pose, i)) draw_circle(img, px->x(), px->y(), 5.0, kModel);
    if (f.ground_truth)
      if (auto px = projected(*f.ground_truth, i)) draw_square(img, px->x(), px->y(), 3, kManual);
    const auto& e = pred.views[static_cast<std::size_t>(view)][static_cast<std::size_t>(i)];
    if (e.visible) {
      const Vec2 px = geom.mm_to_pixel(e.uv);
      draw_cross(img, px.x(), px.y(), 3, kPredicted);
    }
  }
  return img;
}

ordered_json frame_json(const FrameOutcome& f) {
  ordered_json j;
  j["name"] = f.name;
  j["scenario"] = f.scenario;
  j["status"] = f.ok ? "ok" : "failed";
  if (!f.ok) {
    j["error"] = f.error;
    return j;
  }
  const auto& r = f.result;
  j["pose"] = pose_json(r.pose);
  j["variant"] = std::string(to_string(r.variant));
  j["mu_mm"] = r.objective_value;
  j["n_vis"] = r.n_vis;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  ordered_json variants = ordered_json::array();
  for (const auto& v : r.variants)
    variants.push_back({{"variant", std::string(to_string(v.variant))},
                        {"mu_mm", v.optimum.value},
                        {"converged", v.optimum.converged}});
  j["variants"] = variants;
  for (int v = 0; v < 2; ++v) {
    ordered_json res = ordered_json::array();
    for (const auto& lr : r.residuals[static_cast<std::size_t>(v)]) res.push_back({{"index", lr.index + 1}, {"mm", lr.distance_mm}});
    j[v == 0 ? "residuals_f1" : "residuals_f2"] = res;
  }
  if (f.ground_truth) {
    const DofErrors e = dof_errors(*f.ground_truth, r.pose);
    j["ground_truth"] = pose_json(*f.ground_truth);
    j["eps_theta_deg"] = e.eps_theta;
    j["eps_tau_mm"] = e.eps_tau;
  }
  return j;
}

struct ErrorRow {
  std::string name;
  std::string scenario;
  DofErrors e;
};

/// Per-frame table plus mean +- SD per scenario.
std::string error_report(const std::vector<ErrorRow>& rows) {
  std::string out = fmt::format("{:<16} {:<12} {:>14} {:>12}\n", "frame", "scenario", "eps_theta_deg", "eps_tau_mm");
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by;
  for (const auto& r : rows) {
    out += fmt::format("{:<16} {:<12} {:>14.6f} {:>12.6f}\n", r.name, r.scenario, r.e.eps_theta, r.e.eps_tau);
    by[r.scenario].first.push_back(r.e.eps_theta);
    by[r.scenario].second.push_back(r.e.eps_tau);
  }
  for (const auto& [scenario, v] : by) {
    const MeanSd t = mean_sd(v.first), p = mean_sd(v.second);
    out += fmt::format("scenario {}: eps_theta {:.6f} +- {:.6f} deg, eps_tau {:.6f} +- {:.6f} mm (n={})\n", scenario, t.mean,
                       t.sd, p.mean, p.sd, t.n);
  }
  return out;
}

int cmd_register(const RunConfig& cfg, std::ostream& out) {
  const LandmarkSet3D landmarks = load_landmark_set(cfg.path("landmarks"));
  const DualFluoroSystem system = load_system(cfg.path("system"));
  const json& frames = cfg.at("frames");
  if (!frames.is_array()) throw Error(ErrorCode::Parse, "config: 'frames' must be an array");
  const bool overlays = get<bool>(cfg.doc, "overlays", false);

  std::vector<FrameOutcome> outcomes;
  std::vector<std::pair<std::string, ColorImage>> overlay_images;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json& frame = frames[i];
    FrameOutcome f;
    f.name = get<std::string>(frame, "name", fmt::format("frame_{:03d}", i + 1));
    f.scenario = get<std::string>(frame, "scenario", "default");
    try {
      const PredictedLandmarks pred = load_predictions(cfg, frame, landmarks, system);
      if (frame.contains("ground_truth")) f.ground_truth = load_pose(cfg.path(frame, "ground_truth"));
      f.result = register_pose(landmarks, pred, system);
      f.ok = true;
      if (overlays)
        for (int v = 0; v < 2; ++v)
          overlay_images.emplace_back(fmt::format("{}_f{}.ppm", f.name, v + 1), overlay(f, v, cfg, frame, landmarks, system, pred));
    } catch (const Error& e) {
      f.error = e.what();
    }
    outcomes.push_back(std::move(f));
  }

  ordered_json doc = stamped(cfg);
  ordered_json records = ordered_json::array();
  std::vector<ErrorRow> error_rows;
  std::string table = fmt::format("{:<16} {:<12} {:<8} {:<14} {:>14} {:>6}\n", "frame", "scenario", "status", "variant", "mu_mm", "n_vis");
  std::vector<std::string> failures;
  for (const auto& f : outcomes) {
    records.push_back(frame_json(f));
    if (f.ok) {
      table += fmt::format("{:<16} {:<12} {:<8} {:<14} {:>14.6g} {:>6}\n", f.name, f.scenario, "ok", to_string(f.result.variant),
                           f.result.objective_value, f.result.n_vis);
      if (f.ground_truth) error_rows.push_back({f.name, f.scenario, dof_errors(*f.ground_truth, f.result.pose)});
    } else {
      table += fmt::format("{:<16} {:<12} {:<8}\n", f.name, f.scenario, "failed");
      failures.push_back(f.name + ": " + f.error);
    }
  }
  doc["frames"] = records;
  doc["failures"] = failures;
  std::string summary = with_comments(cfg.stamp(), table);
  if (!error_rows.empty()) summary += "\n" + error_report(error_rows);
  summary += fmt::format("\n{} of {} frames registered\n", outcomes.size() - failures.size(), outcomes.size());
  for (const auto& msg : failures) summary += "failed " + msg + "\n";

  fs::create_directories(cfg.output_dir);
  text::write_file(cfg.output_dir / "results.json", doc.dump(2) + "\n");
  text::write_file(cfg.output_dir / "summary.txt", summary);
  if (overlays) {
    fs::create_directories(cfg.output_dir / "overlays");
    for (const auto& [name, img] : overlay_images) write_ppm(cfg.output_dir / "overlays" / name, img, cfg.stamp());
  }
  out << fmt::format("registered {} of {} frames\n", outcomes.size() - failures.size(), outcomes.size());
  return kSuccess;
}

// ---------------------------------------------------------------------------
// evaluate

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  json results;
  try {
    results = json::parse(text::read_file(cfg.path("results")));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("results: ") + e.what());
  }
  std::map<std::string, std::pair<fs::path, std::string>> truth;
  const json& gt = cfg.at("ground_truth");
  if (!gt.is_array()) throw Error(ErrorCode::Parse, "config: 'ground_truth' must be an array");
  for (const json& g : gt) truth[get<std::string>(g, "name", "")] = {cfg.path(g, "pose"), get<std::string>(g, "scenario", "")};

  std::vector<ErrorRow> rows;
  ordered_json frames = ordered_json::array();
  std::vector<std::string> skipped;
  for (const json& rec : results.at("frames")) {
    const std::string name = rec.at("name").get<std::string>();
    auto it = truth.find(name);
    if (it == truth.end() || rec.at("status") != "ok") {
      skipped.push_back(name);
      continue;
    }
    const json& p = rec.at("pose");
    const RigidPose pose{Vec3(p.at("theta")[0], p.at("theta")[1], p.at("theta")[2]), Vec3(p.at("tau")[0], p.at("tau")[1], p.at("tau")[2])};
    const DofErrors e = dof_errors(load_pose(it->second.first), pose);
    const std::string scenario = it->second.second.empty() ? rec.value("scenario", std::string("default")) : it->second.second;
    rows.push_back({name, scenario, e});
    frames.push_back({{"name", name}, {"scenario", scenario}, {"eps_theta_deg", e.eps_theta}, {"eps_tau_mm", e.eps_tau}});
  }
  ordered_json doc = stamped(cfg);
  doc["frames"] = frames;
  doc["skipped"] = skipped;
  fs::create_directories(cfg.output_dir);
  text::write_file(cfg.output_dir / "evaluation.json", doc.dump(2) + "\n");
  text::write_file(cfg.output_dir / "evaluation.txt", with_comments(cfg.stamp(), error_report(rows)));
  out << fmt::format("evaluated {} frames ({} skipped)\n", rows.size(), skipped.size());
  return kSuccess;
}

// ---------------------------------------------------------------------------
// phantom: writes a self-contained synthetic input set and matching configs

int cmd_phantom(const fs::path& dir, int frames, std::uint64_t seed, double noise_mm, std::ostream& out) {
  const CtVolume volume = phantom::skull_shell();
  const LandmarkSet3D landmarks = phantom::skull_landmarks();
  const DualFluoroSystem system = phantom::dual_system();
  const std::vector<std::string> stamp{fmt::format("synthetic phantom, seed {}", seed)};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-20.0, 20.0), shift(-15.0, 15.0);
  std::normal_distribution<double> noise(0.0, noise_mm);

  fs::create_directories(dir / "frames");
  save_volume(dir / "volume.hdr", volume, 1e-3);
  text::write_file(dir / "landmarks.txt", format_landmark_set(landmarks));
  text::write_file(dir / "system.txt", with_comments(stamp, format_system(system)));

  ordered_json reg;
  reg["seed"] = seed;
  reg["landmarks"] = "landmarks.txt";
  reg["system"] = "system.txt";
  reg["output_dir"] = "out/register";
  reg["overlays"] = true;
  ordered_json eval;
  eval["seed"] = seed;
  eval["results"] = "out/register/results.json";
  eval["output_dir"] = "out/evaluate";
  ordered_json frame_list = ordered_json::array(), truth_list = ordered_json::array();
  for (int i = 0; i < frames; ++i) {
    RigidPose pose;
    PredictedLandmarks pred;
    do {
      pose.theta = Vec3(angle(rng), angle(rng), angle(rng));
      pose.tau = phantom::subject_center() + Vec3(shift(rng), shift(rng), shift(rng));
      pred = synthesize_predictions(landmarks, pose, system);
    } while (static_cast<int>(common_visible(pred, system).size()) < landmarks.size());
    if (noise_mm > 0.0)
      for (auto& view : pred.views)
        for (auto& e : view) e.uv += Vec2(noise(rng), noise(rng));
    const std::string name = fmt::format("frame_{:02d}", i + 1);
    text::write_file(dir / "frames" / (name + "_f1.txt"), format_prediction_view(pred.views[0], stamp));
    text::write_file(dir / "frames" / (name + "_f2.txt"), format_prediction_view(pred.views[1], stamp));
    text::write_file(dir / "frames" / (name + "_truth.txt"), with_comments(stamp, format_pose(pose)));
    frame_list.push_back({{"name", name},
                          {"scenario", "synthetic"},
                          {"f1", "frames/" + name + "_f1.txt"},
                          {"f2", "frames/" + name + "_f2.txt"},
                          {"ground_truth", "frames/" + name + "_truth.txt"}});
    truth_list.push_back({{"name", name}, {"scenario", "synthetic"}, {"pose", "frames/" + name + "_truth.txt"}});
  }
  reg["frames"] = frame_list;
  eval["ground_truth"] = truth_list;
  text::write_file(dir / "register.json", reg.dump(2) + "\n");
  text::write_file(dir / "evaluate.json", eval.dump(2) + "\n");

  ordered_json render;
  render["seed"] = seed;
  render["volume"] = "volume.hdr";
  render["landmarks"] = "landmarks.txt";
  render["output_dir"] = "out/render";
  render["render"] = {{"width", 128}, {"height", 128}, {"scale", 2.0}, {"window", {0.0, 60.0}},
                      {"view", {{"theta", {-90.0, 0.0, 0.0}}, {"tau", {0.0, 0.0, 0.0}}}}};
  text::write_file(dir / "render.json", render.dump(2) + "\n");
  ordered_json forge = render;
  forge["output_dir"] = "out/forge";
  forge["count"] = 20;
  forge["test_count"] = 2;
  forge["segmented_fraction"] = 2139.0 / 9751.0;
  forge["sampling"] = {{"rotation_deg", {{-30, 30}, {-30, 30}, {-30, 30}}},
                       {"translation_mm", {{-20, 20}, {-20, 20}, {0, 0}}},
                       {"scale", {0.8, 1.2}}};
  text::write_file(dir / "forge.json", forge.dump(2) + "\n");

  // Distortion plate: ideal lattice and its distorted observation.
  const auto ideal = phantom::bead_plate(20, 14.0);
  std::vector<Vec2> observed;
  for (const auto& p : ideal) observed.push_back(phantom::distort(p));
  text::write_file(dir / "beads_ideal.txt", format_bead_table(ideal, stamp));
  text::write_file(dir / "beads_observed.txt", format_bead_table(observed, stamp));
  ordered_json cd;
  cd["seed"] = seed;
  cd["ideal_beads"] = "beads_ideal.txt";
  cd["observed_beads"] = "beads_observed.txt";
  cd["output_dir"] = "out/calib";
  cd["model_name"] = "f1_distortion.txt";
  text::write_file(dir / "calib_distortion.json", cd.dump(2) + "\n");

  // Alignment tool seen by the true system; the guess has F2 perturbed.
  ToolFile tool;
  tool.tool.beads = phantom::alignment_tool_beads();
  const RigidPose tool_pose{Vec3(10, -5, 15), phantom::subject_center() + Vec3(-20, 10, 5)};
  tool.tool.observed = project_tool(tool.tool.beads, tool_pose, system);
  text::write_file(dir / "tool.txt", with_comments(stamp, format_tool_file(tool)));
  const Mat3 r = rotation_from_euler_deg(Vec3(0, 6, 4));
  const Vec3 c0 = system.f2().intensifier_center();
  const DualFluoroSystem guess(system.f1(), system.f2().transformed(r, c0 - r * c0 + Vec3(30, -20, 25)));
  text::write_file(dir / "system_guess.txt", with_comments(stamp, format_system(guess)));
  ordered_json cp;
  cp["seed"] = seed;
  cp["system"] = "system_guess.txt";
  cp["tool"] = "tool.txt";
  cp["output_dir"] = "out/calib";
  text::write_file(dir / "calib_pose.json", cp.dump(2) + "\n");

  out << fmt::format("wrote phantom inputs and configs for {} frames to {}\n", frames, dir.string());
  return kSuccess;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonConvergence:
    case ErrorCode::RankDeficient:
    case ErrorCode::DegenerateRay:
      return kNumericalFailure;
    default:
      return kDataError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Virtual dual-fluoroscope toolkit: DRR rendering, dataset forging, calibration and landmark registration"};
  app.require_subcommand(1);
  std::string config_path, output_dir;
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&, std::ostream&);
  };
  const std::vector<Command> commands{
      {"render", "Render a DRR, its skull mask and projected landmarks", cmd_render},
      {"forge", "Generate a randomized DRR-landmark dataset", cmd_forge},
      {"calib-distortion", "Fit a degree-5 distortion correction from a bead plate", cmd_calib_distortion},
      {"calib-pose", "Calibrate the F2 pose from the 4-bead alignment tool", cmd_calib_pose},
      {"register", "Register the landmark model to predicted landmarks, frame by frame", cmd_register},
      {"evaluate", "Angular/position errors against ground-truth poses", cmd_evaluate},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("-c,--config", config_path, "JSON config file")->required();
    sub->add_option("-o,--output", output_dir, "Output directory (overrides output_dir)");
    subs.push_back(sub);
  }
  std::string phantom_dir;
  int phantom_frames = 12;
  std::uint64_t phantom_seed = 1;
  double phantom_noise = 0.0;
  CLI::App* phantom_cmd = app.add_subcommand("phantom", "Write synthetic phantom inputs and example configs");
  phantom_cmd->add_option("-o,--output", phantom_dir, "Directory to create")->required();
  phantom_cmd->add_option("--frames", phantom_frames, "Number of registration frames")->check(CLI::PositiveNumber);
  phantom_cmd->add_option("--seed", phantom_seed, "Random seed");
  phantom_cmd->add_option("--noise", phantom_noise, "Gaussian noise on predictions, mm")->check(CLI::NonNegativeNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (phantom_cmd->parsed()) return cmd_phantom(phantom_dir, phantom_frames, phantom_seed, phantom_noise, out);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      const RunConfig cfg = load_config(config_path, output_dir);
      return commands[i].fn(cfg, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace dualfluoro::cli
