#include <filesystem>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "dualfluoro/cli.hpp"
#include "dualfluoro/text_io.hpp"

using namespace dualfluoro;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// A fresh phantom input set, shared by the tests below.
fs::path phantom_dir(const std::string& name, int frames = 12) {
  const fs::path dir = fs::path(DUALFLUORO_TEST_TMP) / name;
  fs::remove_all(dir);
  const auto r = run({"phantom", "-o", dir.string(), "--frames", std::to_string(frames), "--seed", "3"});
  REQUIRE(r.code == 0);
  return dir;
}

json read_json(const fs::path& p) { return json::parse(text::read_file(p)); }

void write_json(const fs::path& p, const json& j) { text::write_file(p, j.dump(2)); }

}  // namespace

TEST_CASE("render from a valid config") {
  const fs::path dir = phantom_dir("cli_render");
  const auto r = run({"render", "-c", (dir / "render.json").string()});
  CHECK(r.code == 0);
  const fs::path out = dir / "out" / "render";
  CHECK(fs::exists(out / "drr.pgm"));
  CHECK(fs::exists(out / "mask.pgm"));
  CHECK(fs::exists(out / "landmarks.txt"));
  // Outputs carry the config hash and seed.
  const std::string lm = text::read_file(out / "landmarks.txt");
  CHECK(lm.find("config_hash") != std::string::npos);
  CHECK(lm.find("seed 3") != std::string::npos);

  // Same config twice gives identical bytes.
  const std::string first = text::read_file(out / "drr.pgm");
  CHECK(run({"render", "-c", (dir / "render.json").string()}).code == 0);
  CHECK(text::read_file(out / "drr.pgm") == first);
}

TEST_CASE("missing volume is a data error with no outputs") {
  const fs::path dir = phantom_dir("cli_missing");
  json cfg = read_json(dir / "render.json");
  cfg["volume"] = "nowhere.hdr";
  cfg["output_dir"] = "out/missing";
  write_json(dir / "missing.json", cfg);
  const auto r = run({"render", "-c", (dir / "missing.json").string()});
  CHECK(r.code == cli::kDataError);
  CHECK_FALSE(r.err.empty());
  CHECK_FALSE(fs::exists(dir / "out" / "missing" / "drr.pgm"));
  CHECK_FALSE(fs::exists(dir / "out" / "missing" / "landmarks.txt"));
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"bogus"}).code == cli::kUsage);
  CHECK(run({"render"}).code == cli::kUsage);
  CHECK(run({"phantom", "-o", "x", "--frames", "0"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == cli::kSuccess);
  const fs::path bad = fs::path(DUALFLUORO_TEST_TMP) / "bad.json";
  fs::create_directories(bad.parent_path());
  text::write_file(bad, "{ not json");
  CHECK(run({"render", "-c", bad.string()}).code == cli::kDataError);
  CHECK(run({"render", "-c", (fs::path(DUALFLUORO_TEST_TMP) / "absent.json").string()}).code == cli::kDataError);
}

TEST_CASE("batch registration writes one record per frame") {
  const fs::path dir = phantom_dir("cli_register");
  const auto r = run({"register", "-c", (dir / "register.json").string()});
  REQUIRE(r.code == 0);
  const fs::path out = dir / "out" / "register";
  const json results = read_json(out / "results.json");
  REQUIRE(results["frames"].size() == 12);
  for (const auto& f : results["frames"]) {
    CHECK(f["status"] == "ok");
    CHECK(f["n_vis"] == 33);
    CHECK(f["mu_mm"].get<double>() < 1e-3);
    CHECK(f["eps_theta_deg"].get<double>() < 1e-3);
  }
  CHECK(results.contains("config_hash"));
  CHECK(results["seed"] == 3);
  CHECK(fs::exists(out / "summary.txt"));
  CHECK(fs::exists(out / "overlays"));

  // Evaluation against the ground-truth poses.
  const auto e = run({"evaluate", "-c", (dir / "evaluate.json").string()});
  REQUIRE(e.code == 0);
  const json ev = read_json(dir / "out" / "evaluate" / "evaluation.json");
  CHECK(ev["frames"].size() == 12);
  CHECK(ev["skipped"].empty());
  for (const auto& f : ev["frames"]) {
    CHECK(f["eps_theta_deg"].get<double>() < 1e-3);
    CHECK(f["eps_tau_mm"].get<double>() < 1e-3);
  }
  const std::string report = text::read_file(dir / "out" / "evaluate" / "evaluation.txt");
  CHECK(report.find("synthetic") != std::string::npos);
}

TEST_CASE("a frame with too few landmarks fails alone") {
  const fs::path dir = phantom_dir("cli_isolation", 3);
  // Keep only two landmarks visible in the second frame's F1 view.
  std::string hidden;
  for (int i = 1; i <= 33; ++i) hidden += std::to_string(i) + " 0 0 " + (i <= 2 ? "1" : "0") + "\n";
  text::write_file(dir / "frames" / "frame_02_f1.txt", hidden);
  const auto r = run({"register", "-c", (dir / "register.json").string()});
  CHECK(r.code == 0);
  const json results = read_json(dir / "out" / "register" / "results.json");
  REQUIRE(results["frames"].size() == 3);
  CHECK(results["frames"][0]["status"] == "ok");
  CHECK(results["frames"][1]["status"] == "failed");
  CHECK(results["frames"][1]["error"].get<std::string>().find("visible") != std::string::npos);
  CHECK(results["frames"][2]["status"] == "ok");
  const std::string summary = text::read_file(dir / "out" / "register" / "summary.txt");
  CHECK(summary.find("2 of 3 frames registered") != std::string::npos);
}

TEST_CASE("calibration subcommands") {
  const fs::path dir = phantom_dir("cli_calib", 1);
  REQUIRE(run({"calib-distortion", "-c", (dir / "calib_distortion.json").string()}).code == 0);
  const json d = read_json(dir / "out" / "calib" / "distortion_report.json");
  CHECK(d["rms_residual_mm"].get<double>() < 1e-6);
  REQUIRE(run({"calib-pose", "-c", (dir / "calib_pose.json").string()}).code == 0);
  const json p = read_json(dir / "out" / "calib" / "calibration_report.json");
  CHECK(p["rms_mm"].get<double>() < 1e-6);
  CHECK(fs::exists(dir / "out" / "calib" / "system_calibrated.txt"));
}
