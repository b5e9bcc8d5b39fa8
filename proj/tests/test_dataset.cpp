#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include <doctest.h>
#include <json.hpp>

#include "dualfluoro/dataset.hpp"
#include "dualfluoro/errors.hpp"
#include "dualfluoro/phantom.hpp"
#include "dualfluoro/text_io.hpp"

using namespace dualfluoro;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(DUALFLUORO_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RenderParams small_params() {
  RenderParams p;
  p.width = p.height = 48;
  p.scale = 5.0;
  p.window_hi = 300.0;
  p.view.theta = Vec3(-90, 0, 0);
  return p;
}

SampleSpec identity_spec() {
  SampleSpec s;
  for (auto& r : s.rotation_deg) r = {0, 0};
  for (auto& r : s.translation_mm) r = {0, 0};
  s.scale = {1, 1};
  return s;
}

}  // namespace

TEST_CASE("degenerate ranges reproduce the exact transform") {
  SampleSpec s;
  s.rotation_deg = {{{12.5, 12.5}, {-3, -3}, {0, 0}}};
  s.translation_mm = {{{4, 4}, {-7, -7}, {1.5, 1.5}}};
  s.scale = {1.1, 1.1};
  auto rng = sample_stream(3, 0);
  for (int i = 0; i < 100; ++i) {
    const auto t = sample_transform(s, rng);
    CHECK(t.view.theta == Vec3(12.5, -3, 0));
    CHECK(t.view.tau == Vec3(4, -7, 1.5));
    CHECK(t.scale == 1.1);
  }
}

TEST_CASE("sampling is deterministic per seed and index") {
  const SampleSpec s;
  for (std::uint64_t i = 0; i < 20; ++i) {
    auto a = sample_stream(42, i), b = sample_stream(42, i);
    const auto ta = sample_transform(s, a), tb = sample_transform(s, b);
    CHECK(ta.view.theta == tb.view.theta);
    CHECK(ta.view.tau == tb.view.tau);
    CHECK(ta.scale == tb.scale);
  }
  auto a = sample_stream(42, 0), b = sample_stream(43, 0), c = sample_stream(42, 1);
  const double x = sample_transform(s, a).view.theta.x();
  CHECK(x != sample_transform(s, b).view.theta.x());
  CHECK(x != sample_transform(s, c).view.theta.x());
}

TEST_CASE("sample means match range midpoints within three standard errors") {
  SampleSpec s;
  s.rotation_deg = {{{-30, 30}, {-10, 50}, {0, 90}}};
  s.translation_mm = {{{-20, 20}, {5, 15}, {-1, 0}}};
  s.scale = {0.8, 1.2};
  const int n = 10000;
  std::array<double, 7> sum{};
  for (int i = 0; i < n; ++i) {
    auto rng = sample_stream(7, static_cast<std::uint64_t>(i));
    const auto t = sample_transform(s, rng);
    for (int a = 0; a < 3; ++a) {
      sum[a] += t.view.theta[a];
      sum[3 + a] += t.view.tau[a];
    }
    sum[6] += t.scale;
  }
  std::array<Range, 7> ranges{s.rotation_deg[0], s.rotation_deg[1], s.rotation_deg[2], s.translation_mm[0],
                              s.translation_mm[1], s.translation_mm[2], s.scale};
  for (int k = 0; k < 7; ++k) {
    const double width = ranges[k].hi - ranges[k].lo;
    const double se = width / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sum[k] / n - 0.5 * (ranges[k].lo + ranges[k].hi)) <= 3 * se);
  }
}

TEST_CASE("spec validation") {
  SampleSpec s;
  s.scale = {1.2, 0.8};
  CHECK_THROWS_AS(s.validate(), Error);
  s = SampleSpec{};
  s.segmented_fraction = 1.5;
  CHECK_THROWS_AS(s.validate(), Error);
  s = SampleSpec{};
  s.rotation_deg[1] = {5, -5};
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("split and segmentation bookkeeping") {
  const auto plan = plan_dataset(9751, 500, 2139.0 / 9751.0, 0);
  CHECK(plan.train_count() == 9251);
  CHECK(plan.test_count() == 500);
  CHECK(plan.segmented_count() == 2139);
  CHECK(plan.split.size() == 9751);
  for (int n : {1, 7, 100, 333})
    for (double f : {0.0, 0.1, 0.5, 1.0}) {
      const auto p = plan_dataset(n, n / 3, f, 11);
      CHECK(p.train_count() + p.test_count() == n);
      CHECK(p.test_count() == n / 3);
      CHECK(p.segmented_count() == std::lround(n * f));
    }
  CHECK_THROWS_AS(plan_dataset(0, 0, 0.0, 0), Error);
  CHECK_THROWS_AS(plan_dataset(5, 6, 0.0, 0), Error);
}

TEST_CASE("image normalization") {
  Image img(3, 1);
  img.pixels() = {0.0, 127.5, 255.0};
  const Image n = normalize_image(img);
  CHECK(n.pixels() == std::vector<double>{-1.0, 0.0, 1.0});
  img.pixels()[1] = 255.5;
  try {
    normalize_image(img);
    FAIL("expected OutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
  }
  // 8-bit levels in the upper half of the range survive the round trip exactly.
  Image gray(128, 1);
  for (int g = 0; g < 128; ++g) gray.at(g, 0) = 128 + g;
  const Image back = denormalize_image(normalize_image(gray));
  CHECK(back.pixels() == gray.pixels());
}

TEST_CASE("landmark normalization") {
  const auto n = normalize_landmarks({{1, 1}, {128, 128}, {64.5, 64.5}}, 128, 128);
  CHECK(n[0] == Vec2(-1, -1));
  CHECK(n[1] == Vec2(1, 1));
  CHECK(n[2] == Vec2(0, 0));
  CHECK_THROWS_AS(normalize_landmarks({{0.5, 10}}, 128, 128), Error);
  CHECK_THROWS_AS(normalize_landmarks({{10, 128.5}}, 128, 128), Error);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1, 128);
  std::vector<Vec2> pts;
  for (int i = 0; i < 1000; ++i) pts.emplace_back(u(rng), u(rng));
  const auto back = denormalize_landmarks(normalize_landmarks(pts, 128, 128), 128, 128);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK((back[i] - pts[i]).norm() < 1e-13);
}

TEST_CASE("label flattening") {
  std::vector<Vec2> coords;
  for (int i = 0; i < kSkullLandmarkCount; ++i) coords.emplace_back(i + 0.25, -i - 0.5);
  const auto flat = flatten_labels(coords);
  CHECK(flat.size() == 66);
  CHECK(flat[0] == coords[0].x());
  CHECK(flat[1] == coords[0].y());
  CHECK(flat[2] == coords[1].x());
  CHECK(unflatten_labels(flat) == coords);
  coords.pop_back();
  try {
    flatten_labels(coords);
    FAIL("expected WrongCount");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WrongCount);
  }
}

TEST_CASE("identity dataset of one sample equals a direct render") {
  const CtVolume vol = phantom::skull_shell(32, 6.0);
  const auto lm = phantom::skull_landmarks();
  const auto base = small_params();
  const fs::path out = scratch("ds_identity");
  const auto manifest = generate_dataset(vol, lm, base, identity_spec(), 1, 0, out, "abc");
  REQUIRE(manifest.samples.size() == 1);
  const std::vector<std::string> stamp{"config_hash abc", "seed 0"};
  const Drr direct = render_drr(vol, lm, base);
  CHECK(text::read_file(out / manifest.samples[0].image) == encode_pgm(direct.image, stamp));
  CHECK(text::read_file(out / manifest.samples[0].labels) == format_landmarks_2d(direct.landmarks2d, stamp));
}

TEST_CASE("generated dataset contract") {
  const CtVolume vol = phantom::skull_shell(32, 6.0);
  const auto lm = phantom::skull_landmarks();
  SampleSpec spec;
  spec.seed = 5;
  spec.segmented_fraction = 0.25;
  const fs::path a = scratch("ds_a"), b = scratch("ds_b");
  const auto m = generate_dataset(vol, lm, small_params(), spec, 12, 3, a, "h");
  generate_dataset(vol, lm, small_params(), spec, 12, 3, b, "h");
  CHECK(m.samples.size() == 12);
  CHECK(m.train_count + m.test_count == 12);
  CHECK(m.segmented_count == 3);

  std::set<int> test_ids, train_ids;
  for (const auto& s : m.samples) (s.split == Split::Test ? test_ids : train_ids).insert(s.index);
  CHECK(test_ids.size() == 3);
  CHECK(train_ids.size() == 9);

  const auto manifest = nlohmann::json::parse(text::read_file(a / "manifest.json"));
  CHECK(manifest["samples"].size() == 12);
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["config_hash"] == "h");

  for (const auto& s : m.samples) {
    // Byte-identical reruns.
    for (const auto& f : {s.image, s.mask, s.labels, s.labels_normalized})
      CHECK(text::read_file(a / f) == text::read_file(b / f));
    const auto raw = parse_landmarks_2d(text::read_file(a / s.labels));
    const auto norm = parse_landmarks_2d(text::read_file(a / s.labels_normalized));
    REQUIRE(raw.size() == 33);
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (raw[k].visible) {
        CHECK(raw[k].px.x() >= 1);
        CHECK(raw[k].px.x() <= 48);
        CHECK(raw[k].px.y() >= 1);
        CHECK(raw[k].px.y() <= 48);
      }
      CHECK(norm[k].visible == raw[k].visible);
      CHECK(std::abs(norm[k].px.x()) <= 1.0);
      CHECK(std::abs(norm[k].px.y()) <= 1.0);
    }
    // Segmented images are zero outside the mask.
    if (s.segmented) {
      const Image img = read_pgm(a / s.image), mask = read_pgm(a / s.mask);
      for (std::size_t p = 0; p < img.pixels().size(); ++p)
        if (mask.pixels()[p] == 0.0) CHECK(img.pixels()[p] == 0.0);
    }
  }
  CHECK(text::read_file(a / "manifest.json") == text::read_file(b / "manifest.json"));
}
