#include "dualfluoro/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "dualfluoro/errors.hpp"
#include "dualfluoro/text_io.hpp"

namespace dualfluoro {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double draw(const Range& r, std::mt19937_64& rng) { return r.lo + (r.hi - r.lo) * uniform01(rng); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<int> permutation(int n, std::mt19937_64 rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[static_cast<std::size_t>(i)], p[rng() % static_cast<std::uint64_t>(i + 1)]);
  return p;
}

// Stream ids outside the per-sample range.
constexpr std::uint64_t kSplitStream = ~0ULL;
constexpr std::uint64_t kSegmentStream = ~0ULL - 1;

}  // namespace

void SampleSpec::validate() const {
  auto check = [](const Range& r, const char* what) {
    if (!(r.lo <= r.hi)) throw Error(ErrorCode::InvalidArgument, fmt::format("{} range has lo > hi", what));
  };
  for (const auto& r : rotation_deg) check(r, "rotation");
  for (const auto& r : translation_mm) check(r, "translation");
  check(scale, "scale");
  if (!(scale.lo > 0.0)) throw Error(ErrorCode::InvalidArgument, "scale range must be positive");
  if (!(segmented_fraction >= 0.0 && segmented_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "segmented fraction must lie in [0, 1]");
}

std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(index)));
}

SampledTransform sample_transform(const SampleSpec& spec, std::mt19937_64& rng) {
  SampledTransform t;
  for (int a = 0; a < 3; ++a) t.view.theta[a] = draw(spec.rotation_deg[static_cast<std::size_t>(a)], rng);
  for (int a = 0; a < 3; ++a) t.view.tau[a] = draw(spec.translation_mm[static_cast<std::size_t>(a)], rng);
  t.scale = draw(spec.scale, rng);
  return t;
}

RenderParams apply_sample(const RenderParams& base, const SampledTransform& t) {
  RenderParams p = base;
  p.view = compose(t.view, base.view);
  p.scale = base.scale / t.scale;
  return p;
}

int DatasetPlan::test_count() const {
  return static_cast<int>(std::count(split.begin(), split.end(), Split::Test));
}
int DatasetPlan::train_count() const { return static_cast<int>(split.size()) - test_count(); }
int DatasetPlan::segmented_count() const { return static_cast<int>(std::count(segmented.begin(), segmented.end(), true)); }

DatasetPlan plan_dataset(int n, int test_count, double segmented_fraction, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "dataset size must be at least 1");
  if (test_count < 0 || test_count > n) throw Error(ErrorCode::InvalidArgument, "test count must lie in [0, n]");
  if (!(segmented_fraction >= 0.0 && segmented_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "segmented fraction must lie in [0, 1]");
  DatasetPlan plan;
  plan.split.assign(static_cast<std::size_t>(n), Split::Train);
  plan.segmented.assign(static_cast<std::size_t>(n), false);
  const auto test_perm = permutation(n, sample_stream(seed, kSplitStream));
  for (int i = 0; i < test_count; ++i) plan.split[static_cast<std::size_t>(test_perm[static_cast<std::size_t>(i)])] = Split::Test;
  const int segmented = static_cast<int>(std::lround(n * segmented_fraction));
  const auto seg_perm = permutation(n, sample_stream(seed, kSegmentStream));
  for (int i = 0; i < segmented; ++i) plan.segmented[static_cast<std::size_t>(seg_perm[static_cast<std::size_t>(i)])] = true;
  return plan;
}

DatasetManifest generate_dataset(const CtVolume& volume, const LandmarkSet3D& landmarks, const RenderParams& base,
                                 const SampleSpec& spec, int n, int test_count, const std::filesystem::path& out_dir,
                                 const std::string& config_hash) {
  spec.validate();
  base.validate();
  const DatasetPlan plan = plan_dataset(n, test_count, spec.segmented_fraction, spec.seed);
  if (plan.segmented_count() > 0 && !volume.has_label())
    throw Error(ErrorCode::MissingLabel, "segmented samples need a labeled volume");

  for (const char* sub : {"images", "masks", "labels", "labels_norm"}) std::filesystem::create_directories(out_dir / sub);

  DatasetManifest manifest;
  manifest.seed = spec.seed;
  manifest.config_hash = config_hash;
  manifest.width = base.width;
  manifest.height = base.height;
  const std::vector<std::string> stamp{fmt::format("config_hash {}", config_hash), fmt::format("seed {}", spec.seed)};

  for (int i = 0; i < n; ++i) {
    auto rng = sample_stream(spec.seed, static_cast<std::uint64_t>(i));
    const SampledTransform t = sample_transform(spec, rng);
    const RenderParams params = apply_sample(base, t);
    Drr drr = render_drr(volume, landmarks, params);

    SampleRecord rec;
    rec.index = i + 1;
    rec.view = params.view;
    rec.scale = t.scale;
    rec.segmented = plan.segmented[static_cast<std::size_t>(i)];
    rec.split = plan.split[static_cast<std::size_t>(i)];
    const std::string id = fmt::format("{:06d}", i + 1);
    rec.image = "images/drr_" + id + ".pgm";
    rec.labels = "labels/lm_" + id + ".txt";
    rec.labels_normalized = "labels_norm/lm_" + id + ".txt";

    if (drr.mask) {
      rec.mask = "masks/mask_" + id + ".pgm";
      if (rec.segmented)
        for (std::size_t p = 0; p < drr.image.pixels().size(); ++p) drr.image.pixels()[p] *= drr.mask->pixels()[p];
      Image mask_gray = *drr.mask;
      for (double& v : mask_gray.pixels()) v *= 255.0;
      write_pgm(out_dir / rec.mask, mask_gray, stamp);
    }
    write_pgm(out_dir / rec.image, drr.image, stamp);
    text::write_file(out_dir / rec.labels, format_landmarks_2d(drr.landmarks2d, stamp));

    // Off-frame landmarks are clamped into the frame and keep visible = 0.
    std::vector<Vec2> clamped;
    for (const auto& l : drr.landmarks2d)
      clamped.emplace_back(std::clamp(l.px.x(), 1.0, static_cast<double>(base.width)),
                           std::clamp(l.px.y(), 1.0, static_cast<double>(base.height)));
    const auto norm = normalize_landmarks(clamped, base.width, base.height);
    std::vector<Landmark2D> norm_rows;
    for (std::size_t k = 0; k < norm.size(); ++k) norm_rows.push_back({norm[k], drr.landmarks2d[k].visible});
    text::write_file(out_dir / rec.labels_normalized, format_landmarks_2d(norm_rows, stamp));

    manifest.samples.push_back(std::move(rec));
  }
  manifest.train_count = plan.train_count();
  manifest.test_count = plan.test_count();
  manifest.segmented_count = plan.segmented_count();
  text::write_file(out_dir / "manifest.json", manifest_json(manifest));
  return manifest;
}

std::string manifest_json(const DatasetManifest& manifest) {
  using nlohmann::ordered_json;
  ordered_json root;
  root["config_hash"] = manifest.config_hash;
  root["seed"] = manifest.seed;
  root["image_size"] = {manifest.width, manifest.height};
  root["counts"] = {{"total", manifest.samples.size()},
                    {"train", manifest.train_count},
                    {"test", manifest.test_count},
                    {"segmented", manifest.segmented_count}};
  ordered_json samples = ordered_json::array();
  for (const auto& s : manifest.samples) {
    ordered_json rec;
    rec["index"] = s.index;
    rec["image"] = s.image;
    rec["mask"] = s.mask;
    rec["labels"] = s.labels;
    rec["labels_normalized"] = s.labels_normalized;
    rec["pose"] = {{"theta", {s.view.theta.x(), s.view.theta.y(), s.view.theta.z()}},
                   {"tau", {s.view.tau.x(), s.view.tau.y(), s.view.tau.z()}}};
    rec["scale"] = s.scale;
    rec["segmented"] = s.segmented;
    rec["split"] = s.split == Split::Test ? "test" : "train";
    samples.push_back(std::move(rec));
  }
  root["samples"] = std::move(samples);
  return root.dump(2) + "\n";
}

Image normalize_image(const Image& image) {
  Image out(image.width(), image.height());
  for (std::size_t i = 0; i < image.pixels().size(); ++i) {
    const double v = image.pixels()[i];
    if (!(v >= 0.0 && v <= 255.0)) throw Error(ErrorCode::OutOfRange, fmt::format("pixel value {} outside [0, 255]", v));
    out.pixels()[i] = v / 127.5 - 1.0;
  }
  return out;
}

Image denormalize_image(const Image& normalized) {
  Image out(normalized.width(), normalized.height());
  std::transform(normalized.pixels().begin(), normalized.pixels().end(), out.pixels().begin(),
                 [](double v) { return (v + 1.0) * 127.5; });
  return out;
}

std::vector<Vec2> normalize_landmarks(const std::vector<Vec2>& coords, int width, int height) {
  if (width < 2 || height < 2) throw Error(ErrorCode::InvalidArgument, "landmark frame must be at least 2x2");
  std::vector<Vec2> out;
  out.reserve(coords.size());
  const Vec2 span(width - 1, height - 1);
  for (const Vec2& c : coords) {
    if (!(c.x() >= 1.0 && c.x() <= width && c.y() >= 1.0 && c.y() <= height))
      throw Error(ErrorCode::OutOfRange, fmt::format("landmark ({}, {}) outside [1, {}] x [1, {}]", c.x(), c.y(), width, height));
    out.push_back(2.0 * (c - Vec2::Ones()).cwiseQuotient(span) - Vec2::Ones());
  }
  return out;
}

std::vector<Vec2> denormalize_landmarks(const std::vector<Vec2>& normalized, int width, int height) {
  std::vector<Vec2> out;
  out.reserve(normalized.size());
  const Vec2 span(width - 1, height - 1);
  for (const Vec2& n : normalized) out.push_back(0.5 * (n + Vec2::Ones()).cwiseProduct(span) + Vec2::Ones());
  return out;
}

std::vector<double> flatten_labels(const std::vector<Vec2>& coords, int expected) {
  if (static_cast<int>(coords.size()) != expected)
    throw Error(ErrorCode::WrongCount, fmt::format("expected {} landmarks, got {}", expected, coords.size()));
  std::vector<double> flat;
  flat.reserve(coords.size() * 2);
  for (const Vec2& c : coords) {
    flat.push_back(c.x());
    flat.push_back(c.y());
  }
  return flat;
}

std::vector<Vec2> unflatten_labels(const std::vector<double>& flat) {
  if (flat.size() % 2 != 0) throw Error(ErrorCode::WrongCount, "flattened labels need an even length");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < flat.size(); i += 2) out.emplace_back(flat[i], flat[i + 1]);
  return out;
}

}  // namespace dualfluoro
