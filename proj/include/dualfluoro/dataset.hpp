#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dualfluoro/drr.hpp"

namespace dualfluoro {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Randomization of the rendered view. Rotations and translations are
/// applied in the rendering frame, after the base view.
struct SampleSpec {
  std::array<Range, 3> rotation_deg{{{-30, 30}, {-30, 30}, {-30, 30}}};
  std::array<Range, 3> translation_mm{{{-20, 20}, {-20, 20}, {0, 0}}};
  Range scale{0.8, 1.2};
  double segmented_fraction = 0.0;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on lo > hi, non-positive scale or a fraction
  /// outside [0, 1].
  void validate() const;
};

struct SampledTransform {
  RigidPose view;
  double scale = 1.0;
};

/// Independent generator for draw `index` of a run seeded with `seed`.
std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index);

/// Uniform draw of every component from its range.
SampledTransform sample_transform(const SampleSpec& spec, std::mt19937_64& rng);

/// Render parameters for one sample: the sampled pose composed after the
/// base view, and the pixel size divided by the sampled scale.
RenderParams apply_sample(const RenderParams& base, const SampledTransform& t);

enum class Split { Train, Test };

/// Which samples are held out and which are skull-segmented. Both subsets are
/// drawn by seeded permutation; the segmented count is round(n * fraction).
struct DatasetPlan {
  std::vector<Split> split;
  std::vector<bool> segmented;

  int test_count() const;
  int train_count() const;
  int segmented_count() const;
};

DatasetPlan plan_dataset(int n, int test_count, double segmented_fraction, std::uint64_t seed);

struct SampleRecord {
  int index = 0;  // 1-based
  std::string image;
  std::string mask;
  std::string labels;
  std::string labels_normalized;
  RigidPose view;
  double scale = 1.0;
  bool segmented = false;
  Split split = Split::Train;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::string config_hash;
  int width = 0;
  int height = 0;
  std::vector<SampleRecord> samples;
  int train_count = 0;
  int test_count = 0;
  int segmented_count = 0;
};

/// Renders n DRR/landmark/mask samples into `out_dir` (images/, masks/,
/// labels/, labels_norm/) and writes manifest.json. Segmented samples have
/// their non-skull pixels zeroed by the rendered mask.
DatasetManifest generate_dataset(const CtVolume& volume, const LandmarkSet3D& landmarks, const RenderParams& base,
                                 const SampleSpec& spec, int n, int test_count, const std::filesystem::path& out_dir,
                                 const std::string& config_hash = "");

std::string manifest_json(const DatasetManifest& manifest);

/// [0, 255] -> [-1, 1] via x / 127.5 - 1. Throws OutOfRange.
Image normalize_image(const Image& image);
Image denormalize_image(const Image& normalized);

/// Per axis, 1 -> -1 and w (resp. h) -> +1. Throws OutOfRange outside
/// [1, w] x [1, h].
std::vector<Vec2> normalize_landmarks(const std::vector<Vec2>& coords, int width, int height);
std::vector<Vec2> denormalize_landmarks(const std::vector<Vec2>& normalized, int width, int height);

/// Interleaved (u1, v1, u2, v2, ...). Throws WrongCount unless there are
/// exactly `expected` landmarks.
std::vector<double> flatten_labels(const std::vector<Vec2>& coords, int expected = kSkullLandmarkCount);
std::vector<Vec2> unflatten_labels(const std::vector<double>& flat);

}  // namespace dualfluoro
