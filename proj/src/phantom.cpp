#include "dualfluoro/phantom.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace dualfluoro::phantom {

namespace {

constexpr double kSourceToIntensifier = 1200.0;
constexpr double kIntensifierToSubject = 300.0;
constexpr double kBeamAngleDeg = 60.0;

std::vector<float> fill(int n, double spacing, Vec3& origin, auto value_at) {
  origin = Vec3::Constant(-0.5 * (n - 1) * spacing);
  std::vector<float> out(static_cast<std::size_t>(n) * n * n);
  std::size_t idx = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) out[idx++] = static_cast<float>(value_at(origin + spacing * Vec3(i, j, k)));
  return out;
}

double ellipsoid_radius(const Vec3& p, const Vec3& radii) { return p.cwiseQuotient(radii).norm(); }

}  // namespace

CtVolume skull_shell(int n, double spacing) {
  const Vec3 outer(72, 88, 80), inner(64, 80, 72);
  const Vec3 tooth(38, 52, -62);
  auto in_shell = [&](const Vec3& p) { return ellipsoid_radius(p, outer) <= 1.0 && ellipsoid_radius(p, inner) > 1.0; };
  Vec3 origin;
  auto values = fill(n, spacing, origin, [&](const Vec3& p) {
    double v = 0.0;
    if (ellipsoid_radius(p, outer) <= 1.0) v = in_shell(p) ? 1.0 : 0.15;
    if ((p - tooth).norm() <= 9.0) v = 1.6;
    return v;
  });
  std::vector<std::uint8_t> label(values.size());
  std::size_t idx = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) label[idx++] = in_shell(origin + spacing * Vec3(i, j, k)) ? 1 : 0;
  return CtVolume({n, n, n}, Vec3::Constant(spacing), origin, std::move(values), std::move(label));
}

CtVolume smooth_random(int n, double spacing, std::uint64_t seed, int blobs) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-0.3 * n * spacing, 0.3 * n * spacing);
  std::uniform_real_distribution<double> width(3.0 * spacing, 8.0 * spacing);
  std::uniform_real_distribution<double> amp(0.2, 1.0);
  struct Blob {
    Vec3 c;
    double s, a;
  };
  std::vector<Blob> list;
  for (int b = 0; b < blobs; ++b) {
    const Vec3 c(pos(rng), pos(rng), pos(rng));
    const double s = width(rng);
    list.push_back({c, s, amp(rng)});
  }
  Vec3 origin;
  auto values = fill(n, spacing, origin, [&](const Vec3& p) {
    double v = 0.0;
    for (const auto& b : list) v += b.a * std::exp(-0.5 * (p - b.c).squaredNorm() / (b.s * b.s));
    return v;
  });
  return CtVolume({n, n, n}, Vec3::Constant(spacing), origin, std::move(values));
}

CtVolume labeled_ellipsoid(int n, double spacing, const Vec3& radii) {
  Vec3 origin;
  auto values = fill(n, spacing, origin, [&](const Vec3& p) { return ellipsoid_radius(p, radii) <= 1.0 ? 1.0 : 0.0; });
  std::vector<std::uint8_t> label(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) label[i] = values[i] > 0.5f ? 1 : 0;
  return CtVolume({n, n, n}, Vec3::Constant(spacing), origin, std::move(values), std::move(label));
}

LandmarkSet3D skull_landmarks() {
  // Right-side members of the symmetric pairs; the left side mirrors x.
  const std::vector<std::pair<const char*, Vec3>> paired{
      {"orbit_sup", {30, 80, 12}},      {"orbit_lat", {45, 66, -14}},   {"zygion", {62, 40, -30}},
      {"mastoid", {55, 8, -60}},        {"gonion", {48, 44, -92}},      {"mental", {24, 70, -108}},
      {"euryon", {68, -8, 18}},         {"asterion", {58, -44, 26}},    {"lambdoid", {40, -72, 2}},
      {"coronal", {38, 22, 62}},        {"parietal", {24, -32, 70}},    {"porion", {70, 2, -12}},
      {"infraorbital", {20, 86, -40}}};
  const std::vector<std::pair<const char*, Vec3>> midline{
      {"nasion", {0, 88, 4}},    {"vertex", {0, 4, 80}},      {"inion", {0, -86, -4}}, {"menton", {0, 64, -118}},
      {"opisthion", {0, -40, -52}}, {"basion", {0, -8, -46}}, {"bregma", {0, 36, 72}}};
  std::vector<std::string> names;
  std::vector<Vec3> points;
  std::vector<std::pair<int, int>> pairs;
  for (const auto& [name, p] : paired) {
    pairs.emplace_back(static_cast<int>(points.size()), static_cast<int>(points.size()) + 1);
    names.push_back(std::string(name) + "_r");
    points.push_back(p);
    names.push_back(std::string(name) + "_l");
    points.emplace_back(-p.x(), p.y(), p.z());
  }
  for (const auto& [name, p] : midline) {
    names.emplace_back(name);
    points.push_back(p);
  }
  return LandmarkSet3D(std::move(names), std::move(points), std::move(pairs));
}

Vec3 subject_center() { return Vec3(0, 0, kIntensifierToSubject); }

DualFluoroSystem dual_system() {
  const double half = 150.0, pitch = 0.6;
  const Vec3 c = subject_center();
  const FluoroscopeGeometry f1(Vec3(0, 0, kSourceToIntensifier), Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), half, half, pitch);
  const Mat3 r = Eigen::AngleAxisd(kBeamAngleDeg * M_PI / 180.0, Vec3::UnitY()).toRotationMatrix();
  const FluoroscopeGeometry f2(c + r * (f1.source() - c), c + r * (f1.intensifier_center() - c), r * Vec3::UnitX(),
                               Vec3::UnitY(), half, half, pitch);
  return DualFluoroSystem(f1, f2);
}

std::vector<Vec2> bead_plate(int n, double pitch) {
  std::vector<Vec2> out;
  const double o = -0.5 * (n - 1) * pitch;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) out.emplace_back(o + c * pitch, o + r * pitch);
  return out;
}

Vec2 correction_field(const Vec2& observed, double half_extent) {
  const double x = observed.x() / half_extent, y = observed.y() / half_extent;
  const double r2 = x * x + y * y;
  const double u = x + 0.03 * x * r2 + 0.01 * x * x * y - 0.005 * x * x * x * x * x + 0.002 * y * y;
  const double v = y + 0.03 * y * r2 + 0.008 * x * y * y + 0.004 * x * x * x * x * y - 0.003 * x;
  return half_extent * Vec2(u, v);
}

Vec2 distort(const Vec2& ideal, double half_extent) {
  Vec2 p = ideal;
  for (int it = 0; it < 50; ++it) {
    const Vec2 f = correction_field(p, half_extent) - ideal;
    if (f.norm() < 1e-13 * half_extent) break;
    const double h = 1e-6 * half_extent;
    Eigen::Matrix2d j;
    j.col(0) = (correction_field(p + Vec2(h, 0), half_extent) - correction_field(p - Vec2(h, 0), half_extent)) / (2 * h);
    j.col(1) = (correction_field(p + Vec2(0, h), half_extent) - correction_field(p - Vec2(0, h), half_extent)) / (2 * h);
    p -= j.inverse() * f;
  }
  return p;
}

std::vector<Vec3> alignment_tool_beads() { return {{0, 0, 0}, {70, 0, 0}, {0, 60, 0}, {10, 15, 55}}; }

}  // namespace dualfluoro::phantom
