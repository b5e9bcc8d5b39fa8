#include "dualfluoro/drr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "dualfluoro/errors.hpp"
#include "dualfluoro/text_io.hpp"

namespace dualfluoro {

void RenderParams::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "output dimensions must be positive");
  if (!(window_lo < window_hi)) throw Error(ErrorCode::InvalidArgument, "intensity window needs lo < hi");
  if (!(scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "render scale must be positive");
}

namespace {

void check_inputs(const CtVolume& volume, const RenderParams& params) {
  if (volume.empty()) throw Error(ErrorCode::EmptyVolume, "volume has a zero dimension");
  params.validate();
}

/// Rendering-plane coordinates (mm) of a 0-based output pixel.
Vec2 plane_coords(const RenderParams& params, int col, int row) {
  return {(col - 0.5 * (params.width - 1)) * params.scale, (row - 0.5 * (params.height - 1)) * params.scale};
}

/// Shear-warp factorization of a parallel view of the voxel grid.
struct ShearWarp {
  int principal = 2;  // voxel axis most aligned with the rays
  int axis_a = 0;     // intermediate-image column axis
  int axis_b = 1;     // intermediate-image row axis
  double shear_a = 0.0;
  double shear_b = 0.0;
  double step_length = 1.0;  // mm of ray per slice
  int a0 = 0, b0 = 0;        // intermediate-grid origin (voxel index units)
  int inter_w = 0, inter_h = 0;
  // Affine warp: (A, B) = warp_origin + x * warp_dx + y * warp_dy for
  // rendering-plane coordinates (x, y).
  Vec2 warp_origin, warp_dx, warp_dy;

  ShearWarp(const CtVolume& volume, const RenderParams& params) {
    const Mat3 r = params.view.rotation();
    const Vec3 ray_model = r.transpose() * Vec3::UnitZ();
    const Vec3 ray_index = ray_model.cwiseQuotient(volume.spacing());
    ray_index.cwiseAbs().maxCoeff(&principal);
    axis_a = principal == 0 ? 1 : 0;
    axis_b = principal == 2 ? 1 : 2;
    shear_a = ray_index[axis_a] / ray_index[principal];
    shear_b = ray_index[axis_b] / ray_index[principal];
    step_length = volume.spacing()[principal] / std::abs(ray_model[principal]);

    const auto& dims = volume.dims();
    const int np = dims[principal];
    // Intermediate coordinate of voxel (ia, k) is ia - shear * k; pad by one
    // sample for the bilinear footprint.
    auto extent = [np](double shear, int n, int& lo, int& count) {
      const double last = shear * (np - 1);
      const double min_v = std::min(0.0, -last) - 1.0;
      const double max_v = (n - 1) + std::max(0.0, -last) + 1.0;
      lo = static_cast<int>(std::floor(min_v));
      count = static_cast<int>(std::ceil(max_v)) - lo + 1;
    };
    extent(shear_a, dims[axis_a], a0, inter_w);
    extent(shear_b, dims[axis_b], b0, inter_h);

    // Base-plane intersection of the ray through rendering-plane point (x, y).
    auto base_point = [&](const Vec2& xy) {
      const Vec3 model = r.transpose() * (Vec3(xy.x(), xy.y(), 0.0) - params.view.tau);
      const Vec3 q = volume.to_index(model);
      const double z = -q[principal] / ray_index[principal];
      const Vec3 hit = q + z * ray_index;
      return Vec2(hit[axis_a], hit[axis_b]);
    };
    warp_origin = base_point(Vec2::Zero());
    warp_dx = base_point(Vec2::UnitX()) - warp_origin;
    warp_dy = base_point(Vec2::UnitY()) - warp_origin;
  }

  std::array<int, 3> voxel(int ia, int ib, int k) const {
    std::array<int, 3> v{};
    v[static_cast<std::size_t>(axis_a)] = ia;
    v[static_cast<std::size_t>(axis_b)] = ib;
    v[static_cast<std::size_t>(principal)] = k;
    return v;
  }

  /// Bilinear lookup in an intermediate image (zero outside).
  static double bilinear(const std::vector<double>& img, int w, int h, double x, double y) {
    const double fx = std::floor(x), fy = std::floor(y);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const double tx = x - fx, ty = y - fy;
    auto at = [&](int xi, int yi) {
      if (xi < 0 || yi < 0 || xi >= w || yi >= h) return 0.0;
      return img[static_cast<std::size_t>(yi) * static_cast<std::size_t>(w) + static_cast<std::size_t>(xi)];
    };
    return (1 - ty) * ((1 - tx) * at(x0, y0) + tx * at(x0 + 1, y0)) + ty * ((1 - tx) * at(x0, y0 + 1) + tx * at(x0 + 1, y0 + 1));
  }

  Image warp(const std::vector<double>& inter, const RenderParams& params) const {
    Image out(params.width, params.height);
    for (int row = 0; row < params.height; ++row)
      for (int col = 0; col < params.width; ++col) {
        const Vec2 xy = plane_coords(params, col, row);
        const Vec2 ab = warp_origin + xy.x() * warp_dx + xy.y() * warp_dy;
        out.at(col, row) = bilinear(inter, inter_w, inter_h, ab.x() - a0, ab.y() - b0);
      }
    return out;
  }

  /// Composites depth samples into the intermediate image. With `substeps`
  /// > 1, samples are also taken between slices (trilinear, as a blend of
  /// the two neighbouring slices) so max-compositing sees grazing rays.
  /// `combine(acc, sample)` folds one sample into the accumulator.
  template <typename Fetch, typename Combine>
  std::vector<double> composite(const CtVolume& volume, Fetch fetch, Combine combine, int substeps = 1) const {
    std::vector<double> inter(static_cast<std::size_t>(inter_w) * static_cast<std::size_t>(inter_h), 0.0);
    const int na = volume.dims()[axis_a], nb = volume.dims()[axis_b];
    const int np = volume.dims()[principal];
    auto val = [&](int ia, int ib, int k) -> double {
      if (ia < 0 || ib < 0 || ia >= na || ib >= nb || k < 0 || k >= np) return 0.0;
      const auto v = voxel(ia, ib, k);
      return fetch(volume.index(v[0], v[1], v[2]));
    };
    for (int k = substeps == 1 ? 0 : -1; k < np; ++k)
      for (int s = 0; s < substeps; ++s) {
        const double t = static_cast<double>(s) / substeps;
        const double oa = shear_a * (k + t), ob = shear_b * (k + t);
        const double fla = std::floor(oa), flb = std::floor(ob);
        const int ia_off = static_cast<int>(fla), ib_off = static_cast<int>(flb);
        const double fa = oa - fla, fb = ob - flb;
        const double w00 = (1 - fa) * (1 - fb), w10 = fa * (1 - fb), w01 = (1 - fa) * fb, w11 = fa * fb;
        auto bilinear_at = [&](int ia, int ib, int kk) {
          return w00 * val(ia, ib, kk) + w10 * val(ia + 1, ib, kk) + w01 * val(ia, ib + 1, kk) + w11 * val(ia + 1, ib + 1, kk);
        };
        for (int y = 0; y < inter_h; ++y) {
          const int ib = y + b0 + ib_off;
          if (ib < -1 || ib >= nb) continue;
          double* dst = &inter[static_cast<std::size_t>(y) * static_cast<std::size_t>(inter_w)];
          for (int x = 0; x < inter_w; ++x) {
            const int ia = x + a0 + ia_off;
            if (ia < -1 || ia >= na) continue;
            double sample = (1 - t) * bilinear_at(ia, ib, k);
            if (t > 0.0) sample += t * bilinear_at(ia, ib, k + 1);
            dst[x] = combine(dst[x], sample);
          }
        }
      }
    return inter;
  }
};

}  // namespace

Image integrate_shear_warp(const CtVolume& volume, const RenderParams& params) {
  check_inputs(volume, params);
  const ShearWarp sw(volume, params);
  const auto& data = volume.intensities();
  const double len = sw.step_length;
  const auto inter = sw.composite(
      volume, [&data](std::size_t n) { return static_cast<double>(data[n]); },
      [len](double acc, double s) { return acc + len * s; });
  return sw.warp(inter, params);
}

Image integrate_brute_force(const CtVolume& volume, const RenderParams& params) {
  check_inputs(volume, params);
  const Mat3 rt = params.view.rotation().transpose();
  const Vec3 ray_index = (rt * Vec3::UnitZ()).cwiseQuotient(volume.spacing());
  const double step = 0.25 * volume.spacing().minCoeff();
  const auto& dims = volume.dims();
  Image out(params.width, params.height);
  for (int row = 0; row < params.height; ++row)
    for (int col = 0; col < params.width; ++col) {
      const Vec2 xy = plane_coords(params, col, row);
      const Vec3 q0 = volume.to_index(rt * (Vec3(xy.x(), xy.y(), 0.0) - params.view.tau));
      // Clip the ray to the trilinear support [-1, n] on every axis.
      double z_lo = -std::numeric_limits<double>::infinity(), z_hi = std::numeric_limits<double>::infinity();
      bool hit = true;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(ray_index[a]) < 1e-15) {
          if (q0[a] <= -1.0 || q0[a] >= dims[static_cast<std::size_t>(a)]) hit = false;
          continue;
        }
        double t1 = (-1.0 - q0[a]) / ray_index[a], t2 = (dims[static_cast<std::size_t>(a)] - q0[a]) / ray_index[a];
        if (t1 > t2) std::swap(t1, t2);
        z_lo = std::max(z_lo, t1);
        z_hi = std::min(z_hi, t2);
      }
      if (!hit || !(z_lo < z_hi)) continue;
      const int n = static_cast<int>(std::ceil((z_hi - z_lo) / step));
      const double h = (z_hi - z_lo) / n;
      double acc = 0.0;
      for (int s = 0; s < n; ++s) acc += volume.sample(q0 + (z_lo + (s + 0.5) * h) * ray_index);
      out.at(col, row) = acc * h;
    }
  return out;
}

Image apply_window(const Image& integrals, double lo, double hi) {
  Image out(integrals.width(), integrals.height());
  const double k = 255.0 / (hi - lo);
  std::transform(integrals.pixels().begin(), integrals.pixels().end(), out.pixels().begin(),
                 [&](double v) { return std::clamp((v - lo) * k, 0.0, 255.0); });
  return out;
}

Drr render_drr(const CtVolume& volume, const RenderParams& params) {
  Drr drr;
  drr.image = apply_window(integrate_shear_warp(volume, params), params.window_lo, params.window_hi);
  if (volume.has_label()) drr.mask = render_mask(volume, params);
  return drr;
}

Drr render_drr(const CtVolume& volume, const LandmarkSet3D& landmarks, const RenderParams& params) {
  Drr drr = render_drr(volume, params);
  drr.landmarks2d = project_landmarks_parallel(landmarks, params);
  return drr;
}

Image brute_force_raycast(const CtVolume& volume, const RenderParams& params) {
  return apply_window(integrate_brute_force(volume, params), params.window_lo, params.window_hi);
}

std::vector<Landmark2D> project_landmarks_parallel(const LandmarkSet3D& landmarks, const RenderParams& params) {
  params.validate();
  const Mat3 r = params.view.rotation();
  const Vec2 center(0.5 * (params.width + 1), 0.5 * (params.height + 1));
  std::vector<Landmark2D> out;
  out.reserve(static_cast<std::size_t>(landmarks.size()));
  for (const Vec3& p : landmarks.points()) {
    const Vec3 q = r * p + params.view.tau;
    Landmark2D l;
    l.px = Vec2(q.x(), q.y()) / params.scale + center;
    l.visible = l.px.x() >= 1.0 && l.px.x() <= params.width && l.px.y() >= 1.0 && l.px.y() <= params.height;
    out.push_back(l);
  }
  return out;
}

Image render_mask(const CtVolume& volume, const RenderParams& params) {
  check_inputs(volume, params);
  const auto& label = volume.label();
  const ShearWarp sw(volume, params);
  const auto inter = sw.composite(
      volume, [&label](std::size_t n) { return label[n] ? 1.0 : 0.0; },
      [](double acc, double s) { return std::max(acc, s); }, 4);
  Image mask = sw.warp(inter, params);
  for (double& v : mask.pixels()) v = v >= 0.5 ? 1.0 : 0.0;
  return mask;
}

std::string format_landmarks_2d(const std::vector<Landmark2D>& landmarks, const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += "# index u_px v_px visible\n";
  for (std::size_t i = 0; i < landmarks.size(); ++i)
    out += fmt::format("{} {} {} {}\n", i + 1, landmarks[i].px.x(), landmarks[i].px.y(), landmarks[i].visible ? 1 : 0);
  return out;
}

std::vector<Landmark2D> parse_landmarks_2d(std::string_view content) {
  std::vector<Landmark2D> out;
  for (const auto& row : text::parse_rows(content)) {
    if (row.fields.size() != 4)
      throw Error(ErrorCode::Parse, fmt::format("line {}: expected 'index u v visible'", row.line_number));
    if (row.integer(0) != static_cast<long>(out.size()) + 1)
      throw Error(ErrorCode::Parse, fmt::format("line {}: indices must be consecutive from 1", row.line_number));
    out.push_back({Vec2(row.number(1), row.number(2)), row.integer(3) != 0});
  }
  return out;
}

}  // namespace dualfluoro
