#include "dualfluoro/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "dualfluoro/errors.hpp"

namespace dualfluoro {

double angle_difference_deg(double a, double b) { return wrap_degrees(a - b); }

DofErrors dof_errors(const RigidPose& reference, const RigidPose& predicted) {
  DofErrors e;
  for (int i = 0; i < 3; ++i) {
    e.eps_theta = std::max(e.eps_theta, std::abs(angle_difference_deg(reference.theta[i], predicted.theta[i])));
    e.eps_tau = std::max(e.eps_tau, std::abs(reference.tau[i] - predicted.tau[i]));
  }
  return e;
}

MseReport landmark_mse(const std::vector<double>& predicted, const std::vector<double>& label) {
  if (predicted.size() != label.size())
    throw Error(ErrorCode::LengthMismatch, fmt::format("{} predicted vs {} label values", predicted.size(), label.size()));
  if (predicted.empty()) throw Error(ErrorCode::LengthMismatch, "empty landmark vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) acc += (predicted[i] - label[i]) * (predicted[i] - label[i]);
  MseReport r;
  r.mse = acc / static_cast<double>(predicted.size());
  r.log10_mse = r.mse > 0.0 ? std::log10(r.mse) : -std::numeric_limits<double>::infinity();
  return r;
}

namespace {

/// Zero-mean correlation of two gradient fields; sets `flat_*` when a field
/// has (numerically) zero variance.
double correlate(const std::vector<double>& ga, const std::vector<double>& gb, bool& flat_a, bool& flat_b) {
  const double n = static_cast<double>(ga.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    ma += ga[i];
    mb += gb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0, scale_a = 0.0, scale_b = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    const double da = ga[i] - ma, db = gb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
    scale_a = std::max(scale_a, std::abs(ga[i]));
    scale_b = std::max(scale_b, std::abs(gb[i]));
  }
  // Relative flatness so rounding noise on a constant gradient counts as flat.
  flat_a = saa <= n * std::pow(1e-12 * std::max(scale_a, 1e-300), 2);
  flat_b = sbb <= n * std::pow(1e-12 * std::max(scale_b, 1e-300), 2);
  if (flat_a || flat_b) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

double grad_zncc_phi(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error(ErrorCode::DimMismatch,
                fmt::format("{}x{} vs {}x{}", a.width(), a.height(), b.width(), b.height()));
  if (a.width() < 3 || a.height() < 3) throw Error(ErrorCode::DimMismatch, "images must be at least 3x3");
  const int w = a.width(), h = a.height();
  std::vector<double> ax, bx, ay, by;
  for (int r = 1; r < h - 1; ++r)
    for (int c = 1; c < w - 1; ++c) {
      ax.push_back(0.5 * (a.at(c + 1, r) - a.at(c - 1, r)));
      bx.push_back(0.5 * (b.at(c + 1, r) - b.at(c - 1, r)));
      ay.push_back(0.5 * (a.at(c, r + 1) - a.at(c, r - 1)));
      by.push_back(0.5 * (b.at(c, r + 1) - b.at(c, r - 1)));
    }
  double sum = 0.0;
  int directions = 0;
  for (int d = 0; d < 2; ++d) {
    bool flat_a = false, flat_b = false;
    const double rho = d == 0 ? correlate(ax, bx, flat_a, flat_b) : correlate(ay, by, flat_a, flat_b);
    if (flat_a && flat_b) continue;
    sum += rho;
    ++directions;
  }
  return directions ? sum / directions : 0.0;
}

SimilarityReport content_preserving_loss(const Image& real_x, const Image& fake_drr, const Image& real_drr,
                                         const Image& fake_x) {
  SimilarityReport r;
  r.phi_x_to_drr = grad_zncc_phi(real_x, fake_drr);
  r.phi_drr_to_x = grad_zncc_phi(real_drr, fake_x);
  r.l_cp = 1.0 - 0.5 * (std::clamp(r.phi_x_to_drr, 0.0, 1.0) + std::clamp(r.phi_drr_to_x, 0.0, 1.0));
  return r;
}

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd out;
  out.n = static_cast<int>(values.size());
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (out.n - 1));
  }
  return out;
}

}  // namespace dualfluoro
