#pragma once

#include <string>
#include <vector>

#include "dualfluoro/geometry.hpp"
#include "dualfluoro/image.hpp"

namespace dualfluoro {

/// Infinity-norm pose errors against a reference registration.
struct DofErrors {
  double eps_theta = 0.0;  // degrees
  double eps_tau = 0.0;    // mm
};

/// Shortest signed difference a - b on the circle, in (-180, 180].
double angle_difference_deg(double a, double b);

/// eps_theta = max |theta_ref - theta| (circular), eps_tau = max |tau_ref - tau|.
DofErrors dof_errors(const RigidPose& reference, const RigidPose& predicted);

struct MseReport {
  double mse = 0.0;
  double log10_mse = 0.0;  // -inf when mse == 0
};

/// Mean squared coordinate difference of normalized landmark vectors.
/// Throws LengthMismatch.
MseReport landmark_mse(const std::vector<double>& predicted, const std::vector<double>& label);

/// Zero-normalized gradient cross correlation. Central-difference gradients
/// are taken on interior pixels; per direction, the zero-mean gradient fields
/// are correlated. Directions flat in both images are skipped, a direction
/// flat in only one image contributes 0, and phi is the mean over the
/// remaining directions (0 if none remain). Range [-1, 1].
/// Throws DimMismatch on unequal sizes or images smaller than 3x3.
double grad_zncc_phi(const Image& a, const Image& b);

struct SimilarityReport {
  double phi_x_to_drr = 0.0;  // phi(real X-ray, fake DRR), unclamped
  double phi_drr_to_x = 0.0;  // phi(real DRR, fake X-ray), unclamped
  double l_cp = 0.0;          // in [0, 1]
};

/// l_cp = 1 - (phi1 + phi2) / 2 with each phi clamped to [0, 1].
SimilarityReport content_preserving_loss(const Image& real_x, const Image& fake_drr, const Image& real_drr,
                                         const Image& fake_x);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1); 0 for n < 2
  int n = 0;
};

MeanSd mean_sd(const std::vector<double>& values);

}  // namespace dualfluoro
