#pragma once

#include <array>
#include <span>
#include <vector>

namespace tinytarget::geometry {

// Axis-aligned box, center/size form. Construction rejects degenerate or
// non-finite extents instead of clamping them.
struct BBox {
  double cx;
  double cy;
  double w;
  double h;

  BBox(double cx, double cy, double w, double h);

  double left() const { return cx - w / 2.0; }
  double right() const { return cx + w / 2.0; }
  double top() const { return cy - h / 2.0; }
  double bottom() const { return cy + h / 2.0; }
  double area() const { return w * h; }
};

// Isotropic-per-axis Gaussian used to compare boxes as mass distributions.
// The covariance is diagonal by construction: (w/2)^2 and (h/2)^2.
struct Gaussian2D {
  std::array<double, 2> mean;
  std::array<double, 2> cov_diag;
};

struct NwdConfig {
  double c = 11.0;  // distance scale in the exp(-sqrt(d)/c) map, must be > 0
};

// Intersection over union. 0 for disjoint boxes, 1 only for identical ones.
double iou(const BBox &a, const BBox &b);

Gaussian2D box_to_gaussian(const BBox &box);

// Squared 2-Wasserstein distance between the Gaussians of two boxes. For
// diagonal covariances this collapses to the squared L2 distance between
// the vectors [cx, cy, w/2, h/2].
double wasserstein2_sq(const BBox &a, const BBox &b);

// exp(-sqrt(wasserstein2_sq)/c), a similarity in (0, 1].
double nwd(const BBox &a, const BBox &b, const NwdConfig &cfg = {});

struct SensitivityRow {
  double shift;
  double iou;
  double nwd;
};

// Overlap decay under diagonal translation: a square of side box_size at the
// origin versus its copy shifted by (shift, shift), one row per shift.
std::vector<SensitivityRow> sensitivity_scan(double box_size,
                                             std::span<const double> shifts,
                                             const NwdConfig &cfg = {});

}  // namespace tinytarget::geometry
