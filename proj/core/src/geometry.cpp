#include "tinytarget/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tinytarget::geometry {

namespace {

void require_finite(double v, const char *name) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string("BBox: non-finite ") + name);
  }
}

}  // namespace

BBox::BBox(double cx, double cy, double w, double h)
    : cx(cx), cy(cy), w(w), h(h) {
  require_finite(cx, "cx");
  require_finite(cy, "cy");
  require_finite(w, "w");
  require_finite(h, "h");
  if (w <= 0.0 || h <= 0.0) {
    throw std::invalid_argument("BBox: width and height must be positive");
  }
}

double iou(const BBox &a, const BBox &b) {
  const double ix =
      std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double iy =
      std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

Gaussian2D box_to_gaussian(const BBox &box) {
  return Gaussian2D{{box.cx, box.cy},
                    {box.w * box.w / 4.0, box.h * box.h / 4.0}};
}

double wasserstein2_sq(const BBox &a, const BBox &b) {
  const double dx = a.cx - b.cx;
  const double dy = a.cy - b.cy;
  const double dw = (a.w - b.w) / 2.0;
  const double dh = (a.h - b.h) / 2.0;
  return dx * dx + dy * dy + dw * dw + dh * dh;
}

double nwd(const BBox &a, const BBox &b, const NwdConfig &cfg) {
  if (!(cfg.c > 0.0)) {
    throw std::domain_error("nwd: scale c must be positive");
  }
  return std::exp(-std::sqrt(wasserstein2_sq(a, b)) / cfg.c);
}

std::vector<SensitivityRow> sensitivity_scan(double box_size,
                                             std::span<const double> shifts,
                                             const NwdConfig &cfg) {
  if (!(box_size > 0.0) || !std::isfinite(box_size)) {
    throw std::domain_error("sensitivity_scan: box_size must be positive");
  }
  const BBox base(0.0, 0.0, box_size, box_size);
  std::vector<SensitivityRow> rows;
  rows.reserve(shifts.size());
  for (double d : shifts) {
    const BBox shifted(d, d, box_size, box_size);
    rows.push_back({d, iou(base, shifted), nwd(base, shifted, cfg)});
  }
  return rows;
}

}  // namespace tinytarget::geometry
