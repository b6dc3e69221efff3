#include "tinytarget/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace tinytarget::losses {

namespace {

void require_open_unit(double p, const char *name) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw std::domain_error(std::string(name) + " must lie in (0, 1)");
  }
}

}  // namespace

double clamp_probability(double p) {
  return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

void validate(const LossConfig &cfg) {
  if (!(cfg.lambda > 1.0) || !std::isfinite(cfg.lambda)) {
    throw std::domain_error("LossConfig: lambda must exceed 1");
  }
  if (!(cfg.threshold > 0.0) || !(cfg.threshold < 1.0)) {
    throw std::domain_error("LossConfig: threshold must lie in (0, 1)");
  }
}

double bce(double p, bool y) {
  require_open_unit(p, "bce: p");
  const double p_t = clamp_probability(y ? p : 1.0 - p);
  return -std::log(p_t);
}

double focal(double p_t, double gamma) {
  require_open_unit(p_t, "focal: p_t");
  if (gamma < 0.0 || !std::isfinite(gamma)) {
    throw std::domain_error("focal: gamma must be >= 0");
  }
  const double p = clamp_probability(p_t);
  return -std::pow(1.0 - p, gamma) * std::log(p);
}

double tfl(double p_t, double eta, double gamma, const LossConfig &cfg) {
  require_open_unit(p_t, "tfl: p_t");
  if (eta < 0.0 || !std::isfinite(eta)) {
    throw std::domain_error("tfl: eta must be >= 0");
  }
  if (gamma < 0.0 || !std::isfinite(gamma)) {
    throw std::domain_error("tfl: gamma must be >= 0");
  }
  validate(cfg);
  const double p = clamp_probability(p_t);
  if (p <= cfg.threshold) {
    return -std::pow(cfg.lambda - p, eta) * std::log(p);
  }
  return -std::pow(1.0 - p, gamma) * std::log(p);
}

double adaptive_gamma(double p_hat_c) {
  require_open_unit(p_hat_c, "adaptive_gamma: p_hat_c");
  return -std::log(clamp_probability(p_hat_c));
}

double adaptive_eta(double p_t) {
  require_open_unit(p_t, "adaptive_eta: p_t");
  return -std::log(clamp_probability(p_t));
}

double atfl(double p_t, double p_hat_c, const LossConfig &cfg) {
  return tfl(p_t, adaptive_eta(p_t), adaptive_gamma(p_hat_c), cfg);
}

double atfl_grad(double p_t, double p_hat_c, const LossConfig &cfg) {
  require_open_unit(p_t, "atfl_grad: p_t");
  require_open_unit(p_hat_c, "atfl_grad: p_hat_c");
  validate(cfg);
  if (std::abs(p_t - cfg.threshold) < 1e-9) {
    throw std::domain_error(
        "atfl_grad: undefined at the hard/easy branch point");
  }
  const double p = clamp_probability(p_t);
  const double log_p = std::log(p);
  if (p <= cfg.threshold) {
    // L = -(lambda - p)^(-ln p) * ln p = -exp(u) * ln p,
    // u = -ln p * ln(lambda - p).
    const double base = cfg.lambda - p;
    const double factor = std::pow(base, -log_p);
    const double du = -std::log(base) / p + log_p / base;
    return -factor * (du * log_p + 1.0 / p);
  }
  // L = -(1 - p)^g * ln p with g fixed by p_hat_c.
  const double g = adaptive_gamma(p_hat_c);
  const double om = 1.0 - p;
  return g * std::pow(om, g - 1.0) * log_p - std::pow(om, g) / p;
}

SmoothingState::SmoothingState(double initial_p_hat_c)
    : p_hat_c_(initial_p_hat_c) {
  require_open_unit(initial_p_hat_c, "SmoothingState: initial_p_hat_c");
}

void SmoothingState::update(double current_epoch_mean) {
  require_open_unit(current_epoch_mean, "SmoothingState: epoch mean");
  if (epoch_means_.empty()) {
    p_hat_c_ = current_epoch_mean;
  } else {
    // current + 0.05 * (mean - current) rather than the textbook weighted
    // sum: exact when every observed mean equals the current one.
    p_hat_c_ =
        current_epoch_mean + 0.05 * (history_mean_ - current_epoch_mean);
  }
  epoch_means_.push_back(current_epoch_mean);
  const auto n = static_cast<double>(epoch_means_.size());
  history_mean_ += (current_epoch_mean - history_mean_) / n;
}

LossId parse_loss_id(const std::string &name) {
  if (name == "bce") return LossId::bce;
  if (name == "focal") return LossId::focal;
  if (name == "tfl") return LossId::tfl;
  if (name == "atfl") return LossId::atfl;
  throw std::domain_error("unknown loss id: " + name);
}

const char *loss_id_name(LossId id) {
  switch (id) {
    case LossId::bce:
      return "bce";
    case LossId::focal:
      return "focal";
    case LossId::tfl:
      return "tfl";
    case LossId::atfl:
      return "atfl";
  }
  throw std::domain_error("unknown loss id");
}

std::vector<CurvePoint> loss_curve(LossId id, const CurveParams &params,
                                   int n_points) {
  if (n_points < 2) {
    throw std::domain_error("loss_curve: need at least 2 points");
  }
  const double lo = kProbEps;
  const double hi = 1.0 - kProbEps;
  std::vector<CurvePoint> points;
  points.reserve(static_cast<size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double p_t = lo + (hi - lo) * i / (n_points - 1);
    double loss = 0.0;
    switch (id) {
      case LossId::bce:
        loss = -std::log(clamp_probability(p_t));
        break;
      case LossId::focal:
        loss = focal(p_t, params.gamma);
        break;
      case LossId::tfl:
        loss = tfl(p_t, params.eta, params.gamma, params.cfg);
        break;
      case LossId::atfl:
        loss = atfl(p_t, params.p_hat_c, params.cfg);
        break;
    }
    points.push_back({p_t, loss});
  }
  return points;
}

void write_curve_csv(std::span<const CurvePoint> points, std::ostream &out) {
  out << "p_t,loss\n";
  char line[80];
  for (const auto &pt : points) {
    std::snprintf(line, sizeof line, "%.6g,%.6g\n", pt.p_t, pt.loss);
    out << line;
  }
}

}  // namespace tinytarget::losses
