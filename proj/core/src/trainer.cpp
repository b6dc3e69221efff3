#include "tinytarget/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

#include "tinytarget/rng.hpp"

namespace tinytarget::trainer {

std::vector<std::array<double, kPixelFeatures>> compute_pixel_features(
    const data::Image &img) {
  std::vector<std::array<double, kPixelFeatures>> features(
      static_cast<size_t>(img.h) * img.w);
  for (int r = 0; r < img.h; ++r) {
    for (int c = 0; c < img.w; ++c) {
      const double center = img.at(r, c);
      double sum = 0.0, neighbor_sum = 0.0, mx = center;
      int count = 0, neighbor_count = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int nr = r + dr, nc = c + dc;
          if (nr < 0 || nr >= img.h || nc < 0 || nc >= img.w) continue;
          const double v = img.at(nr, nc);
          sum += v;
          ++count;
          mx = std::max(mx, v);
          if (dr != 0 || dc != 0) {
            neighbor_sum += v;
            ++neighbor_count;
          }
        }
      }
      auto &f = features[static_cast<size_t>(r) * img.w + c];
      f[0] = center;
      f[1] = sum / count;
      f[2] = mx;
      f[3] = neighbor_count > 0 ? center - neighbor_sum / neighbor_count : 0.0;
    }
  }
  return features;
}

std::vector<std::uint8_t> positive_mask(const data::Scene &scene) {
  std::vector<std::uint8_t> mask(
      static_cast<size_t>(scene.image.h) * scene.image.w, 0);
  for (int r = 0; r < scene.image.h; ++r) {
    for (int c = 0; c < scene.image.w; ++c) {
      const double x = c + 0.5, y = r + 0.5;
      for (const geometry::BBox &box : scene.targets) {
        if (x >= box.left() && x <= box.right() && y >= box.top() &&
            y <= box.bottom()) {
          mask[static_cast<size_t>(r) * scene.image.w + c] = 1;
          break;
        }
      }
    }
  }
  return mask;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// d loss / d p_t for the supported experiment losses, evaluated away from
// the atfl branch point by nudging onto its hard side (the side the
// boundary itself belongs to).
double loss_grad_pt(losses::LossId loss, double p_t, double gamma,
                    double p_hat_c, const losses::LossConfig &cfg) {
  switch (loss) {
    case losses::LossId::bce:
      return -1.0 / p_t;
    case losses::LossId::focal: {
      const double om = 1.0 - p_t;
      return gamma * std::pow(om, gamma - 1.0) * std::log(p_t) -
             std::pow(om, gamma) / p_t;
    }
    case losses::LossId::atfl: {
      double p = p_t;
      if (std::abs(p - cfg.threshold) < 1e-9) p = cfg.threshold - 1e-9;
      return losses::atfl_grad(p, p_hat_c, cfg);
    }
    default:
      throw std::domain_error(
          "run_imbalance_experiment: loss must be bce, focal, or atfl");
  }
}

double loss_value(losses::LossId loss, double p, bool y, double gamma,
                  double p_hat_c, const losses::LossConfig &cfg) {
  const double p_t = y ? p : 1.0 - p;
  switch (loss) {
    case losses::LossId::bce:
      return losses::bce(p, y);
    case losses::LossId::focal:
      return losses::focal(p_t, gamma);
    case losses::LossId::atfl:
      return losses::atfl(p_t, p_hat_c, cfg);
    default:
      throw std::domain_error(
          "run_imbalance_experiment: loss must be bce, focal, or atfl");
  }
}

}  // namespace

TrainLog run_imbalance_experiment(losses::LossId loss,
                                  std::span<const data::Scene> scenes,
                                  const ImbalanceParams &params,
                                  std::uint64_t seed) {
  if (scenes.empty()) {
    throw std::domain_error("run_imbalance_experiment: no scenes");
  }
  if (params.epochs < 0 || !(params.lr > 0.0)) {
    throw std::domain_error(
        "run_imbalance_experiment: epochs must be >= 0 and lr positive");
  }
  losses::validate(params.loss_cfg);

  std::vector<std::array<double, kPixelFeatures>> features;
  std::vector<std::uint8_t> labels;
  for (const data::Scene &scene : scenes) {
    auto scene_features = compute_pixel_features(scene.image);
    features.insert(features.end(), scene_features.begin(),
                    scene_features.end());
    const auto mask = positive_mask(scene);
    labels.insert(labels.end(), mask.begin(), mask.end());
  }
  const size_t n = features.size();

  std::mt19937_64 rng(seed);
  std::array<double, kPixelFeatures + 1> weights;  // last entry is the bias
  for (double &w : weights) w = uniform_real(rng, -0.01, 0.01);

  losses::SmoothingState smoothing(params.initial_p_hat_c);
  TrainLog log;

  for (int epoch = 0; epoch <= params.epochs; ++epoch) {
    const double p_hat_c = smoothing.p_hat_c();
    std::array<double, kPixelFeatures + 1> grad{};
    double loss_sum = 0.0;
    double positive_p_sum = 0.0;
    long positives = 0;
    long tp = 0, fp = 0, fn = 0;

    for (size_t i = 0; i < n; ++i) {
      const auto &f = features[i];
      const bool y = labels[i] != 0;
      double z = weights[kPixelFeatures];
      for (int j = 0; j < kPixelFeatures; ++j) z += weights[j] * f[j];
      const double p = losses::clamp_probability(sigmoid(z));
      const double p_t = y ? p : 1.0 - p;

      loss_sum += loss_value(loss, p, y, params.focal_gamma, p_hat_c,
                             params.loss_cfg);
      const double dldpt = loss_grad_pt(loss, p_t, params.focal_gamma,
                                        p_hat_c, params.loss_cfg);
      const double dldz = dldpt * (y ? 1.0 : -1.0) * p * (1.0 - p);
      for (int j = 0; j < kPixelFeatures; ++j) grad[j] += dldz * f[j];
      grad[kPixelFeatures] += dldz;

      if (y) {
        ++positives;
        positive_p_sum += p;
        (p >= params.pixel_threshold ? tp : fn) += 1;
      } else if (p >= params.pixel_threshold) {
        ++fp;
      }
    }

    const double mean_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(mean_loss)) {
      throw std::runtime_error(
          "run_imbalance_experiment: loss diverged at epoch " +
          std::to_string(epoch));
    }
    const double mean_positive_p =
        positives > 0 ? positive_p_sum / static_cast<double>(positives) : 0.0;
    const double recall =
        tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                    : 0.0;
    const double precision =
        tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                    : 0.0;

    if (epoch > 0 && loss == losses::LossId::atfl && positives > 0) {
      smoothing.update(losses::clamp_probability(mean_positive_p));
    }
    log.epochs.push_back({epoch, mean_loss, mean_positive_p,
                          smoothing.p_hat_c(), recall, precision});
    if (epoch == params.epochs) break;

    for (int j = 0; j <= kPixelFeatures; ++j) {
      weights[j] -= params.lr * grad[j] / static_cast<double>(n);
    }
  }
  return log;
}

namespace {

geometry::BBox box_from_params(const std::array<double, 4> &q) {
  return geometry::BBox(q[0], q[1], std::exp(q[2]), std::exp(q[3]));
}

std::array<double, 4> params_from_box(const geometry::BBox &b) {
  return {b.cx, b.cy, std::log(b.w), std::log(b.h)};
}

double metric_value(BoxMetric metric, const geometry::BBox &a,
                    const geometry::BBox &b, const geometry::NwdConfig &cfg) {
  return metric == BoxMetric::iou ? geometry::iou(a, b)
                                  : geometry::nwd(a, b, cfg);
}

}  // namespace

std::array<double, 4> nwd_loss_grad(const geometry::BBox &current,
                                    const geometry::BBox &target,
                                    const geometry::NwdConfig &cfg) {
  const double d = geometry::wasserstein2_sq(current, target);
  if (d < 1e-24) return {0.0, 0.0, 0.0, 0.0};
  const double value = std::exp(-std::sqrt(d) / cfg.c);
  // d(1 - m)/dq = m / (2 c sqrt(d)) * dd/dq
  const double scale = value / (2.0 * cfg.c * std::sqrt(d));
  const double dw = (current.w - target.w) / 2.0;
  const double dh = (current.h - target.h) / 2.0;
  return {scale * 2.0 * (current.cx - target.cx),
          scale * 2.0 * (current.cy - target.cy),
          scale * dw * current.w,
          scale * dh * current.h};
}

std::array<double, 4> numeric_metric_grad(BoxMetric metric,
                                          const geometry::BBox &current,
                                          const geometry::BBox &target,
                                          const geometry::NwdConfig &cfg,
                                          double h) {
  if (!(h > 0.0)) {
    throw std::domain_error("numeric_metric_grad: step must be positive");
  }
  const std::array<double, 4> q = params_from_box(current);
  std::array<double, 4> grad{};
  for (int j = 0; j < 4; ++j) {
    std::array<double, 4> hi = q, lo = q;
    hi[j] += h;
    lo[j] -= h;
    grad[j] = (metric_value(metric, box_from_params(hi), target, cfg) -
               metric_value(metric, box_from_params(lo), target, cfg)) /
              (2.0 * h);
  }
  return grad;
}

BoxLog run_box_experiment(BoxMetric metric, const geometry::BBox &init,
                          const geometry::BBox &target,
                          const BoxExperimentParams &params) {
  if (params.steps < 0 || !(params.lr > 0.0)) {
    throw std::domain_error(
        "run_box_experiment: steps must be >= 0 and lr positive");
  }
  std::array<double, 4> q = params_from_box(init);
  BoxLog log;
  log.steps.push_back(
      {0, metric_value(metric, box_from_params(q), target, params.nwd)});

  for (int step = 1; step <= params.steps; ++step) {
    // Loss is 1 - metric, so descend along -d(metric).
    std::array<double, 4> grad{};
    if (metric == BoxMetric::nwd) {
      grad = nwd_loss_grad(box_from_params(q), target, params.nwd);
    } else {
      const auto g =
          numeric_metric_grad(metric, box_from_params(q), target, params.nwd);
      for (int j = 0; j < 4; ++j) grad[j] = -g[j];
    }
    const double norm = std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] +
                                  grad[2] * grad[2] + grad[3] * grad[3]);
    // Below this the "gradient" is central-difference rounding noise (at the
    // metric's own optimum it is ~1e-11); a normalized step on noise would
    // walk away from stationary points instead of holding them.
    if (norm >= 1e-9) {
      for (int j = 0; j < 4; ++j) q[j] -= params.lr * grad[j] / norm;
    }
    log.steps.push_back(
        {step, metric_value(metric, box_from_params(q), target, params.nwd)});
  }
  return log;
}

void write_csv(const TrainLog &log, std::ostream &out) {
  out << "epoch,loss,recall,precision,p_hat_c\n";
  char line[160];
  for (const EpochStats &row : log.epochs) {
    std::snprintf(line, sizeof line, "%d,%.6g,%.6g,%.6g,%.6g\n", row.epoch,
                  row.loss, row.recall, row.precision, row.p_hat_c);
    out << line;
  }
}

void write_csv(const BoxLog &log, std::ostream &out) {
  out << "step,metric_value\n";
  char line[64];
  for (const BoxStepRow &row : log.steps) {
    std::snprintf(line, sizeof line, "%d,%.6g\n", row.step, row.metric_value);
    out << line;
  }
}

}  // namespace tinytarget::trainer
