#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tinytarget/data.hpp"
#include "tinytarget/geometry.hpp"
#include "tinytarget/losses.hpp"

namespace tinytarget::trainer {

// Per-pixel features for the linear classifier: raw intensity, 3x3 local
// mean, 3x3 local max (windows clipped at borders), and local contrast
// (center minus the clipped 8-neighborhood mean). A bias term is implicit.
inline constexpr int kPixelFeatures = 4;

std::vector<std::array<double, kPixelFeatures>> compute_pixel_features(
    const data::Image &img);

// 1 where the pixel center falls inside any target box.
std::vector<std::uint8_t> positive_mask(const data::Scene &scene);

struct ImbalanceParams {
  int epochs = 300;
  double lr = 3.0;
  double focal_gamma = 2.0;
  losses::LossConfig loss_cfg;
  double initial_p_hat_c = 0.5;   // used by atfl until the first epoch ends
  double pixel_threshold = 0.5;   // predicted-positive cut for recall stats
};

struct EpochStats {
  int epoch;
  double loss;             // full-batch mean, weights before this epoch's step
  double mean_positive_p;  // mean predicted probability on target pixels
  double p_hat_c;          // smoothed value after this epoch's update
  double recall;
  double precision;
};

struct TrainLog {
  std::vector<EpochStats> epochs;  // row 0 is the initial state
};

// Full-batch gradient descent of a 4-feature logistic pixel classifier on
// heavily imbalanced scenes. loss selects bce, focal, or atfl; atfl updates
// its smoothing state once per epoch from the mean predicted probability on
// target pixels. Throws on a non-finite loss, naming the epoch.
TrainLog run_imbalance_experiment(losses::LossId loss,
                                  std::span<const data::Scene> scenes,
                                  const ImbalanceParams &params,
                                  std::uint64_t seed);

enum class BoxMetric { iou, nwd };

struct BoxExperimentParams {
  int steps = 2000;
  double lr = 0.5;  // step length; directions are unit normalized
  geometry::NwdConfig nwd;
};

struct BoxStepRow {
  int step;
  double metric_value;
};

struct BoxLog {
  std::vector<BoxStepRow> steps;  // row 0 is the initial value
};

// Single-box regression toward a fixed target, parameters (cx, cy, ln w,
// ln h), loss 1 - metric. Steps follow the unit-normalized gradient scaled
// by lr; a gradient below 1e-9 in magnitude (finite-difference noise level)
// leaves the box untouched, so a flat metric (disjoint-box iou) certifiably
// goes nowhere and optima hold. The iou gradient is numeric (central
// differences), the nwd gradient analytic.
BoxLog run_box_experiment(BoxMetric metric, const geometry::BBox &init,
                          const geometry::BBox &target,
                          const BoxExperimentParams &params = {});

// d(1 - nwd)/d(cx, cy, ln w, ln h), zero at the target itself.
std::array<double, 4> nwd_loss_grad(const geometry::BBox &current,
                                    const geometry::BBox &target,
                                    const geometry::NwdConfig &cfg = {});

// Central-difference gradient of the raw metric in the same parameter
// space; h is the half step.
std::array<double, 4> numeric_metric_grad(BoxMetric metric,
                                          const geometry::BBox &current,
                                          const geometry::BBox &target,
                                          const geometry::NwdConfig &cfg = {},
                                          double h = 1e-6);

// CSV, header "epoch,loss,recall,precision,p_hat_c", 6 significant digits.
void write_csv(const TrainLog &log, std::ostream &out);
// CSV, header "step,metric_value", 6 significant digits.
void write_csv(const BoxLog &log, std::ostream &out);

}  // namespace tinytarget::trainer
