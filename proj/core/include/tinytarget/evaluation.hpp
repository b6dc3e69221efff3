#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tinytarget/geometry.hpp"

namespace tinytarget::evaluation {

enum class Criterion { iou, nwd };

Criterion parse_criterion(const std::string &name);

struct Detection {
  geometry::BBox box;
  double confidence;
  std::string image_id;
};

struct GroundTruth {
  geometry::BBox box;
  std::string image_id;
};

struct MatchResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  // (detection index, ground-truth index) pairs into the input spans.
  std::vector<std::pair<int, int>> pairs;
};

// One-to-one greedy matching per image: detections in descending confidence
// order (ties by input order) each claim the unmatched ground truth with the
// highest criterion value, provided that value reaches the threshold.
MatchResult match(std::span<const Detection> detections,
                  std::span<const GroundTruth> ground_truths,
                  Criterion criterion, double threshold,
                  const geometry::NwdConfig &nwd_cfg = {});

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Zero whenever the corresponding denominator is zero.
Prf precision_recall_f1(int tp, int fp, int fn);

struct PrPoint {
  double confidence;
  double recall;
  double precision;
};

struct ApResult {
  double ap = 0.0;
  bool empty_ground_truth = false;
  std::vector<PrPoint> curve;  // one point per detection, best first
};

// All-point interpolated average precision: sweep the confidence ranking,
// take the running precision envelope, integrate over recall.
ApResult average_precision(std::span<const Detection> detections,
                           std::span<const GroundTruth> ground_truths,
                           Criterion criterion, double threshold,
                           const geometry::NwdConfig &nwd_cfg = {});

struct EvalConfig {
  Criterion criterion = Criterion::iou;
  double threshold = 0.5;
  double confidence_cut = 0.25;  // operating point for precision/recall/f1
  geometry::NwdConfig nwd;
};

struct EvalReport {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ap = 0.0;
  bool empty_ground_truth = false;
};

// Counts and P/R/F1 at the confidence cut; AP over the full ranking.
EvalReport evaluate(std::span<const Detection> detections,
                    std::span<const GroundTruth> ground_truths,
                    const EvalConfig &cfg = {});

// Plain "key value" lines, reals with 6 decimals.
void write_report(const EvalReport &report, std::ostream &out);

// CSV dump, header "confidence,recall,precision", 6 significant digits.
void write_pr_curve_csv(std::span<const PrPoint> curve, std::ostream &out);

}  // namespace tinytarget::evaluation
