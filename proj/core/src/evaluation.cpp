#include "tinytarget/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>

namespace tinytarget::evaluation {

namespace {

double criterion_value(const geometry::BBox &a, const geometry::BBox &b,
                       Criterion criterion, const geometry::NwdConfig &cfg) {
  return criterion == Criterion::iou ? geometry::iou(a, b)
                                     : geometry::nwd(a, b, cfg);
}

void validate_threshold(double threshold) {
  if (!(threshold >= 0.0) || !(threshold <= 1.0)) {
    throw std::domain_error("match threshold must lie in [0, 1]");
  }
}

// Detection indices in descending confidence order, ties by input order.
std::vector<int> ranked_indices(std::span<const Detection> detections) {
  std::vector<int> order(detections.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return detections[static_cast<size_t>(a)].confidence >
           detections[static_cast<size_t>(b)].confidence;
  });
  return order;
}

// image_id -> indices of that image's ground truths, insertion order kept.
std::map<std::string, std::vector<int>> group_ground_truths(
    std::span<const GroundTruth> gts) {
  std::map<std::string, std::vector<int>> by_image;
  for (size_t i = 0; i < gts.size(); ++i)
    by_image[gts[i].image_id].push_back(static_cast<int>(i));
  return by_image;
}

}  // namespace

Criterion parse_criterion(const std::string &name) {
  if (name == "iou") return Criterion::iou;
  if (name == "nwd") return Criterion::nwd;
  throw std::domain_error("unknown match criterion: " + name);
}

MatchResult match(std::span<const Detection> detections,
                  std::span<const GroundTruth> ground_truths,
                  Criterion criterion, double threshold,
                  const geometry::NwdConfig &nwd_cfg) {
  validate_threshold(threshold);
  const auto by_image = group_ground_truths(ground_truths);
  std::vector<bool> gt_taken(ground_truths.size(), false);

  MatchResult result;
  for (int di : ranked_indices(detections)) {
    const Detection &det = detections[static_cast<size_t>(di)];
    const auto it = by_image.find(det.image_id);
    int best_gt = -1;
    double best_value = 0.0;
    if (it != by_image.end()) {
      for (int gi : it->second) {
        if (gt_taken[static_cast<size_t>(gi)]) continue;
        const double value = criterion_value(
            det.box, ground_truths[static_cast<size_t>(gi)].box, criterion,
            nwd_cfg);
        if (value >= threshold && (best_gt < 0 || value > best_value)) {
          best_gt = gi;
          best_value = value;
        }
      }
    }
    if (best_gt >= 0) {
      gt_taken[static_cast<size_t>(best_gt)] = true;
      result.tp += 1;
      result.pairs.emplace_back(di, best_gt);
    } else {
      result.fp += 1;
    }
  }
  result.fn = static_cast<int>(ground_truths.size()) - result.tp;
  return result;
}

Prf precision_recall_f1(int tp, int fp, int fn) {
  if (tp < 0 || fp < 0 || fn < 0) {
    throw std::domain_error("precision_recall_f1: negative count");
  }
  Prf out;
  if (tp + fp > 0) out.precision = static_cast<double>(tp) / (tp + fp);
  if (tp + fn > 0) out.recall = static_cast<double>(tp) / (tp + fn);
  if (out.precision + out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

ApResult average_precision(std::span<const Detection> detections,
                           std::span<const GroundTruth> ground_truths,
                           Criterion criterion, double threshold,
                           const geometry::NwdConfig &nwd_cfg) {
  validate_threshold(threshold);
  ApResult result;
  result.empty_ground_truth = ground_truths.empty();

  const auto by_image = group_ground_truths(ground_truths);
  std::vector<bool> gt_taken(ground_truths.size(), false);
  const auto n_gt = static_cast<double>(ground_truths.size());

  int tp = 0, fp = 0;
  for (int di : ranked_indices(detections)) {
    const Detection &det = detections[static_cast<size_t>(di)];
    const auto it = by_image.find(det.image_id);
    int best_gt = -1;
    double best_value = 0.0;
    if (it != by_image.end()) {
      for (int gi : it->second) {
        if (gt_taken[static_cast<size_t>(gi)]) continue;
        const double value = criterion_value(
            det.box, ground_truths[static_cast<size_t>(gi)].box, criterion,
            nwd_cfg);
        if (value >= threshold && (best_gt < 0 || value > best_value)) {
          best_gt = gi;
          best_value = value;
        }
      }
    }
    if (best_gt >= 0) {
      gt_taken[static_cast<size_t>(best_gt)] = true;
      tp += 1;
    } else {
      fp += 1;
    }
    result.curve.push_back({det.confidence,
                            n_gt > 0.0 ? tp / n_gt : 0.0,
                            static_cast<double>(tp) / (tp + fp)});
  }

  if (result.empty_ground_truth || result.curve.empty()) return result;

  // Precision envelope over the ranking, integrated across recall steps.
  double ap = 0.0;
  double envelope = 0.0;
  double next_recall = result.curve.back().recall;
  for (auto it = result.curve.rbegin(); it != result.curve.rend(); ++it) {
    envelope = std::max(envelope, it->precision);
    const double prev_recall =
        std::next(it) == result.curve.rend() ? 0.0 : std::next(it)->recall;
    ap += (next_recall - prev_recall) * envelope;
    next_recall = prev_recall;
  }
  result.ap = ap;
  return result;
}

EvalReport evaluate(std::span<const Detection> detections,
                    std::span<const GroundTruth> ground_truths,
                    const EvalConfig &cfg) {
  if (!(cfg.confidence_cut >= 0.0) || !(cfg.confidence_cut <= 1.0)) {
    throw std::domain_error("evaluate: confidence cut must lie in [0, 1]");
  }
  std::vector<Detection> kept;
  kept.reserve(detections.size());
  for (const Detection &d : detections) {
    if (d.confidence >= cfg.confidence_cut) kept.push_back(d);
  }
  const MatchResult m =
      match(kept, ground_truths, cfg.criterion, cfg.threshold, cfg.nwd);
  const Prf prf = precision_recall_f1(m.tp, m.fp, m.fn);
  const ApResult ap = average_precision(detections, ground_truths,
                                        cfg.criterion, cfg.threshold, cfg.nwd);
  EvalReport report;
  report.tp = m.tp;
  report.fp = m.fp;
  report.fn = m.fn;
  report.precision = prf.precision;
  report.recall = prf.recall;
  report.f1 = prf.f1;
  report.ap = ap.ap;
  report.empty_ground_truth = ap.empty_ground_truth;
  return report;
}

void write_report(const EvalReport &report, std::ostream &out) {
  char buf[64];
  out << "tp " << report.tp << '\n';
  out << "fp " << report.fp << '\n';
  out << "fn " << report.fn << '\n';
  std::snprintf(buf, sizeof buf, "precision %.6f\n", report.precision);
  out << buf;
  std::snprintf(buf, sizeof buf, "recall %.6f\n", report.recall);
  out << buf;
  std::snprintf(buf, sizeof buf, "f1 %.6f\n", report.f1);
  out << buf;
  std::snprintf(buf, sizeof buf, "ap %.6f\n", report.ap);
  out << buf;
  if (report.empty_ground_truth) out << "warning empty_ground_truth\n";
}

void write_pr_curve_csv(std::span<const PrPoint> curve, std::ostream &out) {
  out << "confidence,recall,precision\n";
  char line[96];
  for (const PrPoint &p : curve) {
    std::snprintf(line, sizeof line, "%.6g,%.6g,%.6g\n", p.confidence,
                  p.recall, p.precision);
    out << line;
  }
}

}  // namespace tinytarget::evaluation
