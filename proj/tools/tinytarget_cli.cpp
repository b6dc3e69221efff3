// Command-line front end for the tinytarget library: sensitivity scans,
// loss curves, synthetic data generation, mask conversion, toy training
// experiments, evaluation, and attention-stack inspection.
//
// Exit codes: 0 success, 1 domain error (bad values, failed invariants),
// 2 I/O or usage error (unreadable files, malformed input, bad flags).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tinytarget/data.hpp"
#include "tinytarget/dynhead.hpp"
#include "tinytarget/errors.hpp"
#include "tinytarget/evaluation.hpp"
#include "tinytarget/geometry.hpp"
#include "tinytarget/losses.hpp"
#include "tinytarget/trainer.hpp"

namespace fs = std::filesystem;
namespace tt = tinytarget;

namespace {

std::ofstream open_output(const fs::path &path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw tt::io_error("cannot write " + path.string());
  return out;
}

// Writes through `fn` to the named file, or to stdout when path is empty.
template <typename Fn>
void with_output(const std::string &path, Fn &&fn) {
  if (path.empty()) {
    fn(std::cout);
  } else {
    std::ofstream out = open_output(path);
    fn(out);
    if (!out) throw tt::io_error("write failed: " + path);
  }
}

tt::geometry::BBox box_from_values(const std::vector<double> &v,
                                   const char *flag) {
  if (v.size() != 4) {
    throw std::domain_error(std::string(flag) +
                            " expects exactly 4 values: cx cy w h");
  }
  return tt::geometry::BBox(v[0], v[1], v[2], v[3]);
}

struct SensitivityArgs {
  std::vector<double> sizes{4.0, 32.0};
  double max_shift = 4.0;
  double step = 1.0;
  double c = 11.0;
  std::string out;
};

void run_sensitivity(const SensitivityArgs &args) {
  if (!(args.step > 0.0) || !(args.max_shift >= 0.0)) {
    throw std::domain_error("sensitivity: step must be > 0, max-shift >= 0");
  }
  std::vector<double> shifts;
  for (double d = 0.0; d <= args.max_shift + 1e-12; d += args.step) {
    shifts.push_back(d);
  }
  const tt::geometry::NwdConfig cfg{args.c};
  with_output(args.out, [&](std::ostream &out) {
    out << "size,shift,iou,nwd\n";
    char line[128];
    for (double size : args.sizes) {
      for (const auto &row : tt::geometry::sensitivity_scan(size, shifts,
                                                            cfg)) {
        std::snprintf(line, sizeof line, "%g,%g,%.6g,%.6g\n", size, row.shift,
                      row.iou, row.nwd);
        out << line;
      }
    }
  });
}

struct LossCurveArgs {
  std::string loss;
  std::vector<double> gammas{2.0};
  double eta = 1.0;
  double lambda = 3.5;
  double threshold = 0.5;
  double p_hat_c = 0.5;
  int points = 200;
  std::string out;
};

// One output file per gamma for the gamma-bearing losses; a lone gamma (or
// a gamma-free loss) writes exactly --out, several derive suffixed names.
void run_loss_curves(const LossCurveArgs &args) {
  const tt::losses::LossId id = tt::losses::parse_loss_id(args.loss);
  const bool uses_gamma = id == tt::losses::LossId::focal ||
                          id == tt::losses::LossId::tfl;
  std::vector<double> gammas = uses_gamma ? args.gammas
                                          : std::vector<double>{2.0};
  if (gammas.empty()) {
    throw std::domain_error("loss-curves: need at least one --gamma");
  }
  for (size_t i = 0; i < gammas.size(); ++i) {
    tt::losses::CurveParams params;
    params.gamma = gammas[i];
    params.eta = args.eta;
    params.p_hat_c = args.p_hat_c;
    params.cfg = {args.lambda, args.threshold};
    const auto points = tt::losses::loss_curve(id, params, args.points);
    std::string out = args.out;
    if (gammas.size() > 1 && !out.empty()) {
      const fs::path p(out);
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_gamma%g", gammas[i]);
      out = (p.parent_path() /
             (p.stem().string() + suffix + p.extension().string()))
                .string();
    }
    with_output(out, [&](std::ostream &stream) {
      tt::losses::write_curve_csv(points, stream);
    });
  }
}

struct GenDataArgs {
  tt::data::SceneParams scene;
  int count = 1;
  std::uint64_t seed = 0;
  std::string out_dir;
};

void run_gen_data(const GenDataArgs &args) {
  if (args.count < 1) throw std::domain_error("gen-data: count must be >= 1");
  fs::create_directories(args.out_dir);
  std::vector<tt::data::AnnotationRecord> records;
  for (int i = 0; i < args.count; ++i) {
    const tt::data::Scene scene =
        tt::data::generate_scene(args.scene, args.seed + static_cast<std::uint64_t>(i));
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04d", i);
    tt::data::write_pgm(scene.image,
                        fs::path(args.out_dir) / (std::string(name) + ".pgm"));
    tt::data::AnnotationRecord record;
    record.image_id = name;
    for (const auto &b : scene.targets) {
      record.boxes.emplace_back(b.cx / args.scene.w, b.cy / args.scene.h,
                                b.w / args.scene.w, b.h / args.scene.h);
    }
    records.push_back(std::move(record));
  }
  tt::data::write_annotations(records, args.out_dir);
}

struct Mask2BoxArgs {
  std::string mask;
  std::string out;
};

void run_mask2box(const Mask2BoxArgs &args) {
  const tt::data::Mask mask = tt::data::read_mask_pgm(args.mask);
  const auto boxes = tt::data::mask_to_boxes(mask);
  with_output(args.out, [&](std::ostream &out) {
    char line[128];
    for (const auto &b : boxes) {
      std::snprintf(line, sizeof line, "%.6f %.6f %.6f %.6f\n",
                    b.cx / mask.w, b.cy / mask.h, b.w / mask.w, b.h / mask.h);
      out << line;
    }
  });
}

struct TrainToyArgs {
  std::string experiment = "imbalance";
  // imbalance
  std::vector<std::string> loss_names{"atfl"};
  int scenes = 20;
  tt::data::SceneParams scene{64, 64, 2, 2.0, 4.0, 0.35};
  int epochs = 300;
  double lr = 3.0;
  double gamma = 2.0;
  double lambda = 3.5;
  double threshold = 0.5;
  std::string out_dir;
  // box
  std::string metric = "nwd";
  std::vector<double> init{0.0, 0.0, 4.0, 4.0};
  std::vector<double> target{100.0, 100.0, 4.0, 4.0};
  int steps = 2000;
  double box_lr = 0.5;
  double c = 11.0;
  std::string out;
  std::uint64_t seed = 0;
};

void run_train_toy(const TrainToyArgs &args) {
  if (args.experiment == "imbalance") {
    if (args.out_dir.empty()) {
      throw std::domain_error("train-toy: --out-dir required for imbalance");
    }
    std::vector<tt::data::Scene> scenes;
    scenes.reserve(static_cast<size_t>(args.scenes));
    for (int i = 0; i < args.scenes; ++i) {
      scenes.push_back(tt::data::generate_scene(
          args.scene, args.seed + static_cast<std::uint64_t>(i)));
    }
    tt::trainer::ImbalanceParams params;
    params.epochs = args.epochs;
    params.lr = args.lr;
    params.focal_gamma = args.gamma;
    params.loss_cfg = {args.lambda, args.threshold};
    for (const std::string &name : args.loss_names) {
      const auto id = tt::losses::parse_loss_id(name);
      const auto log =
          tt::trainer::run_imbalance_experiment(id, scenes, params, args.seed);
      auto out = open_output(fs::path(args.out_dir) /
                             ("train_" + name + ".csv"));
      tt::trainer::write_csv(log, out);
    }
  } else if (args.experiment == "box") {
    const auto metric = args.metric == "iou"   ? tt::trainer::BoxMetric::iou
                        : args.metric == "nwd" ? tt::trainer::BoxMetric::nwd
                                               : throw std::domain_error(
                                                     "train-toy: metric must "
                                                     "be iou or nwd");
    tt::trainer::BoxExperimentParams params;
    params.steps = args.steps;
    params.lr = args.box_lr;
    params.nwd = {args.c};
    const auto log = tt::trainer::run_box_experiment(
        metric, box_from_values(args.init, "--init"),
        box_from_values(args.target, "--target"), params);
    with_output(args.out, [&](std::ostream &out) {
      tt::trainer::write_csv(log, out);
    });
  } else {
    throw std::domain_error("train-toy: experiment must be imbalance or box");
  }
}

struct EvaluateArgs {
  std::string dets_dir;
  std::string gts_dir;
  std::string criterion = "iou";
  double threshold = 0.5;
  double c = 11.0;
  double conf_cut = 0.25;
  double img_w = 1.0;
  double img_h = 1.0;
  std::string out;
  std::string pr_out;
};

void run_evaluate(const EvaluateArgs &args) {
  if (!(args.img_w > 0.0) || !(args.img_h > 0.0)) {
    throw std::domain_error("evaluate: image dimensions must be positive");
  }
  std::vector<tt::evaluation::Detection> detections;
  for (const auto &record : tt::data::read_detection_records(args.dets_dir)) {
    for (const auto &scored : record.boxes) {
      detections.push_back({tt::geometry::BBox(scored.box.cx * args.img_w,
                                               scored.box.cy * args.img_h,
                                               scored.box.w * args.img_w,
                                               scored.box.h * args.img_h),
                            scored.confidence, record.image_id});
    }
  }
  std::vector<tt::evaluation::GroundTruth> ground_truths;
  for (const auto &record : tt::data::read_annotations(args.gts_dir)) {
    for (const auto &box : record.boxes) {
      ground_truths.push_back({tt::geometry::BBox(box.cx * args.img_w,
                                                  box.cy * args.img_h,
                                                  box.w * args.img_w,
                                                  box.h * args.img_h),
                               record.image_id});
    }
  }
  tt::evaluation::EvalConfig cfg;
  cfg.criterion = tt::evaluation::parse_criterion(args.criterion);
  cfg.threshold = args.threshold;
  cfg.confidence_cut = args.conf_cut;
  cfg.nwd = {args.c};

  const auto report = tt::evaluation::evaluate(detections, ground_truths, cfg);
  tt::evaluation::write_report(report, std::cout);
  if (!args.out.empty()) {
    auto out = open_output(args.out);
    tt::evaluation::write_report(report, out);
  }
  if (!args.pr_out.empty()) {
    const auto ap = tt::evaluation::average_precision(
        detections, ground_truths, cfg.criterion, cfg.threshold, cfg.nwd);
    auto out = open_output(args.pr_out);
    tt::evaluation::write_pr_curve_csv(ap.curve, out);
  }
}

struct DynHeadArgs {
  int levels = 3;
  int height = 16;
  int width = 16;
  int channels = 16;
  int blocks = 4;
  int k = 9;
  int hidden = 8;
  std::uint64_t seed = 0;
  std::string params_in;
  std::string params_out;
  std::string out;
};

// Runs a seeded random feature stack through an attention stack (random by
// default, or loaded from --params-in) and reports per-level statistics.
void run_dynhead(const DynHeadArgs &args) {
  const auto input = tt::dynhead::FeatureTensor::random(
      args.levels, args.height, args.width, args.channels, args.seed);
  tt::dynhead::BlockStack stack;
  if (args.params_in.empty()) {
    stack = tt::dynhead::BlockStack::random(args.blocks, args.levels,
                                            args.channels, args.seed + 1,
                                            args.k, args.hidden);
  } else {
    std::ifstream in(args.params_in);
    if (!in) throw tt::io_error("cannot open " + args.params_in);
    stack = tt::dynhead::read_params(in);
  }
  if (!args.params_out.empty()) {
    auto out = open_output(args.params_out);
    tt::dynhead::write_params(stack, out);
  }
  const auto output = tt::dynhead::forward(input, stack);
  with_output(args.out, [&](std::ostream &out) {
    out << "level,mean,min,max\n";
    char line[128];
    for (int l = 0; l < output.levels(); ++l) {
      double sum = 0.0;
      double mn = output.at(l, 0, 0), mx = mn;
      for (int s = 0; s < output.spatial(); ++s) {
        for (int c = 0; c < output.channels(); ++c) {
          const double v = output.at(l, s, c);
          sum += v;
          mn = std::min(mn, v);
          mx = std::max(mx, v);
        }
      }
      const double mean =
          sum / (static_cast<double>(output.spatial()) * output.channels());
      std::snprintf(line, sizeof line, "%d,%.6g,%.6g,%.6g\n", l, mean, mn, mx);
      out << line;
    }
  });
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Small-target detection toolkit"};
  app.require_subcommand(1);
  // --h is a height flag on some subcommands, so help is long-form only.
  app.set_help_flag("--help", "Print help and exit");
  const auto subcommand = [&app](const char *name, const char *description) {
    CLI::App *cmd = app.add_subcommand(name, description);
    cmd->set_help_flag("--help", "Print help and exit");
    return cmd;
  };

  SensitivityArgs sens;
  auto *sens_cmd = subcommand(
      "sensitivity", "Overlap decay of iou and nwd under diagonal shifts");
  sens_cmd->add_option("--size", sens.sizes, "Square box sizes to scan")
      ->capture_default_str();
  sens_cmd->add_option("--max-shift", sens.max_shift, "Largest diagonal shift")
      ->capture_default_str();
  sens_cmd->add_option("--step", sens.step, "Shift increment")
      ->capture_default_str();
  sens_cmd->add_option("--c", sens.c, "nwd scale constant")
      ->capture_default_str();
  sens_cmd->add_option("--out", sens.out, "Output CSV (stdout if omitted)");
  sens_cmd->callback([&] { run_sensitivity(sens); });

  LossCurveArgs curves;
  auto *curves_cmd = subcommand(
      "loss-curves", "Loss value as a function of the target probability");
  curves_cmd->add_option("--loss", curves.loss, "One of bce|focal|tfl|atfl")
      ->required()
      ->check(CLI::IsMember({"bce", "focal", "tfl", "atfl"}));
  curves_cmd->add_option("--gamma", curves.gammas,
                         "Easy-branch exponent(s); one output per value")
      ->capture_default_str();
  curves_cmd->add_option("--eta", curves.eta, "Hard-branch exponent for tfl")
      ->capture_default_str();
  curves_cmd->add_option("--lambda", curves.lambda, "Hard-branch scale")
      ->capture_default_str();
  curves_cmd->add_option("--threshold", curves.threshold,
                         "Hard/easy split point")
      ->capture_default_str();
  curves_cmd->add_option("--p-hat-c", curves.p_hat_c,
                         "Smoothed mean target probability for atfl")
      ->capture_default_str();
  curves_cmd->add_option("--points", curves.points, "Samples per curve")
      ->capture_default_str();
  curves_cmd->add_option("--out", curves.out, "Output CSV (stdout if omitted)");
  curves_cmd->callback([&] { run_loss_curves(curves); });

  GenDataArgs gen;
  auto *gen_cmd = subcommand(
      "gen-data", "Generate synthetic scenes with annotations");
  gen_cmd->add_option("--h", gen.scene.h, "Image height")
      ->capture_default_str();
  gen_cmd->add_option("--w", gen.scene.w, "Image width")
      ->capture_default_str();
  gen_cmd->add_option("--n-targets", gen.scene.n_targets, "Targets per scene")
      ->capture_default_str();
  gen_cmd->add_option("--size-min", gen.scene.size_min, "Smallest target size")
      ->capture_default_str();
  gen_cmd->add_option("--size-max", gen.scene.size_max, "Largest target size")
      ->capture_default_str();
  gen_cmd->add_option("--noise", gen.scene.noise_level, "Clutter amplitude")
      ->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of scenes")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Base seed; scene i uses seed + i")
      ->envname("TINYTARGET_SEED")
      ->capture_default_str();
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")
      ->required();
  gen_cmd->callback([&] { run_gen_data(gen); });

  Mask2BoxArgs m2b;
  auto *m2b_cmd = subcommand(
      "mask2box", "Extract normalized boxes from a PGM mask");
  m2b_cmd->add_option("--mask", m2b.mask, "Input PGM mask (P2 or P5)")
      ->required();
  m2b_cmd->add_option("--out", m2b.out,
                      "Output annotation file (stdout if omitted)");
  m2b_cmd->callback([&] { run_mask2box(m2b); });

  TrainToyArgs toy;
  auto *toy_cmd = subcommand(
      "train-toy", "Desk-scale training experiments");
  toy_cmd->add_option("--experiment", toy.experiment, "imbalance or box")
      ->capture_default_str()
      ->check(CLI::IsMember({"imbalance", "box"}));
  toy_cmd->add_option("--loss", toy.loss_names,
                      "Losses to train (bce|focal|atfl); one log per loss")
      ->capture_default_str()
      ->check(CLI::IsMember({"bce", "focal", "atfl"}));
  toy_cmd->add_option("--scenes", toy.scenes, "Scene count")
      ->capture_default_str();
  toy_cmd->add_option("--h", toy.scene.h, "Scene height")
      ->capture_default_str();
  toy_cmd->add_option("--w", toy.scene.w, "Scene width")
      ->capture_default_str();
  toy_cmd->add_option("--n-targets", toy.scene.n_targets, "Targets per scene")
      ->capture_default_str();
  toy_cmd->add_option("--size-min", toy.scene.size_min, "Smallest target size")
      ->capture_default_str();
  toy_cmd->add_option("--size-max", toy.scene.size_max, "Largest target size")
      ->capture_default_str();
  toy_cmd->add_option("--noise", toy.scene.noise_level, "Clutter amplitude")
      ->capture_default_str();
  toy_cmd->add_option("--epochs", toy.epochs, "Training epochs")
      ->capture_default_str();
  toy_cmd->add_option("--lr", toy.lr, "Learning rate (imbalance)")
      ->capture_default_str();
  toy_cmd->add_option("--gamma", toy.gamma, "focal easy-branch exponent")
      ->capture_default_str();
  toy_cmd->add_option("--lambda", toy.lambda, "Hard-branch scale")
      ->capture_default_str();
  toy_cmd->add_option("--threshold", toy.threshold, "Hard/easy split point")
      ->capture_default_str();
  toy_cmd->add_option("--out-dir", toy.out_dir,
                      "Output directory for imbalance logs");
  toy_cmd->add_option("--metric", toy.metric, "Box experiment metric")
      ->capture_default_str()
      ->check(CLI::IsMember({"iou", "nwd"}));
  toy_cmd->add_option("--init", toy.init, "Initial box: cx cy w h")
      ->expected(4);
  toy_cmd->add_option("--target", toy.target, "Target box: cx cy w h")
      ->expected(4);
  toy_cmd->add_option("--steps", toy.steps, "Box experiment steps")
      ->capture_default_str();
  toy_cmd->add_option("--box-lr", toy.box_lr, "Box experiment step length")
      ->capture_default_str();
  toy_cmd->add_option("--c", toy.c, "nwd scale constant")
      ->capture_default_str();
  toy_cmd->add_option("--out", toy.out,
                      "Box experiment CSV (stdout if omitted)");
  toy_cmd->add_option("--seed", toy.seed, "Scene and init seed")
      ->envname("TINYTARGET_SEED")
      ->capture_default_str();
  toy_cmd->callback([&] { run_train_toy(toy); });

  EvaluateArgs eval;
  auto *eval_cmd = subcommand(
      "evaluate", "Score detections against ground truth");
  eval_cmd->add_option("--dets", eval.dets_dir,
                       "Directory of detection files (cx cy w h confidence)")
      ->required();
  eval_cmd->add_option("--gts", eval.gts_dir,
                       "Directory of annotation files (cx cy w h)")
      ->required();
  eval_cmd->add_option("--criterion", eval.criterion, "iou or nwd")
      ->capture_default_str()
      ->check(CLI::IsMember({"iou", "nwd"}));
  eval_cmd->add_option("--threshold", eval.threshold, "Match threshold")
      ->capture_default_str();
  eval_cmd->add_option("--c", eval.c, "nwd scale constant")
      ->capture_default_str();
  eval_cmd->add_option("--conf-cut", eval.conf_cut,
                       "Confidence cut for precision/recall/f1")
      ->capture_default_str();
  eval_cmd->add_option("--img-w", eval.img_w,
                       "Width used to denormalize coordinates")
      ->capture_default_str();
  eval_cmd->add_option("--img-h", eval.img_h,
                       "Height used to denormalize coordinates")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Also write the report here");
  eval_cmd->add_option("--pr-out", eval.pr_out, "Write the PR curve CSV here");
  eval_cmd->callback([&] { run_evaluate(eval); });

  DynHeadArgs dyn;
  auto *dyn_cmd = subcommand(
      "dynhead", "Run a seeded feature stack through attention blocks");
  dyn_cmd->add_option("--levels", dyn.levels, "Pyramid levels")
      ->capture_default_str();
  dyn_cmd->add_option("--height", dyn.height, "Grid height")
      ->capture_default_str();
  dyn_cmd->add_option("--width", dyn.width, "Grid width")
      ->capture_default_str();
  dyn_cmd->add_option("--channels", dyn.channels, "Channels")
      ->capture_default_str();
  dyn_cmd->add_option("--blocks", dyn.blocks, "Attention block count")
      ->capture_default_str();
  dyn_cmd->add_option("--k", dyn.k, "Spatial samples per location")
      ->capture_default_str();
  dyn_cmd->add_option("--hidden", dyn.hidden, "Task hyperfunction width")
      ->capture_default_str();
  dyn_cmd->add_option("--seed", dyn.seed, "Feature and parameter seed")
      ->envname("TINYTARGET_SEED")
      ->capture_default_str();
  dyn_cmd->add_option("--params-in", dyn.params_in,
                      "Load block parameters instead of sampling them");
  dyn_cmd->add_option("--params-out", dyn.params_out,
                      "Write the block parameters used");
  dyn_cmd->add_option("--out", dyn.out,
                      "Per-level stats CSV (stdout if omitted)");
  dyn_cmd->callback([&] { run_dynhead(dyn); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const tt::io_error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
