#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tinytarget::losses {

// Probabilities are clamped to [kProbEps, 1 - kProbEps] before any log so
// loss values stay finite; inputs outside the open interval (0, 1) are
// rejected outright.
inline constexpr double kProbEps = 1e-7;

double clamp_probability(double p);

// Shared threshold-loss parameters. lambda must exceed 1 so the hard-branch
// modulation (lambda - p_t)^eta amplifies instead of damping; threshold
// splits hard from easy samples, boundary inclusive on the hard side.
struct LossConfig {
  double lambda = 3.5;
  double threshold = 0.5;
};

void validate(const LossConfig &cfg);

// -log p_t with p_t = p for positive labels, 1 - p for negatives.
double bce(double p, bool y);

// -(1 - p_t)^gamma * log p_t. gamma = 0 recovers bce on p_t exactly.
double focal(double p_t, double gamma);

// Threshold split: hard samples (p_t <= threshold) get the amplifying factor
// (lambda - p_t)^eta, easy ones keep the focal factor (1 - p_t)^gamma.
double tfl(double p_t, double eta, double gamma, const LossConfig &cfg = {});

// Adaptive exponents: gamma from the smoothed mean target probability,
// eta from the sample's own p_t.
double adaptive_gamma(double p_hat_c);
double adaptive_eta(double p_t);

// tfl with both exponents adaptive. Identical to
// tfl(p_t, adaptive_eta(p_t), adaptive_gamma(p_hat_c), cfg) by construction.
double atfl(double p_t, double p_hat_c, const LossConfig &cfg = {});

// d atfl / d p_t at fixed p_hat_c. The hard-branch exponent -ln p_t moves
// with p_t, so the chain rule runs through it. Undefined at the branch
// point; calls within 1e-9 of the threshold are rejected.
double atfl_grad(double p_t, double p_hat_c, const LossConfig &cfg = {});

// Exponentially smoothed mean of per-epoch mean target probabilities:
// after each completed epoch, p_hat_c = 0.05 * mean(previous epoch means)
// + 0.95 * current mean; the first update yields the current mean itself.
class SmoothingState {
 public:
  explicit SmoothingState(double initial_p_hat_c = 0.5);

  void update(double current_epoch_mean);

  // Value for the next epoch: the initializer until the first update.
  double p_hat_c() const { return p_hat_c_; }
  const std::vector<double> &epoch_means() const { return epoch_means_; }

 private:
  std::vector<double> epoch_means_;
  double history_mean_ = 0.0;  // running mean, exact on constant sequences
  double p_hat_c_;
};

enum class LossId { bce, focal, tfl, atfl };

// Parse {"bce","focal","tfl","atfl"}; anything else throws std::domain_error.
LossId parse_loss_id(const std::string &name);
const char *loss_id_name(LossId id);

struct CurveParams {
  double gamma = 2.0;
  double eta = 1.0;
  double p_hat_c = 0.5;
  LossConfig cfg;
};

struct CurvePoint {
  double p_t;
  double loss;
};

// n_points >= 2 samples of the selected loss, evenly spaced over
// [kProbEps, 1 - kProbEps]. bce is evaluated as a function of p_t.
std::vector<CurvePoint> loss_curve(LossId id, const CurveParams &params,
                                   int n_points);

// CSV dump, header "p_t,loss", 6 significant digits.
void write_curve_csv(std::span<const CurvePoint> points, std::ostream &out);

}  // namespace tinytarget::losses
