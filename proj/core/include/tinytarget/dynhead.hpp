#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace tinytarget::dynhead {

// Dense level x spatial x channel feature stack. All levels share one
// height/width grid; spatial index s = row * width + col.
class FeatureTensor {
 public:
  FeatureTensor(int levels, int height, int width, int channels);

  double &at(int l, int s, int c) { return data_[index(l, s, c)]; }
  double at(int l, int s, int c) const { return data_[index(l, s, c)]; }

  int levels() const { return levels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  int spatial() const { return height_ * width_; }

  const std::vector<double> &data() const { return data_; }
  std::vector<double> &data() { return data_; }

  bool same_shape(const FeatureTensor &other) const;

  static FeatureTensor random(int levels, int height, int width, int channels,
                              std::uint64_t seed);

 private:
  int index(int l, int s, int c) const {
    return (l * spatial() + s) * channels_ + c;
  }

  int levels_, height_, width_, channels_;
  std::vector<double> data_;
};

// max(0, min(1, (x + 1) / 2)): saturates at 0 below -1 and at 1 above +1.
double hard_sigmoid(double x);

// Bilinear lookup of channel `channel` on level `level` at continuous grid
// coordinates (x = column, y = row), border-clamped. Integer coordinates
// reproduce stored values exactly.
double bilinear_sample(const FeatureTensor &f, int level, double x, double y,
                       int channel);

// Per-level gate: factor_l = hard_sigmoid(weight_l * mean_l + bias_l) where
// mean_l averages the level over space and channels.
struct ScaleParams {
  std::vector<double> weight;  // one per level
  std::vector<double> bias;    // one per level

  // weight 0, bias 1: the gate saturates at 1 for any input.
  static ScaleParams pass_through(int levels);
};

std::vector<double> scale_factors(const FeatureTensor &f,
                                  const ScaleParams &params);
FeatureTensor scale_attention(const FeatureTensor &f,
                              const ScaleParams &params);

// Deformable sampling fused across levels: per output location, K samples
// per level at (base offset + predicted offset), each scaled by a predicted
// modulation, combined with per-(level, sample) weights, averaged over
// levels, and broadcast to every output level. Offsets and modulations come
// from a linear map over the channels of one source level, so an identity
// configuration exists only for single-level tensors.
struct SpatialParams {
  std::vector<std::array<double, 2>> base_offsets;  // K x (dx, dy), pixels
  std::vector<double> predictor_weight;             // (3K) x C, row-major
  std::vector<double> predictor_bias;               // 3K: dx, dy, m per k
  std::vector<double> level_weights;                // L x K, row-major
  int offset_source_level = 0;

  int k() const { return static_cast<int>(base_offsets.size()); }

  // K = 1, zero offsets, unit modulation, unit weight: identity on L = 1.
  static SpatialParams identity(int channels);
  // K = 9 footprint over the 3x3 neighborhood, zero offset predictor, unit
  // modulation, uniform weights 1/K per level.
  static SpatialParams grid3x3(int levels, int channels);
};

FeatureTensor spatial_attention(const FeatureTensor &f,
                                const SpatialParams &params);

// Channel-wise piecewise-linear activation max(a1 * v + b1, a2 * v + b2),
// coefficients produced per channel by a hyperfunction: average-pool over
// levels and space, two fully connected layers, per-slot min-max shift to
// [-1, 1] across channels (constant slots pass through), then a clamp to
// [-1, 1].
struct TaskParams {
  int hidden = 0;
  std::vector<double> fc1_weight;  // hidden x C
  std::vector<double> fc1_bias;    // hidden
  std::vector<double> fc2_weight;  // 4C x hidden; row 4c + slot, slots
  std::vector<double> fc2_bias;    // 4C; order a1, a2, b1, b2 per channel

  // Zero weights with the bias arranged so every channel receives exactly
  // (a1, a2, b1, b2) regardless of the input.
  static TaskParams constant(int channels, double a1, double a2, double b1,
                             double b2, int hidden = 4);
  // constant(1, 1, 0, 0): max(v, v) = v.
  static TaskParams identity(int channels);
};

struct ChannelActivation {
  std::vector<double> a1, a2, b1, b2;  // one per channel
};

ChannelActivation task_hyper(const FeatureTensor &f, const TaskParams &params);
FeatureTensor task_activation(const FeatureTensor &f,
                              const ChannelActivation &act);
FeatureTensor task_attention(const FeatureTensor &f, const TaskParams &params);

// One attention block: scale, then spatial, then task.
struct DynHeadParams {
  ScaleParams scale;
  SpatialParams spatial;
  TaskParams task;

  // Exact identity for single-level tensors.
  static DynHeadParams identity(int channels);
  static DynHeadParams random(int levels, int channels, std::uint64_t seed,
                              int k = 9, int hidden = 8);
};

FeatureTensor block_forward(const FeatureTensor &f, const DynHeadParams &p);

// Blocks applied in sequence, no residual connections. Empty stack is the
// identity.
struct BlockStack {
  std::vector<DynHeadParams> blocks;

  int count() const { return static_cast<int>(blocks.size()); }

  static BlockStack identity(int count, int channels);
  static BlockStack random(int count, int levels, int channels,
                           std::uint64_t seed, int k = 9, int hidden = 8);
};

FeatureTensor forward(const FeatureTensor &f, const BlockStack &stack);

// Text serialization: a one-line magic/version header, stack dimensions,
// then per block a list of named integer fields and named tensors with
// explicit element counts. Values round-trip doubles exactly (%.17g).
void write_params(const BlockStack &stack, std::ostream &out);
BlockStack read_params(std::istream &in);

}  // namespace tinytarget::dynhead
