#include "tinytarget/dynhead.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>

#include "tinytarget/errors.hpp"
#include "tinytarget/rng.hpp"

namespace tinytarget::dynhead {

namespace {

void check(bool ok, const char *msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

FeatureTensor::FeatureTensor(int levels, int height, int width, int channels)
    : levels_(levels), height_(height), width_(width), channels_(channels) {
  check(levels >= 1 && height >= 1 && width >= 1 && channels >= 1,
        "FeatureTensor: all dimensions must be >= 1");
  data_.assign(static_cast<size_t>(levels) * height * width * channels, 0.0);
}

bool FeatureTensor::same_shape(const FeatureTensor &other) const {
  return levels_ == other.levels_ && height_ == other.height_ &&
         width_ == other.width_ && channels_ == other.channels_;
}

FeatureTensor FeatureTensor::random(int levels, int height, int width,
                                    int channels, std::uint64_t seed) {
  FeatureTensor f(levels, height, width, channels);
  std::mt19937_64 rng(seed);
  for (double &v : f.data_) v = uniform_real(rng, -1.0, 1.0);
  return f;
}

double hard_sigmoid(double x) {
  return std::max(0.0, std::min(1.0, (x + 1.0) / 2.0));
}

double bilinear_sample(const FeatureTensor &f, int level, double x, double y,
                       int channel) {
  check(level >= 0 && level < f.levels(), "bilinear_sample: level range");
  check(channel >= 0 && channel < f.channels(),
        "bilinear_sample: channel range");
  const int w = f.width(), h = f.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = f.at(level, y0 * w + x0, channel);
  const double v01 = f.at(level, y0 * w + x1, channel);
  const double v10 = f.at(level, y1 * w + x0, channel);
  const double v11 = f.at(level, y1 * w + x1, channel);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) +
         fy * ((1.0 - fx) * v10 + fx * v11);
}

ScaleParams ScaleParams::pass_through(int levels) {
  ScaleParams p;
  p.weight.assign(static_cast<size_t>(levels), 0.0);
  p.bias.assign(static_cast<size_t>(levels), 1.0);
  return p;
}

std::vector<double> scale_factors(const FeatureTensor &f,
                                  const ScaleParams &params) {
  const auto levels = static_cast<size_t>(f.levels());
  check(params.weight.size() == levels && params.bias.size() == levels,
        "scale_factors: params sized for a different level count");
  std::vector<double> factors(levels);
  const double inv = 1.0 / (static_cast<double>(f.spatial()) * f.channels());
  for (int l = 0; l < f.levels(); ++l) {
    double sum = 0.0;
    for (int s = 0; s < f.spatial(); ++s)
      for (int c = 0; c < f.channels(); ++c) sum += f.at(l, s, c);
    factors[l] = hard_sigmoid(params.weight[l] * (sum * inv) + params.bias[l]);
  }
  return factors;
}

FeatureTensor scale_attention(const FeatureTensor &f,
                              const ScaleParams &params) {
  const std::vector<double> factors = scale_factors(f, params);
  FeatureTensor out = f;
  for (int l = 0; l < f.levels(); ++l)
    for (int s = 0; s < f.spatial(); ++s)
      for (int c = 0; c < f.channels(); ++c) out.at(l, s, c) *= factors[l];
  return out;
}

SpatialParams SpatialParams::identity(int channels) {
  SpatialParams p;
  p.base_offsets = {{0.0, 0.0}};
  p.predictor_weight.assign(static_cast<size_t>(3) * channels, 0.0);
  p.predictor_bias = {0.0, 0.0, 1.0};
  p.level_weights = {1.0};
  p.offset_source_level = 0;
  return p;
}

SpatialParams SpatialParams::grid3x3(int levels, int channels) {
  SpatialParams p;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      p.base_offsets.push_back({static_cast<double>(dx),
                                static_cast<double>(dy)});
  const int k = p.k();
  p.predictor_weight.assign(static_cast<size_t>(3) * k * channels, 0.0);
  p.predictor_bias.assign(static_cast<size_t>(3) * k, 0.0);
  for (int i = 0; i < k; ++i) p.predictor_bias[3 * i + 2] = 1.0;
  p.level_weights.assign(static_cast<size_t>(levels) * k, 1.0 / k);
  p.offset_source_level = (levels - 1) / 2;
  return p;
}

FeatureTensor spatial_attention(const FeatureTensor &f,
                                const SpatialParams &params) {
  const int L = f.levels(), C = f.channels(), W = f.width();
  const int K = params.k();
  check(K >= 1, "spatial_attention: need at least one sample offset");
  check(params.predictor_weight.size() == static_cast<size_t>(3) * K * C,
        "spatial_attention: predictor weight shape");
  check(params.predictor_bias.size() == static_cast<size_t>(3) * K,
        "spatial_attention: predictor bias shape");
  check(params.level_weights.size() == static_cast<size_t>(L) * K,
        "spatial_attention: level weight shape");
  check(params.offset_source_level >= 0 && params.offset_source_level < L,
        "spatial_attention: offset source level out of range");

  FeatureTensor out(L, f.height(), W, C);
  std::vector<double> pred(static_cast<size_t>(3) * K);
  std::vector<double> acc(static_cast<size_t>(C));
  for (int s = 0; s < f.spatial(); ++s) {
    const int row = s / W, col = s % W;
    for (int j = 0; j < 3 * K; ++j) {
      double v = params.predictor_bias[j];
      for (int c = 0; c < C; ++c)
        v += params.predictor_weight[static_cast<size_t>(j) * C + c] *
             f.at(params.offset_source_level, s, c);
      pred[j] = v;
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int l = 0; l < L; ++l) {
      for (int k = 0; k < K; ++k) {
        const double wlk = params.level_weights[static_cast<size_t>(l) * K + k];
        const double m = pred[3 * k + 2];
        if (wlk == 0.0 || m == 0.0) continue;
        const double x = col + params.base_offsets[k][0] + pred[3 * k];
        const double y = row + params.base_offsets[k][1] + pred[3 * k + 1];
        const double scale = wlk * m;
        for (int c = 0; c < C; ++c)
          acc[c] += scale * bilinear_sample(f, l, x, y, c);
      }
    }
    for (double &v : acc) v /= L;
    for (int l = 0; l < L; ++l)
      for (int c = 0; c < C; ++c) out.at(l, s, c) = acc[c];
  }
  return out;
}

TaskParams TaskParams::constant(int channels, double a1, double a2, double b1,
                                double b2, int hidden) {
  check(channels >= 1 && hidden >= 1, "TaskParams: bad dimensions");
  TaskParams p;
  p.hidden = hidden;
  p.fc1_weight.assign(static_cast<size_t>(hidden) * channels, 0.0);
  p.fc1_bias.assign(static_cast<size_t>(hidden), 0.0);
  p.fc2_weight.assign(static_cast<size_t>(4) * channels * hidden, 0.0);
  p.fc2_bias.resize(static_cast<size_t>(4) * channels);
  for (int c = 0; c < channels; ++c) {
    p.fc2_bias[4 * c + 0] = a1;
    p.fc2_bias[4 * c + 1] = a2;
    p.fc2_bias[4 * c + 2] = b1;
    p.fc2_bias[4 * c + 3] = b2;
  }
  return p;
}

TaskParams TaskParams::identity(int channels) {
  return constant(channels, 1.0, 1.0, 0.0, 0.0);
}

ChannelActivation task_hyper(const FeatureTensor &f, const TaskParams &params) {
  const int C = f.channels();
  const int H = params.hidden;
  check(H >= 1, "task_hyper: hidden width must be >= 1");
  check(params.fc1_weight.size() == static_cast<size_t>(H) * C,
        "task_hyper: fc1 weight shape");
  check(params.fc1_bias.size() == static_cast<size_t>(H),
        "task_hyper: fc1 bias shape");
  check(params.fc2_weight.size() == static_cast<size_t>(4) * C * H,
        "task_hyper: fc2 weight shape");
  check(params.fc2_bias.size() == static_cast<size_t>(4) * C,
        "task_hyper: fc2 bias shape");

  std::vector<double> pooled(static_cast<size_t>(C), 0.0);
  for (int l = 0; l < f.levels(); ++l)
    for (int s = 0; s < f.spatial(); ++s)
      for (int c = 0; c < C; ++c) pooled[c] += f.at(l, s, c);
  const double inv = 1.0 / (static_cast<double>(f.levels()) * f.spatial());
  for (double &v : pooled) v *= inv;

  std::vector<double> hid(static_cast<size_t>(H));
  for (int i = 0; i < H; ++i) {
    double v = params.fc1_bias[i];
    for (int c = 0; c < C; ++c)
      v += params.fc1_weight[static_cast<size_t>(i) * C + c] * pooled[c];
    hid[i] = relu(v);
  }

  std::vector<double> raw(static_cast<size_t>(4) * C);
  for (int j = 0; j < 4 * C; ++j) {
    double v = params.fc2_bias[j];
    for (int i = 0; i < H; ++i)
      v += params.fc2_weight[static_cast<size_t>(j) * H + i] * hid[i];
    raw[j] = v;
  }

  // Min-max shift to [-1, 1] per coefficient slot across channels; a slot
  // with no spread passes through so constant configurations mean what they
  // say. The final clamp bounds every coefficient either way.
  for (int slot = 0; slot < 4; ++slot) {
    double mn = raw[slot], mx = raw[slot];
    for (int c = 1; c < C; ++c) {
      mn = std::min(mn, raw[4 * c + slot]);
      mx = std::max(mx, raw[4 * c + slot]);
    }
    if (mx > mn) {
      for (int c = 0; c < C; ++c) {
        double &v = raw[4 * c + slot];
        v = 2.0 * (v - mn) / (mx - mn) - 1.0;
      }
    }
  }
  ChannelActivation act;
  act.a1.resize(C);
  act.a2.resize(C);
  act.b1.resize(C);
  act.b2.resize(C);
  for (int c = 0; c < C; ++c) {
    act.a1[c] = std::clamp(raw[4 * c + 0], -1.0, 1.0);
    act.a2[c] = std::clamp(raw[4 * c + 1], -1.0, 1.0);
    act.b1[c] = std::clamp(raw[4 * c + 2], -1.0, 1.0);
    act.b2[c] = std::clamp(raw[4 * c + 3], -1.0, 1.0);
  }
  return act;
}

FeatureTensor task_activation(const FeatureTensor &f,
                              const ChannelActivation &act) {
  const auto channels = static_cast<size_t>(f.channels());
  check(act.a1.size() == channels && act.a2.size() == channels &&
            act.b1.size() == channels && act.b2.size() == channels,
        "task_activation: activation sized for a different channel count");
  FeatureTensor out = f;
  for (int l = 0; l < f.levels(); ++l)
    for (int s = 0; s < f.spatial(); ++s)
      for (int c = 0; c < f.channels(); ++c) {
        const double v = f.at(l, s, c);
        out.at(l, s, c) = std::max(act.a1[c] * v + act.b1[c],
                                   act.a2[c] * v + act.b2[c]);
      }
  return out;
}

FeatureTensor task_attention(const FeatureTensor &f, const TaskParams &params) {
  return task_activation(f, task_hyper(f, params));
}

DynHeadParams DynHeadParams::identity(int channels) {
  return DynHeadParams{ScaleParams::pass_through(1),
                       SpatialParams::identity(channels),
                       TaskParams::identity(channels)};
}

DynHeadParams DynHeadParams::random(int levels, int channels,
                                    std::uint64_t seed, int k, int hidden) {
  check(levels >= 1 && channels >= 1 && k >= 1 && hidden >= 1,
        "DynHeadParams::random: bad dimensions");
  std::mt19937_64 rng(seed);
  DynHeadParams p;

  p.scale.weight.resize(static_cast<size_t>(levels));
  p.scale.bias.resize(static_cast<size_t>(levels));
  for (double &v : p.scale.weight) v = uniform_real(rng, -0.5, 0.5);
  for (double &v : p.scale.bias) v = uniform_real(rng, -0.5, 0.5);

  if (k == 9) {
    p.spatial = SpatialParams::grid3x3(levels, channels);
  } else {
    for (int i = 0; i < k; ++i)
      p.spatial.base_offsets.push_back(
          {uniform_real(rng, -1.0, 1.0), uniform_real(rng, -1.0, 1.0)});
    p.spatial.predictor_weight.assign(static_cast<size_t>(3) * k * channels,
                                      0.0);
    p.spatial.predictor_bias.assign(static_cast<size_t>(3) * k, 0.0);
    p.spatial.level_weights.assign(static_cast<size_t>(levels) * k, 0.0);
    p.spatial.offset_source_level = (levels - 1) / 2;
  }
  for (double &v : p.spatial.predictor_weight)
    v = uniform_real(rng, -0.05, 0.05);
  for (int i = 0; i < k; ++i) {
    p.spatial.predictor_bias[3 * i + 0] = uniform_real(rng, -0.25, 0.25);
    p.spatial.predictor_bias[3 * i + 1] = uniform_real(rng, -0.25, 0.25);
    p.spatial.predictor_bias[3 * i + 2] = uniform_real(rng, 0.5, 1.5);
  }
  for (double &v : p.spatial.level_weights)
    v = uniform_real(rng, 0.0, 2.0 / k);

  p.task.hidden = hidden;
  p.task.fc1_weight.resize(static_cast<size_t>(hidden) * channels);
  p.task.fc1_bias.resize(static_cast<size_t>(hidden));
  p.task.fc2_weight.resize(static_cast<size_t>(4) * channels * hidden);
  p.task.fc2_bias.resize(static_cast<size_t>(4) * channels);
  for (double &v : p.task.fc1_weight) v = uniform_real(rng, -0.3, 0.3);
  for (double &v : p.task.fc1_bias) v = uniform_real(rng, -0.1, 0.1);
  for (double &v : p.task.fc2_weight) v = uniform_real(rng, -0.3, 0.3);
  for (double &v : p.task.fc2_bias) v = uniform_real(rng, -0.5, 0.5);
  return p;
}

FeatureTensor block_forward(const FeatureTensor &f, const DynHeadParams &p) {
  return task_attention(spatial_attention(scale_attention(f, p.scale),
                                          p.spatial),
                        p.task);
}

BlockStack BlockStack::identity(int count, int channels) {
  check(count >= 0, "BlockStack: negative count");
  BlockStack s;
  s.blocks.assign(static_cast<size_t>(count), DynHeadParams::identity(channels));
  return s;
}

BlockStack BlockStack::random(int count, int levels, int channels,
                              std::uint64_t seed, int k, int hidden) {
  check(count >= 0, "BlockStack: negative count");
  BlockStack s;
  s.blocks.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i)
    s.blocks.push_back(
        DynHeadParams::random(levels, channels, seed + 0x9e3779b9u * (i + 1),
                              k, hidden));
  return s;
}

FeatureTensor forward(const FeatureTensor &f, const BlockStack &stack) {
  FeatureTensor cur = f;
  for (const DynHeadParams &p : stack.blocks) cur = block_forward(cur, p);
  return cur;
}

namespace {

constexpr char kMagic[] = "tinytarget-dynhead";
constexpr int kVersion = 1;

void write_tensor(std::ostream &out, const char *name,
                  std::span<const double> values) {
  out << "tensor " << name << ' ' << values.size() << '\n';
  char buf[32];
  for (size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", values[i]);
    out << buf << ((i + 1) % 8 == 0 || i + 1 == values.size() ? '\n' : ' ');
  }
}

[[noreturn]] void bad_params(const std::string &detail) {
  throw parse_error("dynhead params: " + detail);
}

std::string next_token(std::istream &in) {
  std::string tok;
  if (!(in >> tok)) bad_params("unexpected end of input");
  return tok;
}

void expect(std::istream &in, const std::string &want) {
  const std::string got = next_token(in);
  if (got != want) bad_params("expected '" + want + "', got '" + got + "'");
}

long read_count(std::istream &in) {
  long n = 0;
  if (!(in >> n) || n < 0) bad_params("bad count");
  return n;
}

std::vector<double> read_tensor(std::istream &in, const std::string &name) {
  expect(in, "tensor");
  expect(in, name);
  const long n = read_count(in);
  std::vector<double> values(static_cast<size_t>(n));
  for (double &v : values) {
    if (!(in >> v)) bad_params("truncated tensor '" + name + "'");
  }
  return values;
}

int read_int_field(std::istream &in, const std::string &name) {
  expect(in, "int");
  expect(in, name);
  int v = 0;
  if (!(in >> v)) bad_params("bad int field '" + name + "'");
  return v;
}

}  // namespace

void write_params(const BlockStack &stack, std::ostream &out) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "blocks " << stack.count() << '\n';
  for (int i = 0; i < stack.count(); ++i) {
    const DynHeadParams &p = stack.blocks[static_cast<size_t>(i)];
    out << "block " << i << '\n';
    out << "int offset_source_level " << p.spatial.offset_source_level << '\n';
    out << "int hidden " << p.task.hidden << '\n';
    write_tensor(out, "scale.weight", p.scale.weight);
    write_tensor(out, "scale.bias", p.scale.bias);
    std::vector<double> flat_offsets;
    flat_offsets.reserve(p.spatial.base_offsets.size() * 2);
    for (const auto &o : p.spatial.base_offsets) {
      flat_offsets.push_back(o[0]);
      flat_offsets.push_back(o[1]);
    }
    write_tensor(out, "spatial.base_offsets", flat_offsets);
    write_tensor(out, "spatial.predictor_weight", p.spatial.predictor_weight);
    write_tensor(out, "spatial.predictor_bias", p.spatial.predictor_bias);
    write_tensor(out, "spatial.level_weights", p.spatial.level_weights);
    write_tensor(out, "task.fc1_weight", p.task.fc1_weight);
    write_tensor(out, "task.fc1_bias", p.task.fc1_bias);
    write_tensor(out, "task.fc2_weight", p.task.fc2_weight);
    write_tensor(out, "task.fc2_bias", p.task.fc2_bias);
  }
  if (!out) throw io_error("dynhead params: write failed");
}

BlockStack read_params(std::istream &in) {
  expect(in, kMagic);
  if (read_count(in) != kVersion) bad_params("unsupported version");
  expect(in, "blocks");
  const long count = read_count(in);
  BlockStack stack;
  stack.blocks.reserve(static_cast<size_t>(count));
  for (long i = 0; i < count; ++i) {
    expect(in, "block");
    if (read_count(in) != i) bad_params("block index out of order");
    DynHeadParams p;
    p.spatial.offset_source_level = read_int_field(in, "offset_source_level");
    p.task.hidden = read_int_field(in, "hidden");
    p.scale.weight = read_tensor(in, "scale.weight");
    p.scale.bias = read_tensor(in, "scale.bias");
    const std::vector<double> flat = read_tensor(in, "spatial.base_offsets");
    if (flat.size() % 2 != 0) bad_params("odd base_offsets length");
    for (size_t j = 0; j < flat.size(); j += 2)
      p.spatial.base_offsets.push_back({flat[j], flat[j + 1]});
    p.spatial.predictor_weight = read_tensor(in, "spatial.predictor_weight");
    p.spatial.predictor_bias = read_tensor(in, "spatial.predictor_bias");
    p.spatial.level_weights = read_tensor(in, "spatial.level_weights");
    p.task.fc1_weight = read_tensor(in, "task.fc1_weight");
    p.task.fc1_bias = read_tensor(in, "task.fc1_bias");
    p.task.fc2_weight = read_tensor(in, "task.fc2_weight");
    p.task.fc2_bias = read_tensor(in, "task.fc2_bias");
    stack.blocks.push_back(std::move(p));
  }
  return stack;
}

}  // namespace tinytarget::dynhead
