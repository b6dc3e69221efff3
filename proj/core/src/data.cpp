#include "tinytarget/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tinytarget/errors.hpp"
#include "tinytarget/rng.hpp"

namespace tinytarget::data {

namespace fs = std::filesystem;

std::vector<geometry::BBox> mask_to_boxes(const Mask &mask) {
  if (mask.h <= 0 || mask.w <= 0 ||
      mask.on.size() != static_cast<size_t>(mask.h) * mask.w) {
    throw std::invalid_argument("mask_to_boxes: inconsistent mask shape");
  }
  std::vector<std::uint8_t> seen(mask.on.size(), 0);
  struct Bounds {
    int r0, c0, r1, c1;
  };
  std::vector<Bounds> components;
  std::vector<int> stack;
  for (int r = 0; r < mask.h; ++r) {
    for (int c = 0; c < mask.w; ++c) {
      const size_t idx = static_cast<size_t>(r) * mask.w + c;
      if (!mask.on[idx] || seen[idx]) continue;
      Bounds b{r, c, r, c};
      seen[idx] = 1;
      stack.push_back(static_cast<int>(idx));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cr = cur / mask.w, cc = cur % mask.w;
        b.r0 = std::min(b.r0, cr);
        b.c0 = std::min(b.c0, cc);
        b.r1 = std::max(b.r1, cr);
        b.c1 = std::max(b.c1, cc);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = cr + dr, nc = cc + dc;
            if (nr < 0 || nr >= mask.h || nc < 0 || nc >= mask.w) continue;
            const size_t nidx = static_cast<size_t>(nr) * mask.w + nc;
            if (mask.on[nidx] && !seen[nidx]) {
              seen[nidx] = 1;
              stack.push_back(static_cast<int>(nidx));
            }
          }
        }
      }
      components.push_back(b);
    }
  }
  std::sort(components.begin(), components.end(),
            [](const Bounds &a, const Bounds &b) {
              return a.r0 != b.r0 ? a.r0 < b.r0 : a.c0 < b.c0;
            });
  std::vector<geometry::BBox> boxes;
  boxes.reserve(components.size());
  for (const Bounds &b : components) {
    boxes.emplace_back((b.c0 + b.c1 + 1) / 2.0, (b.r0 + b.r1 + 1) / 2.0,
                       static_cast<double>(b.c1 - b.c0 + 1),
                       static_cast<double>(b.r1 - b.r0 + 1));
  }
  return boxes;
}

namespace {

void box_blur3(Image &img) {
  Image tmp = img;
  for (int r = 0; r < img.h; ++r) {
    for (int c = 0; c < img.w; ++c) {
      double sum = 0.0;
      int count = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int nr = r + dr, nc = c + dc;
          if (nr < 0 || nr >= img.h || nc < 0 || nc >= img.w) continue;
          sum += tmp.at(nr, nc);
          ++count;
        }
      }
      img.at(r, c) = sum / count;
    }
  }
}

bool boxes_disjoint_with_margin(const geometry::BBox &a,
                                const geometry::BBox &b, double margin) {
  return std::abs(a.cx - b.cx) >= (a.w + b.w) / 2.0 + margin ||
         std::abs(a.cy - b.cy) >= (a.h + b.h) / 2.0 + margin;
}

}  // namespace

Scene generate_scene(const SceneParams &params, std::uint64_t seed) {
  if (params.h < 8 || params.w < 8) {
    throw std::domain_error("generate_scene: image must be at least 8x8");
  }
  if (params.n_targets < 0) {
    throw std::domain_error("generate_scene: negative target count");
  }
  const double max_size = std::min(params.h, params.w) / 4.0;
  if (!(params.size_min >= 1.0) || !(params.size_min <= params.size_max) ||
      !(params.size_max <= max_size)) {
    throw std::domain_error(
        "generate_scene: target sizes must satisfy 1 <= min <= max <= "
        "min(h, w)/4");
  }
  if (!(params.noise_level >= 0.0) || !std::isfinite(params.noise_level)) {
    throw std::domain_error("generate_scene: noise_level must be >= 0");
  }

  std::mt19937_64 rng(seed);
  Scene scene;
  scene.seed = seed;
  scene.image.h = params.h;
  scene.image.w = params.w;
  scene.image.px.resize(static_cast<size_t>(params.h) * params.w);

  Image clutter{params.h, params.w,
                std::vector<double>(scene.image.px.size())};
  for (double &v : clutter.px) v = uniform_unit(rng);
  box_blur3(clutter);
  box_blur3(clutter);

  for (int r = 0; r < params.h; ++r) {
    for (int c = 0; c < params.w; ++c) {
      const double gradient =
          0.1 * (static_cast<double>(r) / (params.h - 1) +
                 static_cast<double>(c) / (params.w - 1)) / 2.0;
      scene.image.at(r, c) =
          0.15 + params.noise_level * (clutter.at(r, c) - 0.5) + gradient;
    }
  }

  constexpr int kMaxAttempts = 100;
  for (int i = 0; i < params.n_targets; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const double d = uniform_real(rng, params.size_min, params.size_max);
      const double cx = uniform_real(rng, d / 2.0, params.w - d / 2.0);
      const double cy = uniform_real(rng, d / 2.0, params.h - d / 2.0);
      const geometry::BBox candidate(cx, cy, d, d);
      placed = std::all_of(scene.targets.begin(), scene.targets.end(),
                           [&](const geometry::BBox &prev) {
                             return boxes_disjoint_with_margin(candidate, prev,
                                                               1.0);
                           });
      if (placed) scene.targets.push_back(candidate);
    }
    if (!placed) {
      throw std::runtime_error(
          "generate_scene: could not place target " + std::to_string(i) +
          " after " + std::to_string(kMaxAttempts) + " attempts");
    }
  }

  for (const geometry::BBox &box : scene.targets) {
    const double amplitude = uniform_real(rng, 0.45, 0.7);
    const double sigma = box.w / 4.0;
    const int r0 = std::max(0, static_cast<int>(std::floor(box.top())));
    const int r1 = std::min(params.h - 1,
                            static_cast<int>(std::ceil(box.bottom())));
    const int c0 = std::max(0, static_cast<int>(std::floor(box.left())));
    const int c1 = std::min(params.w - 1,
                            static_cast<int>(std::ceil(box.right())));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double x = c + 0.5, y = r + 0.5;
        if (x < box.left() || x > box.right() || y < box.top() ||
            y > box.bottom()) {
          continue;
        }
        const double dx = x - box.cx, dy = y - box.cy;
        scene.image.at(r, c) +=
            amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
    }
  }

  for (double &v : scene.image.px) v = std::clamp(v, 0.0, 1.0);
  return scene;
}

namespace {

geometry::BBox parse_normalized_box(double cx, double cy, double w, double h,
                                    const fs::path &path, int line_no) {
  const auto fail = [&](const char *why) -> geometry::BBox {
    std::ostringstream msg;
    msg << path.string() << ':' << line_no << ": " << why;
    throw parse_error(msg.str());
  };
  if (!(w > 0.0) || !(h > 0.0)) return fail("box extent must be positive");
  if (cx < 0.0 || cx > 1.0 || cy < 0.0 || cy > 1.0 || w > 1.0 || h > 1.0) {
    return fail("box coordinates must lie in [0, 1]");
  }
  return geometry::BBox(cx, cy, w, h);
}

// Parses one annotation-style file; expected_fields is 4 for plain boxes,
// 5 when a trailing confidence is required.
template <typename OnBox>
void parse_box_file(const fs::path &path, int expected_fields, OnBox &&on_box) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<double> values;
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (values.empty()) {
      // Trailing blank lines are tolerated; anything non-numeric is not.
      std::string rest;
      fields.clear();
      if (fields >> rest) {
        throw parse_error(path.string() + ':' + std::to_string(line_no) +
                          ": non-numeric field '" + rest + "'");
      }
      continue;
    }
    if (static_cast<int>(values.size()) != expected_fields ||
        !fields.eof()) {
      throw parse_error(path.string() + ':' + std::to_string(line_no) +
                        ": expected " + std::to_string(expected_fields) +
                        " numeric fields");
    }
    on_box(values, line_no);
  }
}

std::vector<fs::path> sorted_txt_files(const fs::path &dir) {
  if (!fs::is_directory(dir)) {
    throw io_error("not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

AnnotationRecord read_annotation_file(const fs::path &path) {
  AnnotationRecord record;
  record.image_id = path.stem().string();
  parse_box_file(path, 4, [&](const std::vector<double> &v, int line_no) {
    record.boxes.push_back(
        parse_normalized_box(v[0], v[1], v[2], v[3], path, line_no));
  });
  return record;
}

DetectionRecord read_detection_file(const fs::path &path) {
  DetectionRecord record;
  record.image_id = path.stem().string();
  parse_box_file(path, 5, [&](const std::vector<double> &v, int line_no) {
    if (v[4] < 0.0 || v[4] > 1.0) {
      throw parse_error(path.string() + ':' + std::to_string(line_no) +
                        ": confidence must lie in [0, 1]");
    }
    record.boxes.push_back(
        {parse_normalized_box(v[0], v[1], v[2], v[3], path, line_no), v[4]});
  });
  return record;
}

std::vector<AnnotationRecord> read_annotations(const fs::path &dir) {
  std::vector<AnnotationRecord> records;
  for (const fs::path &path : sorted_txt_files(dir)) {
    records.push_back(read_annotation_file(path));
  }
  return records;
}

std::vector<DetectionRecord> read_detection_records(const fs::path &dir) {
  std::vector<DetectionRecord> records;
  for (const fs::path &path : sorted_txt_files(dir)) {
    records.push_back(read_detection_file(path));
  }
  return records;
}

void write_annotations(const std::vector<AnnotationRecord> &records,
                       const fs::path &dir) {
  fs::create_directories(dir);
  for (const AnnotationRecord &record : records) {
    const fs::path path = dir / (record.image_id + ".txt");
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    char line[128];
    for (const geometry::BBox &b : record.boxes) {
      std::snprintf(line, sizeof line, "%.6f %.6f %.6f %.6f\n", b.cx, b.cy,
                    b.w, b.h);
      out << line;
    }
    if (!out) throw io_error("write failed: " + path.string());
  }
}

namespace {

// PGM header fields are whitespace-separated with '#' comments to
// end-of-line allowed anywhere between them.
int next_pgm_value(std::istream &in, const fs::path &path) {
  while (true) {
    const int ch = in.peek();
    if (ch == EOF) throw parse_error("truncated PGM header: " + path.string());
    if (ch == '#') {
      std::string comment;
      std::getline(in, comment);
      continue;
    }
    if (std::isspace(ch)) {
      in.get();
      continue;
    }
    break;
  }
  int value = 0;
  if (!(in >> value) || value < 0) {
    throw parse_error("bad PGM header value: " + path.string());
  }
  return value;
}

struct PgmData {
  int h = 0, w = 0, maxval = 0;
  std::vector<int> values;
};

PgmData read_pgm_data(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") {
    throw parse_error("unsupported PGM magic '" + magic + "': " +
                      path.string());
  }
  PgmData data;
  data.w = next_pgm_value(in, path);
  data.h = next_pgm_value(in, path);
  data.maxval = next_pgm_value(in, path);
  if (data.w <= 0 || data.h <= 0 || data.maxval <= 0 || data.maxval > 255) {
    throw parse_error("unsupported PGM dimensions or maxval: " +
                      path.string());
  }
  const size_t n = static_cast<size_t>(data.w) * data.h;
  data.values.resize(n);
  if (magic == "P5") {
    in.get();  // the single whitespace byte after maxval
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char *>(raw.data()),
            static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) {
      throw parse_error("truncated PGM pixels: " + path.string());
    }
    for (size_t i = 0; i < n; ++i) data.values[i] = raw[i];
  } else {
    for (size_t i = 0; i < n; ++i) {
      if (!(in >> data.values[i]) || data.values[i] < 0 ||
          data.values[i] > data.maxval) {
        throw parse_error("bad PGM pixel: " + path.string());
      }
    }
  }
  return data;
}

}  // namespace

Mask read_mask_pgm(const fs::path &path) {
  const PgmData data = read_pgm_data(path);
  Mask mask;
  mask.h = data.h;
  mask.w = data.w;
  mask.on.resize(data.values.size());
  for (size_t i = 0; i < data.values.size(); ++i) {
    mask.on[i] = data.values[i] >= 128 ? 1 : 0;
  }
  return mask;
}

Image read_pgm(const fs::path &path) {
  const PgmData data = read_pgm_data(path);
  Image img;
  img.h = data.h;
  img.w = data.w;
  img.px.resize(data.values.size());
  for (size_t i = 0; i < data.values.size(); ++i) {
    img.px[i] = static_cast<double>(data.values[i]) / data.maxval;
  }
  return img;
}

void write_pgm(const Image &img, const fs::path &path) {
  if (img.h <= 0 || img.w <= 0 ||
      img.px.size() != static_cast<size_t>(img.h) * img.w) {
    throw std::invalid_argument("write_pgm: inconsistent image shape");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << "P5\n" << img.w << ' ' << img.h << "\n255\n";
  std::vector<unsigned char> raw(img.px.size());
  for (size_t i = 0; i < img.px.size(); ++i) {
    const double v = std::clamp(img.px[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char *>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw io_error("write failed: " + path.string());
}

}  // namespace tinytarget::data
