#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tinytarget/geometry.hpp"

namespace tinytarget::data {

// Pixel (r, c) covers the unit square [c, c+1] x [r, r+1]; its center sits
// at (c + 0.5, r + 0.5). Boxes derived from masks follow this convention.

struct Mask {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> on;  // row-major, nonzero = foreground

  bool at(int r, int c) const { return on[static_cast<size_t>(r) * w + c] != 0; }
};

struct Image {
  int h = 0;
  int w = 0;
  std::vector<double> px;  // row-major intensities in [0, 1]

  double at(int r, int c) const { return px[static_cast<size_t>(r) * w + c]; }
  double &at(int r, int c) { return px[static_cast<size_t>(r) * w + c]; }
};

// Tight box per 8-connected foreground component, ordered by the component's
// (top row, then left column).
std::vector<geometry::BBox> mask_to_boxes(const Mask &mask);

struct SceneParams {
  int h = 64;
  int w = 64;
  int n_targets = 3;
  double size_min = 2.0;
  double size_max = 5.0;
  double noise_level = 0.3;  // clutter amplitude around the base background
};

struct Scene {
  Image image;
  std::vector<geometry::BBox> targets;  // pixel coordinates
  std::uint64_t seed = 0;
};

// Smoothed clutter plus a gentle gradient, with isotropic bright blobs whose
// enclosing boxes become the ground truth. Same seed, same scene, bit for
// bit. Throws if a target cannot be placed without overlap after bounded
// retries.
Scene generate_scene(const SceneParams &params, std::uint64_t seed);

// One annotation file per image: each line "cx cy w h", normalized to
// [0, 1] by image width and height.
struct AnnotationRecord {
  std::string image_id;
  std::vector<geometry::BBox> boxes;
};

// Detection files append a confidence column: "cx cy w h confidence".
struct ScoredBox {
  geometry::BBox box;
  double confidence;
};

struct DetectionRecord {
  std::string image_id;
  std::vector<ScoredBox> boxes;
};

// Reads every "*.txt" in dir (image_id = file stem), sorted by image_id.
std::vector<AnnotationRecord> read_annotations(
    const std::filesystem::path &dir);
std::vector<DetectionRecord> read_detection_records(
    const std::filesystem::path &dir);

AnnotationRecord read_annotation_file(const std::filesystem::path &path);
DetectionRecord read_detection_file(const std::filesystem::path &path);

// Writes "<image_id>.txt" per record, values with 6 decimals; round-trips
// losslessly at that precision.
void write_annotations(const std::vector<AnnotationRecord> &records,
                       const std::filesystem::path &dir);

// PGM, both ASCII (P2) and binary (P5), 8-bit. Masks threshold raw values
// at 128; images rescale by the stated maxval.
Mask read_mask_pgm(const std::filesystem::path &path);
Image read_pgm(const std::filesystem::path &path);
void write_pgm(const Image &img, const std::filesystem::path &path);

}  // namespace tinytarget::data
