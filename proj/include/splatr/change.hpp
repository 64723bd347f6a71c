#pragma once

// Patch-wise feature comparison between an observation and a rendered goal view,
// grouping of dissimilar patches into regions, and false-positive concept filtering.

#include "splatr/core.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace splatr::change {

struct PatchFeatureGrid {
  int rows = 0, cols = 0, dim = 0;
  std::vector<float> data;  // rows * cols * dim, row-major

  PatchFeatureGrid() = default;
  PatchFeatureGrid(int r, int c, int d) : rows(r), cols(c), dim(d), data(static_cast<size_t>(r) * c * d, 0.0f) {}
  std::span<float> at(int r, int c) { return {data.data() + (static_cast<size_t>(r) * cols + c) * dim, static_cast<size_t>(dim)}; }
  std::span<const float> at(int r, int c) const {
    return {data.data() + (static_cast<size_t>(r) * cols + c) * dim, static_cast<size_t>(dim)};
  }
  void validate() const;
};

/// Row-major grid of per-patch values.
template <class T>
struct Grid {
  int rows = 0, cols = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int r, int c, T fill = T{}) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}
  T& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

/// Dense patch descriptors for an image.
class FeatureBackend {
 public:
  virtual ~FeatureBackend() = default;
  virtual int patch_size() const = 0;
  virtual int dim() const = 0;
  /// `key` names the frame for backends that load precomputed features.
  virtual PatchFeatureGrid extract(const ImageRGB& image, const std::string& key) const = 0;
};

/// Soft color histogram (4 levels per channel) plus a magnitude-weighted 8-bin gradient
/// orientation histogram per patch, each part unit-normalized.
class SyntheticFeatureBackend : public FeatureBackend {
 public:
  explicit SyntheticFeatureBackend(int patch_size = 8, double gradient_weight = 0.5);
  int patch_size() const override { return patch_size_; }
  int dim() const override { return 64 + 8; }
  PatchFeatureGrid extract(const ImageRGB& image, const std::string& key) const override;

 private:
  int patch_size_;
  double gradient_weight_;
};

/// Reads `<dir>/<key>.spltemb` files. The stored grid must match the padded image.
class FileFeatureBackend : public FeatureBackend {
 public:
  FileFeatureBackend(std::filesystem::path dir, int patch_size, int dim);
  int patch_size() const override { return patch_size_; }
  int dim() const override { return dim_; }
  PatchFeatureGrid extract(const ImageRGB& image, const std::string& key) const override;

 private:
  std::filesystem::path dir_;
  int patch_size_, dim_;
};

/// Image-region embedding used for nodes and concept filtering.
class RegionEmbedder {
 public:
  virtual ~RegionEmbedder() = default;
  virtual int dim() const = 0;
  virtual std::vector<double> embed(const ImageRGB& image, const Mask& mask) const = 0;
};

/// Unit-normalized soft histogram of rg chromaticity (r/(r+g+b), g/(r+g+b)) over the masked
/// pixels, 10x10 bins with a Gaussian kernel. Shading does not change it; dark pixels count less.
class ColorHistogramEmbedder : public RegionEmbedder {
 public:
  static constexpr int kChromaBins = 10;
  int dim() const override { return kChromaBins * kChromaBins; }
  std::vector<double> embed(const ImageRGB& image, const Mask& mask) const override;
  /// Embedding of a patch of uniform color.
  std::vector<double> embed_color(const Vec3& rgb) const;
};

struct ConceptTable {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> embeddings;

  void add(std::string label, std::vector<double> embedding);  // normalizes
  /// Throws InvalidArgument when empty, ragged or not unit-norm within 1e-4.
  void validate() const;
  int dim() const { return embeddings.empty() ? 0 : static_cast<int>(embeddings.front().size()); }
};

/// Labels ending in " wall" or " mirror".
bool is_conditioned_label(const std::string& label);

/// Edge-replicates the right and bottom borders up to a multiple of `patch`.
ImageRGB pad_to_multiple(const ImageRGB& image, int patch);

Grid<double> similarity_grid(const PatchFeatureGrid& fc, const PatchFeatureGrid& fg);
Grid<std::uint8_t> changed_patches(const Grid<double>& s, double tau);

enum class Side { kCurrent, kGoal };

struct ChangeRegion {
  Grid<std::uint8_t> patches;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixel bbox, inclusive, clipped to the image
  Side source = Side::kCurrent;
  size_t patch_count = 0;
  int patch = 1;  // patch size in pixels
};

/// Maximal 8-connected components with at least `min_patches` cells, ordered by the
/// (top, left) corner of their bounding box. Pixel boxes use `patch` and are clipped to
/// `width` x `height` when those are positive.
std::vector<ChangeRegion> group_regions(const Grid<std::uint8_t>& changed, int min_patches, int patch = 1,
                                        int width = 0, int height = 0);

/// True to keep. Rejects when the most similar table entry is wall/mirror-conditioned;
/// an exact tie with an unconditioned entry keeps.
bool concept_filter(std::span<const double> region_embedding, const ConceptTable& table);

/// Region pixels (patch cells rasterized and clipped to the image).
Mask region_pixels(const ChangeRegion& region, int patch, int width, int height);

struct DetectConfig {
  double tau_patch = 0.6;
  int min_patches = 2;
  // Crops for embedding keep region pixels whose color differs by more than this
  // (max over channels) between the two images; the full region is used if none do.
  double pixel_change_threshold = 0.12;
};

struct DetectedRegion {
  ChangeRegion region;
  Mask crop;                        // pixels used for the embedding
  std::vector<double> embedding;
};

struct DetectResult {
  Grid<double> similarity;
  Grid<std::uint8_t> changed;
  std::vector<DetectedRegion> current;  // crops from the observation that passed the filter
  std::vector<DetectedRegion> goal;     // crops from the rendered goal view that passed the filter
};

/// `table` may be null to skip concept filtering. Features are requested under the keys
/// `<key>_current` and `<key>_goal`.
DetectResult detect(const ImageRGB& current, const ImageRGB& goal, const FeatureBackend& backend,
                    const RegionEmbedder& embedder, const ConceptTable* table, const DetectConfig& cfg,
                    const std::string& key = "");

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace splatr::change
