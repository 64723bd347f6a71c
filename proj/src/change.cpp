#include "splatr/change.hpp"

#include "splatr/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>

namespace splatr::change {

namespace {

// Soft assignment of v in [0,1] onto `levels` evenly spaced bin centers.
struct SoftBin {
  int lo;
  double w_hi;
};

SoftBin soft_bin(double v, int levels) {
  const double x = std::clamp(v, 0.0, 1.0) * (levels - 1);
  const int lo = std::min(static_cast<int>(std::floor(x)), levels - 2);
  return {lo, x - lo};
}

void add_soft_color(std::vector<double>& hist, size_t offset, int levels, const float* rgb, double weight) {
  const SoftBin r = soft_bin(rgb[0], levels), g = soft_bin(rgb[1], levels), b = soft_bin(rgb[2], levels);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const double w = (i ? r.w_hi : 1 - r.w_hi) * (j ? g.w_hi : 1 - g.w_hi) * (k ? b.w_hi : 1 - b.w_hi);
        hist[offset + ((r.lo + i) * levels + (g.lo + j)) * levels + (b.lo + k)] += weight * w;
      }
}

double luminance(const ImageRGB& im, int x, int y) {
  x = std::clamp(x, 0, im.width - 1);
  y = std::clamp(y, 0, im.height - 1);
  return 0.299 * im.at(x, y, 0) + 0.587 * im.at(x, y, 1) + 0.114 * im.at(x, y, 2);
}

}  // namespace

void PatchFeatureGrid::validate() const {
  if (rows <= 0 || cols <= 0 || dim <= 0) throw InvalidArgument("feature grid must be non-empty");
  if (data.size() != static_cast<size_t>(rows) * cols * dim) throw InvalidArgument("feature grid size mismatch");
  for (float v : data)
    if (!std::isfinite(v)) throw InvalidArgument("feature grid contains non-finite values");
}

ImageRGB pad_to_multiple(const ImageRGB& image, int patch) {
  if (patch <= 0) throw InvalidArgument("patch size must be positive");
  if (image.width <= 0 || image.height <= 0) throw InvalidArgument("cannot pad an empty image");
  const int w = (image.width + patch - 1) / patch * patch, h = (image.height + patch - 1) / patch * patch;
  if (w == image.width && h == image.height) return image;
  ImageRGB out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(std::min(x, image.width - 1), std::min(y, image.height - 1), c);
  return out;
}

SyntheticFeatureBackend::SyntheticFeatureBackend(int patch_size, double gradient_weight)
    : patch_size_(patch_size), gradient_weight_(gradient_weight) {
  if (patch_size <= 0) throw InvalidArgument("patch size must be positive");
}

PatchFeatureGrid SyntheticFeatureBackend::extract(const ImageRGB& image, const std::string&) const {
  const ImageRGB im = pad_to_multiple(image, patch_size_);
  const int p = patch_size_;
  PatchFeatureGrid grid(im.height / p, im.width / p, dim());
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      std::vector<double> f(static_cast<size_t>(dim()), 0.0);
      for (int y = r * p; y < (r + 1) * p; ++y)
        for (int x = c * p; x < (c + 1) * p; ++x) {
          add_soft_color(f, 0, 4, &im.data[(static_cast<size_t>(y) * im.width + x) * 3], 1.0);
          const double gx = 0.5 * (luminance(im, x + 1, y) - luminance(im, x - 1, y));
          const double gy = 0.5 * (luminance(im, x, y + 1) - luminance(im, x, y - 1));
          const double mag = std::hypot(gx, gy);
          if (mag <= 0.0) continue;
          const double a = (std::atan2(gy, gx) + M_PI) / (2.0 * M_PI) * 8.0;  // [0, 8]
          const int lo = static_cast<int>(std::floor(a - 0.5 + 8.0)) % 8;
          const double w_hi = (a - 0.5) - std::floor(a - 0.5);
          f[64 + lo] += mag * (1.0 - w_hi);
          f[64 + (lo + 1) % 8] += mag * w_hi;
        }
      double cn = 0.0;
      for (int k = 0; k < 64; ++k) cn += f[k] * f[k];
      cn = std::sqrt(cn);
      // Gradient part keeps its absolute scale (mean magnitude per pixel) so that faint
      // noise on flat surfaces does not turn into a full-weight orientation signature.
      const double gscale = gradient_weight_ * 4.0 / (p * p);
      auto out = grid.at(r, c);
      for (int k = 0; k < 64; ++k) out[k] = static_cast<float>(cn > 0 ? f[k] / cn : 0.0);
      for (int k = 64; k < 72; ++k) out[k] = static_cast<float>(f[k] * gscale);
    }
  return grid;
}

FileFeatureBackend::FileFeatureBackend(std::filesystem::path dir, int patch_size, int dim)
    : dir_(std::move(dir)), patch_size_(patch_size), dim_(dim) {
  if (patch_size <= 0 || dim <= 0) throw InvalidArgument("file backend needs positive patch size and dim");
}

PatchFeatureGrid FileFeatureBackend::extract(const ImageRGB& image, const std::string& key) const {
  PatchFeatureGrid g = io::read_spltemb1(dir_ / (key + ".spltemb"));
  const int rows = (image.height + patch_size_ - 1) / patch_size_, cols = (image.width + patch_size_ - 1) / patch_size_;
  if (g.rows != rows || g.cols != cols || g.dim != dim_)
    throw FormatError("embedding grid for '" + key + "' does not match the image patch grid");
  return g;
}

std::vector<double> ColorHistogramEmbedder::embed(const ImageRGB& image, const Mask& mask) const {
  if (mask.width != image.width || mask.height != image.height) throw InvalidArgument("mask/image size mismatch");
  constexpr int n = kChromaBins;
  constexpr double sigma = 0.6;  // in bins
  std::vector<double> h(static_cast<size_t>(n) * n, 0.0);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      if (!mask.at(x, y)) continue;
      const double r = image.at(x, y, 0), g = image.at(x, y, 1), b = image.at(x, y, 2);
      const double sum = r + g + b;
      if (!(sum > 1e-6)) continue;
      // Chromaticity is unstable for dark pixels.
      const double weight = std::min(1.0, sum / 0.3);
      const double u = r / sum * n - 0.5, v = g / sum * n - 0.5;
      const int iu = static_cast<int>(std::lround(u)), iv = static_cast<int>(std::lround(v));
      double wsum = 0.0;
      std::array<double, 9> w{};
      for (int du = -1; du <= 1; ++du)
        for (int dv = -1; dv <= 1; ++dv) {
          const double d2 = (iu + du - u) * (iu + du - u) + (iv + dv - v) * (iv + dv - v);
          wsum += w[(du + 1) * 3 + dv + 1] = std::exp(-d2 / (2 * sigma * sigma));
        }
      for (int du = -1; du <= 1; ++du)
        for (int dv = -1; dv <= 1; ++dv) {
          const int bu = std::clamp(iu + du, 0, n - 1), bv = std::clamp(iv + dv, 0, n - 1);
          h[static_cast<size_t>(bu) * n + bv] += weight * w[(du + 1) * 3 + dv + 1] / wsum;
        }
    }
  double norm = 0.0;
  for (double v : h) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& v : h) v /= norm;
  return h;
}

std::vector<double> ColorHistogramEmbedder::embed_color(const Vec3& rgb) const {
  ImageRGB im(1, 1);
  for (int c = 0; c < 3; ++c) im.data[c] = static_cast<float>(rgb[c]);
  return embed(im, Mask(1, 1, true));
}

void ConceptTable::add(std::string label, std::vector<double> e) {
  double n = 0.0;
  for (double v : e) n += v * v;
  n = std::sqrt(n);
  if (!(n > 0.0)) throw InvalidArgument("concept embedding must be nonzero");
  for (double& v : e) v /= n;
  labels.push_back(std::move(label));
  embeddings.push_back(std::move(e));
}

void ConceptTable::validate() const {
  if (labels.empty()) throw InvalidArgument("concept table is empty");
  if (labels.size() != embeddings.size()) throw InvalidArgument("concept table labels/embeddings mismatch");
  for (const auto& e : embeddings) {
    if (e.size() != embeddings.front().size() || e.empty()) throw InvalidArgument("concept table is ragged");
    double n = 0.0;
    for (double v : e) n += v * v;
    if (std::abs(std::sqrt(n) - 1.0) > 1e-4) throw InvalidArgument("concept embedding is not unit-norm");
  }
}

bool is_conditioned_label(const std::string& label) {
  auto ends = [&](const std::string& s) { return label.size() >= s.size() && label.compare(label.size() - s.size(), s.size(), s) == 0; };
  return ends(" wall") || ends(" mirror");
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine of vectors with different lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

Grid<double> similarity_grid(const PatchFeatureGrid& fc, const PatchFeatureGrid& fg) {
  if (fc.rows != fg.rows || fc.cols != fg.cols || fc.dim != fg.dim)
    throw InvalidArgument("feature grids differ in shape");
  Grid<double> s(fc.rows, fc.cols);
  for (int r = 0; r < fc.rows; ++r)
    for (int c = 0; c < fc.cols; ++c) {
      const auto a = fc.at(r, c), b = fg.at(r, c);
      double ab = 0.0, aa = 0.0, bb = 0.0;
      for (int k = 0; k < fc.dim; ++k) {
        ab += static_cast<double>(a[k]) * b[k];
        aa += static_cast<double>(a[k]) * a[k];
        bb += static_cast<double>(b[k]) * b[k];
      }
      s.at(r, c) = (aa == 0.0 || bb == 0.0) ? 0.0 : std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
    }
  return s;
}

Grid<std::uint8_t> changed_patches(const Grid<double>& s, double tau) {
  if (!(tau > -1.0 && tau < 1.0)) throw InvalidArgument("patch threshold must lie in (-1, 1)");
  Grid<std::uint8_t> out(s.rows, s.cols, 0);
  for (size_t i = 0; i < s.data.size(); ++i) out.data[i] = s.data[i] < tau ? 1 : 0;
  return out;
}

std::vector<ChangeRegion> group_regions(const Grid<std::uint8_t>& changed, int min_patches, int patch, int width,
                                        int height) {
  std::vector<ChangeRegion> out;
  std::vector<std::uint8_t> seen(changed.data.size(), 0);
  for (int r0 = 0; r0 < changed.rows; ++r0)
    for (int c0 = 0; c0 < changed.cols; ++c0) {
      if (!changed.at(r0, c0) || seen[static_cast<size_t>(r0) * changed.cols + c0]) continue;
      ChangeRegion reg;
      reg.patches = Grid<std::uint8_t>(changed.rows, changed.cols, 0);
      int top = r0, left = c0, bottom = r0, right = c0;
      std::deque<std::pair<int, int>> q{{r0, c0}};
      seen[static_cast<size_t>(r0) * changed.cols + c0] = 1;
      while (!q.empty()) {
        const auto [r, c] = q.front();
        q.pop_front();
        reg.patches.at(r, c) = 1;
        ++reg.patch_count;
        top = std::min(top, r);
        bottom = std::max(bottom, r);
        left = std::min(left, c);
        right = std::max(right, c);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= changed.rows || cc >= changed.cols) continue;
            const size_t k = static_cast<size_t>(rr) * changed.cols + cc;
            if (!changed.data[k] || seen[k]) continue;
            seen[k] = 1;
            q.push_back({rr, cc});
          }
      }
      if (static_cast<int>(reg.patch_count) < min_patches) continue;
      reg.patch = patch;
      reg.x0 = left * patch;
      reg.y0 = top * patch;
      reg.x1 = (right + 1) * patch - 1;
      reg.y1 = (bottom + 1) * patch - 1;
      if (width > 0) reg.x1 = std::min(reg.x1, width - 1);
      if (height > 0) reg.y1 = std::min(reg.y1, height - 1);
      out.push_back(std::move(reg));
    }
  // Scan order already visits components by their first cell; sort by bbox corner.
  std::stable_sort(out.begin(), out.end(), [](const ChangeRegion& a, const ChangeRegion& b) {
    return a.y0 != b.y0 ? a.y0 < b.y0 : a.x0 < b.x0;
  });
  return out;
}

bool concept_filter(std::span<const double> g, const ConceptTable& table) {
  if (table.labels.empty()) throw InvalidArgument("concept table is empty");
  double best_plain = -2.0, best_conditioned = -2.0;
  for (size_t i = 0; i < table.labels.size(); ++i) {
    double& best = is_conditioned_label(table.labels[i]) ? best_conditioned : best_plain;
    best = std::max(best, cosine(g, table.embeddings[i]));
  }
  return best_plain >= best_conditioned;
}

Mask region_pixels(const ChangeRegion& region, int patch, int width, int height) {
  Mask m(width, height);
  for (int r = 0; r < region.patches.rows; ++r)
    for (int c = 0; c < region.patches.cols; ++c) {
      if (!region.patches.at(r, c)) continue;
      for (int y = r * patch; y < std::min((r + 1) * patch, height); ++y)
        for (int x = c * patch; x < std::min((c + 1) * patch, width); ++x) m.set(x, y, true);
    }
  return m;
}

DetectResult detect(const ImageRGB& current, const ImageRGB& goal, const FeatureBackend& backend,
                    const RegionEmbedder& embedder, const ConceptTable* table, const DetectConfig& cfg,
                    const std::string& key) {
  if (current.width != goal.width || current.height != goal.height) throw InvalidArgument("image sizes differ");
  if (table) table->validate();
  DetectResult res;
  const PatchFeatureGrid fc = backend.extract(current, key + "_current");
  const PatchFeatureGrid fg = backend.extract(goal, key + "_goal");
  res.similarity = similarity_grid(fc, fg);
  res.changed = changed_patches(res.similarity, cfg.tau_patch);
  const int p = backend.patch_size();
  for (ChangeRegion& reg : group_regions(res.changed, cfg.min_patches, p, current.width, current.height)) {
    const Mask pixels = region_pixels(reg, p, current.width, current.height);
    Mask crop(current.width, current.height);
    for (int y = reg.y0; y <= reg.y1; ++y)
      for (int x = reg.x0; x <= reg.x1; ++x) {
        if (!pixels.at(x, y)) continue;
        double d = 0.0;
        for (int c = 0; c < 3; ++c) d = std::max(d, static_cast<double>(std::abs(current.at(x, y, c) - goal.at(x, y, c))));
        crop.set(x, y, d > cfg.pixel_change_threshold);
      }
    if (crop.count() < 4) crop = pixels;
    for (Side side : {Side::kCurrent, Side::kGoal}) {
      DetectedRegion d{reg, crop, embedder.embed(side == Side::kCurrent ? current : goal, crop)};
      d.region.source = side;
      if (table && !concept_filter(d.embedding, *table)) continue;
      (side == Side::kCurrent ? res.current : res.goal).push_back(std::move(d));
    }
  }
  return res;
}

}  // namespace splatr::change
