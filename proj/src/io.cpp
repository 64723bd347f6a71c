#include "splatr/io.hpp"

#include <json.hpp>
#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace splatr::io {

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

using json = nlohmann::ordered_json;

class Writer {
 public:
  void bytes(const void* p, size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f32(double v) {
    const float f = static_cast<float>(v);
    bytes(&f, 4);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& data, std::string what) : data_(data), what_(std::move(what)) {}
  void bytes(void* p, size_t n) {
    if (pos_ + n > data_.size()) throw FormatError(what_ + ": truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  double f32() {
    float f;
    bytes(&f, 4);
    if (!std::isfinite(f)) throw FormatError(what_ + ": non-finite value");
    return f;
  }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  const std::string& data_;
  std::string what_;
  size_t pos_ = 0;
};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const fs::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw FormatError("cannot open " + path.string());
  return f;
}

void write_png_raw(const fs::path& path, int w, int h, int color_type, int bit_depth, const std::vector<std::uint8_t>& rows) {
  File f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("PNG write failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t stride = rows.size() / h;
  for (int y = 0; y < h; ++y) png_write_row(png, const_cast<png_bytep>(rows.data() + y * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Returns the raw rows after checking color type and bit depth.
std::vector<std::uint8_t> read_png_raw(const fs::path& path, int color_type, int bit_depth, int& w, int& h) {
  File f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG read failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  if (png_get_color_type(png, info) != color_type || png_get_bit_depth(png, info) != bit_depth ||
      png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unexpected PNG layout: " + path.string());
  }
  const size_t stride = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> rows(stride * h);
  for (int y = 0; y < h; ++y) png_read_row(png, rows.data() + y * stride, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return rows;
}

json view_json(int frame, const CameraView& v, const Quat& stored) {
  const Quat q = stored.squaredNorm() > 0.0 ? stored : matrix_to_quat(v.pose.rotation);
  return json{{"frame", frame},  {"fx", v.fx},         {"fy", v.fy},
              {"cx", v.cx},      {"cy", v.cy},         {"width", v.width},
              {"height", v.height}, {"rotation", {q[0], q[1], q[2], q[3]}},
              {"translation", {v.pose.translation[0], v.pose.translation[1], v.pose.translation[2]}}};
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string file_hash(const fs::path& path) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : read_file(path)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

// --- SPLTEMB1 ---------------------------------------------------------------

std::string serialize_spltemb1(const change::PatchFeatureGrid& g) {
  g.validate();
  Writer w;
  w.bytes("SPLTEMB1", 8);
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(g.rows));
  w.u32(static_cast<std::uint32_t>(g.cols));
  w.u32(static_cast<std::uint32_t>(g.dim));
  w.bytes(g.data.data(), g.data.size() * sizeof(float));
  return w.take();
}

change::PatchFeatureGrid parse_spltemb1(const std::string& bytes) {
  Reader r(bytes, "SPLTEMB1");
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, "SPLTEMB1", 8) != 0) throw FormatError("SPLTEMB1: bad magic");
  if (r.u32() != 1) throw FormatError("SPLTEMB1: unsupported version");
  const std::uint32_t rows = r.u32(), cols = r.u32(), dim = r.u32();
  if (rows == 0 || cols == 0 || dim == 0) throw FormatError("SPLTEMB1: zero dimension");
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols * dim;
  if (r.remaining() != count * 4) throw FormatError("SPLTEMB1: payload size does not match header");
  change::PatchFeatureGrid g(static_cast<int>(rows), static_cast<int>(cols), static_cast<int>(dim));
  r.bytes(g.data.data(), count * 4);
  for (float v : g.data)
    if (!std::isfinite(v)) throw FormatError("SPLTEMB1: non-finite value");
  return g;
}

change::PatchFeatureGrid read_spltemb1(const fs::path& path) { return parse_spltemb1(read_file(path)); }
void write_spltemb1(const fs::path& path, const change::PatchFeatureGrid& g) { write_file(path, serialize_spltemb1(g)); }

// --- Concept table -------------------------------------------------------------

change::ConceptTable parse_concepts(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("concept table: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("concept table: expected a JSON object");
  change::ConceptTable t;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_array()) throw FormatError("concept table: entry '" + it.key() + "' is not an array");
    std::vector<double> e;
    for (const auto& v : it.value()) {
      if (!v.is_number()) throw FormatError("concept table: non-numeric value in '" + it.key() + "'");
      e.push_back(v.get<double>());
    }
    t.labels.push_back(it.key());
    t.embeddings.push_back(std::move(e));
  }
  try {
    t.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("concept table: ") + e.what());
  }
  return t;
}

change::ConceptTable read_concepts(const fs::path& path) { return parse_concepts(read_file(path)); }

void write_concepts(const fs::path& path, const change::ConceptTable& t) {
  t.validate();
  json j = json::object();
  for (size_t i = 0; i < t.labels.size(); ++i) {
    json arr = json::array();
    for (double v : t.embeddings[i]) arr.push_back(static_cast<float>(v));
    j[t.labels[i]] = std::move(arr);
  }
  write_file(path, j.dump(1) + "\n");
}

// --- PNG -------------------------------------------------------------------------

void write_png(const fs::path& path, const ImageRGB& im) {
  if (im.width <= 0 || im.height <= 0) throw InvalidArgument("cannot write an empty image");
  std::vector<std::uint8_t> rows(im.data.size());
  for (size_t i = 0; i < rows.size(); ++i)
    rows[i] = static_cast<std::uint8_t>(std::lround(std::clamp(im.data[i], 0.0f, 1.0f) * 255.0f));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png_raw(path, im.width, im.height, PNG_COLOR_TYPE_RGB, 8, rows);
}

ImageRGB read_png(const fs::path& path) {
  int w, h;
  const auto rows = read_png_raw(path, PNG_COLOR_TYPE_RGB, 8, w, h);
  ImageRGB im(w, h);
  for (size_t i = 0; i < im.data.size(); ++i) im.data[i] = rows[i] / 255.0f;
  return im;
}

void write_depth_png(const fs::path& path, const ImageF& d) {
  if (d.width <= 0 || d.height <= 0) throw InvalidArgument("cannot write an empty depth image");
  std::vector<std::uint8_t> rows(d.data.size() * 2);
  for (size_t i = 0; i < d.data.size(); ++i) {
    const double mm = std::isfinite(d.data[i]) && d.data[i] > 0 ? std::round(d.data[i] * 1000.0) : 0.0;
    const auto v = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
    rows[2 * i] = static_cast<std::uint8_t>(v >> 8);  // PNG stores 16-bit samples big-endian
    rows[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png_raw(path, d.width, d.height, PNG_COLOR_TYPE_GRAY, 16, rows);
}

ImageF read_depth_png(const fs::path& path) {
  int w, h;
  const auto rows = read_png_raw(path, PNG_COLOR_TYPE_GRAY, 16, w, h);
  ImageF d(w, h);
  for (size_t i = 0; i < d.data.size(); ++i) d.data[i] = static_cast<float>(((rows[2 * i] << 8) | rows[2 * i + 1]) / 1000.0);
  return d;
}

// --- Poses -----------------------------------------------------------------------

void write_poses(const fs::path& path, const std::vector<PoseRecord>& poses) {
  std::string out;
  for (const auto& p : poses) out += view_json(p.frame, p.view, p.rotation).dump() + "\n";
  write_file(path, out);
}

std::vector<PoseRecord> read_poses(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<PoseRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      PoseRecord r;
      r.frame = j.at("frame").get<int>();
      r.view.fx = j.at("fx").get<double>();
      r.view.fy = j.at("fy").get<double>();
      r.view.cx = j.at("cx").get<double>();
      r.view.cy = j.at("cy").get<double>();
      r.view.width = j.at("width").get<int>();
      r.view.height = j.at("height").get<int>();
      const auto q = j.at("rotation").get<std::vector<double>>();
      const auto t = j.at("translation").get<std::vector<double>>();
      if (q.size() != 4 || t.size() != 3) throw FormatError("bad rotation/translation length");
      r.rotation = Quat(q[0], q[1], q[2], q[3]);
      r.view.pose.rotation = quat_to_matrix(normalize_quat(r.rotation));
      r.view.pose.translation = Vec3(t[0], t[1], t[2]);
      r.view.validate();
      out.push_back(r);
    } catch (const std::exception& e) {
      throw FormatError("poses line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// --- Checkpoint ------------------------------------------------------------------

void write_checkpoint(const fs::path& path, const train::TrainState& s) {
  const GaussianCloud& c = s.cloud;
  c.validate();
  Writer w;
  w.bytes("SPLATR1\0", 8);
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(c.sh_degree));
  w.u32(static_cast<std::uint32_t>(c.size()));
  w.u32(static_cast<std::uint32_t>(s.iteration));
  w.u64(s.adam.step);
  const bool has_adam = !s.adam.m.empty();
  w.u32(has_adam ? 1 : 0);
  for (const Vec3& v : c.means)
    for (int k = 0; k < 3; ++k) w.f32(v[k]);
  for (const Vec3& v : c.log_scales)
    for (int k = 0; k < 3; ++k) w.f32(v[k]);
  for (const Quat& q : c.rotations)
    for (int k = 0; k < 4; ++k) w.f32(q[k]);
  for (double o : c.opacity_logits) w.f32(o);
  for (double v : c.sh) w.f32(v);
  if (has_adam) {
    for (double v : s.adam.m) w.f32(v);
    for (double v : s.adam.v) w.f32(v);
  }
  write_file(path, w.take());
}

train::TrainState read_checkpoint(const fs::path& path) {
  const std::string bytes = read_file(path);
  Reader r(bytes, "checkpoint " + path.string());
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, "SPLATR1\0", 8) != 0) throw FormatError("checkpoint: bad magic");
  if (r.u32() != 1) throw FormatError("checkpoint: unsupported version");
  train::TrainState s;
  const std::uint32_t degree = r.u32(), n = r.u32();
  if (degree > 3) throw FormatError("checkpoint: SH degree above 3");
  s.iteration = static_cast<int>(r.u32());
  s.adam.step = r.u64();
  const std::uint32_t has_adam = r.u32();
  if (has_adam > 1) throw FormatError("checkpoint: bad optimizer flag");
  GaussianCloud& c = s.cloud;
  c.sh_degree = static_cast<int>(degree);
  const size_t per = 3 + 3 + 4 + 1 + static_cast<size_t>(c.sh_stride());
  if (r.remaining() != static_cast<size_t>(n) * per * 4 * (has_adam ? 3 : 1))
    throw FormatError("checkpoint: payload size does not match header");
  c.means.resize(n);
  c.log_scales.resize(n);
  c.rotations.resize(n);
  c.opacity_logits.resize(n);
  c.sh.resize(static_cast<size_t>(n) * c.sh_stride());
  for (auto& v : c.means)
    for (int k = 0; k < 3; ++k) v[k] = r.f32();
  for (auto& v : c.log_scales)
    for (int k = 0; k < 3; ++k) v[k] = r.f32();
  for (auto& q : c.rotations)
    for (int k = 0; k < 4; ++k) q[k] = r.f32();
  for (auto& o : c.opacity_logits) o = r.f32();
  for (auto& v : c.sh) v = r.f32();
  if (has_adam) {
    s.adam.m.resize(static_cast<size_t>(n) * per);
    s.adam.v.resize(static_cast<size_t>(n) * per);
    for (auto& v : s.adam.m) v = r.f32();
    for (auto& v : s.adam.v) v = r.f32();
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return s;
}

// --- PLY -------------------------------------------------------------------------

void export_ply(const fs::path& path, const GaussianCloud& c) {
  c.validate();
  const int k = sh_coeff_count(c.sh_degree);
  std::ostringstream hdr;
  hdr << "ply\nformat binary_little_endian 1.0\nelement vertex " << c.size() << "\n";
  for (const char* p : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) hdr << "property float " << p << "\n";
  for (int i = 0; i < 3 * (k - 1); ++i) hdr << "property float f_rest_" << i << "\n";
  hdr << "property float opacity\n";
  for (const char* p : {"scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) hdr << "property float " << p << "\n";
  hdr << "end_header\n";
  Writer w;
  const std::string h = hdr.str();
  w.bytes(h.data(), h.size());
  const int stride = c.sh_stride();
  for (size_t i = 0; i < c.size(); ++i) {
    for (int a = 0; a < 3; ++a) w.f32(c.means[i][a]);
    for (int a = 0; a < 3; ++a) w.f32(0.0);
    const double* sh = c.sh.data() + i * stride;
    for (int ch = 0; ch < 3; ++ch) w.f32(sh[ch]);
    for (int ch = 0; ch < 3; ++ch)
      for (int j = 1; j < k; ++j) w.f32(sh[3 * j + ch]);
    w.f32(c.opacity_logits[i]);
    for (int a = 0; a < 3; ++a) w.f32(c.log_scales[i][a]);
    for (int a = 0; a < 4; ++a) w.f32(c.rotations[i][a]);
  }
  write_file(path, w.take());
}

}  // namespace splatr::io
