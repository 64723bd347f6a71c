#include "splatr/workspace.hpp"

#include <cstdio>

namespace splatr::workspace {

using json = nlohmann::ordered_json;

namespace {

std::string numbered(const char* prefix, int i, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%06d%s", prefix, i, suffix);
  return buf;
}

std::string node_file(int id, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "node_%03d%s.png", id, suffix);
  return buf;
}

template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

// The rotation is kept as a matrix so that write -> read -> write is byte-identical.
json camera_json(const CameraView& v) {
  json r = json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(v.pose.rotation(i, k));
  return json{{"fx", v.fx},         {"fy", v.fy},         {"cx", v.cx},     {"cy", v.cy},
              {"width", v.width},   {"height", v.height}, {"rotation", r}, {"translation", vec(v.pose.translation)}};
}

CameraView camera_from(const json& j) {
  CameraView v;
  v.fx = j.at("fx").get<double>();
  v.fy = j.at("fy").get<double>();
  v.cx = j.at("cx").get<double>();
  v.cy = j.at("cy").get<double>();
  v.width = j.at("width").get<int>();
  v.height = j.at("height").get<int>();
  const auto& r = j.at("rotation");
  if (!r.is_array() || r.size() != 9) throw FormatError("camera rotation must have 9 entries");
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) v.pose.rotation(i, k) = r[static_cast<size_t>(i * 3 + k)].get<double>();
  v.pose.translation = vec3(j.at("translation"));
  v.validate();
  return v;
}

ImageRGB mask_image(const Mask& m) {
  ImageRGB im(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      for (int c = 0; c < 3; ++c) im.at(x, y, c) = m.at(x, y) ? 1.0f : 0.0f;
  return im;
}

Mask image_mask(const ImageRGB& im) {
  Mask m(im.width, im.height);
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x) m.set(x, y, im.at(x, y, 0) > 0.5f);
  return m;
}

}  // namespace

// --- dataset -------------------------------------------------------------------

void write_dataset(const fs::path& dir, const std::vector<pipeline::RecordedFrame>& frames) {
  fs::create_directories(dir / "rgb");
  fs::create_directories(dir / "depth");
  std::vector<io::PoseRecord> poses;
  for (size_t i = 0; i < frames.size(); ++i) {
    const int k = static_cast<int>(i);
    io::write_png(dir / "rgb" / numbered("frame_", k, ".png"), frames[i].rgb);
    io::write_depth_png(dir / "depth" / numbered("frame_", k, ".png"), frames[i].depth);
    poses.push_back({k, frames[i].view, frames[i].stored_rotation});
  }
  io::write_poses(dir / "poses.jsonl", poses);
}

std::vector<pipeline::RecordedFrame> read_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "poses.jsonl")) throw FormatError("dataset has no poses.jsonl: " + dir.string());
  std::vector<pipeline::RecordedFrame> out;
  for (const auto& p : io::read_poses(dir / "poses.jsonl")) {
    pipeline::RecordedFrame f;
    f.step = p.frame;
    f.view = p.view;
    f.stored_rotation = p.rotation;
    f.rgb = io::read_png(dir / "rgb" / numbered("frame_", p.frame, ".png"));
    f.depth = io::read_depth_png(dir / "depth" / numbered("frame_", p.frame, ".png"));
    if (f.rgb.width != f.view.width || f.rgb.height != f.view.height || f.depth.width != f.view.width ||
        f.depth.height != f.view.height)
      throw FormatError("frame " + std::to_string(p.frame) + " does not match its pose record size");
    out.push_back(std::move(f));
  }
  return out;
}

// --- nodes ---------------------------------------------------------------------

json nodes_to_json(const std::vector<objects::ObjectNode>& nodes) {
  json arr = json::array();
  for (const auto& n : nodes) {
    json j;
    j["node_id"] = n.node_id;
    j["setting"] = n.setting == objects::Setting::kShuffled ? "shuffled" : "goal";
    j["frame"] = n.frame;
    j["camera"] = camera_json(n.view);
    j["image"] = node_file(n.node_id, "");
    j["crop"] = node_file(n.node_id, "_crop");
    j["refined_mask"] = n.refined_mask ? json(node_file(n.node_id, "_mask")) : json(nullptr);
    j["patch"] = n.patch;
    j["bbox"] = json::array({n.x0, n.y0, n.x1, n.y1});
    json pm;
    pm["rows"] = n.patch_mask.rows;
    pm["cols"] = n.patch_mask.cols;
    pm["data"] = n.patch_mask.data;
    j["patch_mask"] = pm;
    j["merge_count"] = n.merge_count;
    j["center"] = vec(n.center);
    j["embedding"] = n.embedding;
    j["fused"] = n.fused;
    json pts = json::array(), cols = json::array();
    for (const auto& p : n.points.points) pts.push_back(vec(p));
    for (const auto& c : n.points.colors) cols.push_back(vec(c));
    j["points"] = pts;
    j["colors"] = cols;
    arr.push_back(j);
  }
  json out;
  out["version"] = kVersion;
  out["nodes"] = arr;
  return out;
}

std::vector<objects::ObjectNode> nodes_from_json(const json& j) {
  return guarded("nodes", [&] {
    if (j.at("version").get<int>() != kVersion) throw FormatError("unsupported nodes version");
    std::vector<objects::ObjectNode> out;
    for (const auto& jn : j.at("nodes")) {
      objects::ObjectNode n;
      n.node_id = jn.at("node_id").get<int>();
      const std::string setting = jn.at("setting").get<std::string>();
      if (setting != "shuffled" && setting != "goal") throw FormatError("unknown node setting " + setting);
      n.setting = setting == "shuffled" ? objects::Setting::kShuffled : objects::Setting::kGoal;
      n.frame = jn.at("frame").get<int>();
      n.view = camera_from(jn.at("camera"));
      n.patch = jn.at("patch").get<int>();
      const auto bbox = jn.at("bbox").get<std::vector<int>>();
      if (bbox.size() != 4) throw FormatError("bbox must have 4 entries");
      n.x0 = bbox[0];
      n.y0 = bbox[1];
      n.x1 = bbox[2];
      n.y1 = bbox[3];
      const auto& pm = jn.at("patch_mask");
      n.patch_mask = change::Grid<std::uint8_t>(pm.at("rows").get<int>(), pm.at("cols").get<int>());
      n.patch_mask.data = pm.at("data").get<std::vector<std::uint8_t>>();
      if (n.patch_mask.data.size() != static_cast<size_t>(n.patch_mask.rows) * n.patch_mask.cols)
        throw FormatError("patch mask size mismatch");
      // The mask pixels live in a PNG next to the JSON; read_nodes fills them in.
      if (!jn.at("refined_mask").is_null()) n.refined_mask = Mask();
      n.merge_count = jn.at("merge_count").get<int>();
      n.center = vec3(jn.at("center"));
      n.embedding = jn.at("embedding").get<std::vector<double>>();
      n.fused = jn.at("fused").get<std::vector<double>>();
      for (const auto& p : jn.at("points")) n.points.points.push_back(vec3(p));
      for (const auto& c : jn.at("colors")) n.points.colors.push_back(vec3(c));
      n.validate();
      out.push_back(std::move(n));
    }
    return out;
  });
}

void write_nodes(const fs::path& dir, const std::vector<objects::ObjectNode>& nodes) {
  fs::create_directories(dir);
  write_json(dir / "nodes.json", nodes_to_json(nodes));
  for (const auto& n : nodes) {
    if (n.image.width > 0) io::write_png(dir / node_file(n.node_id, ""), n.image);
    if (n.crop.width > 0) io::write_png(dir / node_file(n.node_id, "_crop"), mask_image(n.crop));
    if (n.refined_mask && n.refined_mask->width > 0)
      io::write_png(dir / node_file(n.node_id, "_mask"), mask_image(*n.refined_mask));
  }
}

std::vector<objects::ObjectNode> read_nodes(const fs::path& dir) {
  auto nodes = nodes_from_json(read_json(dir / "nodes.json"));
  for (auto& n : nodes) {
    if (fs::exists(dir / node_file(n.node_id, ""))) n.image = io::read_png(dir / node_file(n.node_id, ""));
    if (fs::exists(dir / node_file(n.node_id, "_crop")))
      n.crop = image_mask(io::read_png(dir / node_file(n.node_id, "_crop")));
    if (fs::exists(dir / node_file(n.node_id, "_mask")))
      n.refined_mask = image_mask(io::read_png(dir / node_file(n.node_id, "_mask")));
  }
  return nodes;
}

// --- manifest ------------------------------------------------------------------

void Manifest::add(const fs::path& root, const fs::path& path) {
  const fs::path full = path.is_absolute() ? path : root / path;
  files[fs::relative(full, root).generic_string()] = io::file_hash(full);
}

void Manifest::warn(std::string message) {
  status = "warning";
  warnings.push_back(std::move(message));
}

json to_json(const Manifest& m) {
  json j;
  j["format"] = "splatr-workspace";
  j["version"] = m.version;
  j["status"] = m.status;
  j["warnings"] = m.warnings;
  json files = json::object();
  for (const auto& [k, v] : m.files) files[k] = v;
  j["files"] = files;
  return j;
}

Manifest manifest_from_json(const json& j) {
  return guarded("manifest", [&] {
    Manifest m;
    if (j.at("format").get<std::string>() != "splatr-workspace") throw FormatError("not a workspace manifest");
    m.version = j.at("version").get<int>();
    if (m.version != kVersion) throw FormatError("unsupported workspace version " + std::to_string(m.version));
    m.status = j.at("status").get<std::string>();
    if (m.status != "ok" && m.status != "warning") throw FormatError("unknown manifest status " + m.status);
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("files").items()) m.files[k] = v.get<std::string>();
    return m;
  });
}

void write_manifest(const Layout& ws, const Manifest& m) { write_json(ws.manifest(), to_json(m)); }

Manifest read_manifest(const Layout& ws) {
  if (!fs::exists(ws.manifest())) return {};
  return manifest_from_json(read_json(ws.manifest()));
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace splatr::workspace
