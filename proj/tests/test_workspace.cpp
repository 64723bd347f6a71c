#include "doctest.h"
#include "splatr/workspace.hpp"

#include <filesystem>
#include <random>

using namespace splatr;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("splatr_ws_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<pipeline::RecordedFrame> small_walk() {
  sim::CameraConfig cam;
  cam.width = 24;
  cam.height = 18;
  sim::Simulator s(sim::generate_scene(5, sim::Difficulty::kEasy), cam);
  return pipeline::record_walkthrough(s, 5, 6).frames;
}

objects::ObjectNode sample_node(int id) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(id));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  objects::ObjectNode n;
  n.node_id = id;
  n.setting = id % 2 ? objects::Setting::kGoal : objects::Setting::kShuffled;
  n.frame = 10 + id;
  n.view.width = 8;
  n.view.height = 6;
  n.view.fx = n.view.fy = 7.1;
  n.view.cx = 3.5;
  n.view.cy = 2.5;
  n.view.pose = look_at(Vec3(u(rng), u(rng), 1.2), Vec3(1.5, 1.5, 0.0));
  n.image = ImageRGB(8, 6, 0.25f);
  n.patch = 2;
  n.patch_mask = change::Grid<std::uint8_t>(3, 4);
  n.patch_mask.at(1, 2) = 1;
  n.x0 = 4;
  n.y0 = 2;
  n.x1 = 5;
  n.y1 = 3;
  n.crop = Mask(8, 6);
  n.crop.set(4, 2, true);
  n.refined_mask = Mask(8, 6);
  n.refined_mask->set(5, 3, true);
  n.embedding = {0.6, 0.8};
  n.fused = {0.3 + u(rng), 0.4};
  n.merge_count = 3;
  for (int i = 0; i < 5; ++i) {
    n.points.points.push_back(Vec3(u(rng), u(rng), u(rng)));
    n.points.colors.push_back(Vec3(u(rng), u(rng), u(rng)));
  }
  n.center = n.points.centroid();
  return n;
}

}  // namespace

TEST_CASE("dataset directory: write -> read -> write is byte-identical") {
  const auto frames = small_walk();
  const fs::path a = scratch("dataset_a"), b = scratch("dataset_b");
  workspace::write_dataset(a, frames);
  const auto back = workspace::read_dataset(a);
  REQUIRE(back.size() == frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    CHECK(back[i].step == static_cast<int>(i));
    CHECK((back[i].view.pose.translation - frames[i].view.pose.translation).norm() < 1e-12);
    // 8-bit color and millimeter depth.
    for (size_t k = 0; k < frames[i].rgb.data.size(); ++k)
      REQUIRE(std::abs(back[i].rgb.data[k] - frames[i].rgb.data[k]) <= 0.5f / 255.0f + 1e-6f);
    for (size_t k = 0; k < frames[i].depth.data.size(); ++k)
      REQUIRE(std::abs(back[i].depth.data[k] - frames[i].depth.data[k]) <= 0.0005f + 1e-6f);
  }
  workspace::write_dataset(b, back);
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path twin = b / fs::relative(entry.path(), a);
    REQUIRE(fs::exists(twin));
    CHECK(io::file_hash(entry.path()) == io::file_hash(twin));
  }
  CHECK_THROWS_AS(workspace::read_dataset(scratch("dataset_empty")), FormatError);
}

TEST_CASE("nodes: JSON and directory round trips") {
  const std::vector<objects::ObjectNode> nodes{sample_node(0), sample_node(1)};
  const json j = workspace::nodes_to_json(nodes);
  const auto back = workspace::nodes_from_json(j);
  CHECK(workspace::nodes_to_json(back).dump() == j.dump());
  REQUIRE(back.size() == 2);
  CHECK(back[1].setting == objects::Setting::kGoal);
  CHECK(back[0].merge_count == 3);
  CHECK(back[0].view.pose.rotation == nodes[0].view.pose.rotation);

  const fs::path dir = scratch("nodes");
  workspace::write_nodes(dir, nodes);
  const auto loaded = workspace::read_nodes(dir);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].crop.data == nodes[0].crop.data);
  REQUIRE(loaded[0].refined_mask.has_value());
  CHECK(loaded[0].refined_mask->data == nodes[0].refined_mask->data);
  CHECK(loaded[0].image.width == 8);
  const std::string first = io::read_file(dir / "nodes.json");
  workspace::write_nodes(dir, loaded);
  CHECK(io::read_file(dir / "nodes.json") == first);

  json bad = j;
  bad["nodes"][0]["setting"] = "elsewhere";
  CHECK_THROWS_AS(workspace::nodes_from_json(bad), FormatError);
  bad = j;
  bad["version"] = 7;
  CHECK_THROWS_AS(workspace::nodes_from_json(bad), FormatError);
}

TEST_CASE("manifest") {
  const fs::path root = scratch("manifest");
  const workspace::Layout ws{root};
  CHECK(workspace::read_manifest(ws).files.empty());
  io::write_file(root / "report.json", "{}\n");
  workspace::Manifest m;
  m.add(root, root / "report.json");
  m.add(root, "report.json");
  CHECK(m.files.size() == 1);
  CHECK(m.files.at("report.json") == io::file_hash(root / "report.json"));
  CHECK(m.status == "ok");
  m.warn("budget ran out");
  CHECK(m.status == "warning");
  workspace::write_manifest(ws, m);
  const workspace::Manifest back = workspace::read_manifest(ws);
  CHECK(workspace::to_json(back).dump() == workspace::to_json(m).dump());

  json j = workspace::to_json(m);
  j["version"] = workspace::kVersion + 1;
  CHECK_THROWS_AS(workspace::manifest_from_json(j), FormatError);
  j = workspace::to_json(m);
  j.erase("version");
  CHECK_THROWS_AS(workspace::manifest_from_json(j), FormatError);
}
