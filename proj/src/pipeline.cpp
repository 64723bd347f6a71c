#include "splatr/pipeline.hpp"

#include "splatr/pointcloud.hpp"
#include "splatr/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace splatr::pipeline {

using json = nlohmann::ordered_json;

std::string to_string(Matcher m) { return m == Matcher::kGreedy ? "greedy" : "hungarian"; }

Matcher matcher_from_string(const std::string& s) {
  if (s == "hungarian") return Matcher::kHungarian;
  if (s == "greedy") return Matcher::kGreedy;
  throw InvalidArgument("unknown matcher '" + s + "' (expected hungarian or greedy)");
}

std::string to_string(sim::Difficulty d) { return d == sim::Difficulty::kAmbiguous ? "ambiguous" : "easy"; }

sim::Difficulty difficulty_from_string(const std::string& s) {
  if (s == "easy") return sim::Difficulty::kEasy;
  if (s == "ambiguous") return sim::Difficulty::kAmbiguous;
  throw InvalidArgument("unknown difficulty '" + s + "' (expected easy or ambiguous)");
}

namespace {

std::string center_name(objects::CenterMode m) { return m == objects::CenterMode::kCentroid ? "centroid" : "trimmed_box"; }

objects::CenterMode center_from_string(const std::string& s) {
  if (s == "centroid") return objects::CenterMode::kCentroid;
  if (s == "trimmed_box") return objects::CenterMode::kTrimmedBox;
  throw InvalidArgument("unknown center mode '" + s + "'");
}

// Walks every config key once; the writer and the reader share this list.
template <class V>
void visit(Config& c, V&& v) {
  v("scene", "seed", c.seed);
  std::string difficulty = to_string(c.difficulty);
  v("scene", "difficulty", difficulty);
  c.difficulty = difficulty_from_string(difficulty);
  v("scene", "shuffle_count", c.shuffle_count);

  v("camera", "width", c.camera.width);
  v("camera", "height", c.camera.height);
  v("camera", "hfov_deg", c.camera.hfov_deg);
  v("camera", "height_m", c.camera.height_m);
  v("camera", "pitch_deg", c.camera.pitch_deg);

  v("explore", "walkthrough_steps", c.walkthrough_steps);
  v("explore", "unshuffle_steps", c.unshuffle_steps);
  v("explore", "min_view_depth", c.min_view_depth);

  v("splat", "sh_degree", c.sh_degree);
  v("splat", "init_voxel", c.init_voxel);
  v("splat", "cloud_stride", c.cloud_stride);
  v("splat", "iterations", c.train.iterations);
  v("splat", "lr_mean", c.train.lr_mean);
  v("splat", "lr_mean_final_fraction", c.train.lr_mean_final_fraction);
  v("splat", "lr_log_scale", c.train.lr_log_scale);
  v("splat", "lr_rotation", c.train.lr_rotation);
  v("splat", "lr_opacity", c.train.lr_opacity);
  v("splat", "lr_sh", c.train.lr_sh);
  v("splat", "ssim_weight", c.train.ssim_weight);
  v("splat", "opacity_prune_threshold", c.train.opacity_prune_threshold);
  v("splat", "prune_interval", c.train.prune_interval);
  v("splat", "seed", c.train.seed);
  std::array<double, 3> bg{c.train.background.x(), c.train.background.y(), c.train.background.z()};
  v("splat", "background", bg);
  c.train.background = Vec3(bg[0], bg[1], bg[2]);

  v("detect", "backend", c.feature_backend);
  v("detect", "embeddings_dir", c.embeddings_dir);
  v("detect", "patch_size", c.patch_size);
  v("detect", "feature_dim", c.feature_dim);
  v("detect", "gradient_weight", c.gradient_weight);
  v("detect", "tau_patch", c.detect.tau_patch);
  v("detect", "min_patches", c.detect.min_patches);
  v("detect", "pixel_change_threshold", c.detect.pixel_change_threshold);
  v("detect", "concept_filter", c.concept_filter);

  v("nodes", "delta", c.nodes.delta);
  v("nodes", "tau_sim", c.nodes.tau_sim);
  v("nodes", "nn_dist_threshold", c.nodes.nn_dist_threshold);
  v("nodes", "voxel", c.nodes.voxel);
  v("nodes", "cluster_radius", c.nodes.cluster_radius);
  v("nodes", "depth_margin", c.depth_margin);
  std::string center = center_name(c.nodes.center);
  v("nodes", "center", center);
  c.nodes.center = center_from_string(center);

  std::string matcher = to_string(c.matcher);
  v("assign", "matcher", matcher);
  c.matcher = matcher_from_string(matcher);
  v("assign", "noop_distance", c.noop_distance);
  v("assign", "min_pair_similarity", c.min_pair_similarity);
  v("assign", "min_node_observations", c.min_node_observations);

  v("metrics", "eps_pos", c.tolerance.eps_pos);
  v("metrics", "eps_open", c.tolerance.eps_open);
  v("metrics", "d_norm", c.tolerance.d_norm);
}

}  // namespace

Config::Config() {
  train.iterations = 300;
  train.prune_interval = 500;
  nodes.nn_dist_threshold = 0.1;
}

void Config::validate() const {
  if (camera.width < 16 || camera.height < 16) throw InvalidArgument("camera must be at least 16x16");
  if (!(camera.hfov_deg > 0.0 && camera.hfov_deg < 180.0)) throw InvalidArgument("hfov_deg must be in (0, 180)");
  if (walkthrough_steps < 0 || unshuffle_steps < 0) throw InvalidArgument("step budgets must be >= 0");
  if (shuffle_count < 0 || shuffle_count > 5) throw InvalidArgument("shuffle_count must be in 0..5");
  if (sh_degree < 0 || sh_degree > 3) throw InvalidArgument("sh_degree must be in 0..3");
  if (!(init_voxel > 0.0)) throw InvalidArgument("init_voxel must be > 0");
  if (cloud_stride < 1) throw InvalidArgument("cloud_stride must be >= 1");
  train.validate();
  if (feature_backend != "synthetic" && feature_backend != "file")
    throw InvalidArgument("detect.backend must be synthetic or file");
  if (feature_backend == "file" && (embeddings_dir.empty() || feature_dim < 1))
    throw InvalidArgument("file backend needs embeddings_dir and feature_dim");
  if (patch_size < 1) throw InvalidArgument("patch_size must be >= 1");
  if (!(detect.tau_patch > -1.0 && detect.tau_patch < 1.0)) throw InvalidArgument("tau_patch must be in (-1, 1)");
  if (detect.min_patches < 1) throw InvalidArgument("min_patches must be >= 1");
  nodes.validate();
  if (!(depth_margin >= 0.0)) throw InvalidArgument("depth_margin must be >= 0");
  if (min_node_observations < 1) throw InvalidArgument("min_node_observations must be >= 1");
  if (noop_distance < 0.0) throw InvalidArgument("noop_distance must be >= 0");
  if (!(tolerance.eps_pos > 0.0 && tolerance.eps_open >= 0.0 && tolerance.d_norm > 0.0))
    throw InvalidArgument("metric tolerances must be positive");
}

json to_json(const Config& cfg) {
  Config c = cfg;
  json j;
  visit(c, [&](const char* section, const char* key, auto& value) { j[section][key] = value; });
  return j;
}

Config config_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  Config c;
  std::map<std::string, std::set<std::string>> known;
  try {
    visit(c, [&](const char* section, const char* key, auto& value) {
      known[section].insert(key);
      if (j.contains(section) && j.at(section).contains(key))
        value = j.at(section).at(key).get<std::remove_reference_t<decltype(value)>>();
    });
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : j.items()) {
    if (!known.contains(section)) throw FormatError("unknown config section '" + section + "'");
    if (!body.is_object()) throw FormatError("config section '" + section + "' must be an object");
    for (const auto& [key, _] : body.items())
      if (!known[section].contains(key)) throw FormatError("unknown config key '" + section + "." + key + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

namespace {

int heading_toward(const explore::Cell& from, const explore::Cell& to) {
  if (to.col > from.col) return 0;
  if (to.row > from.row) return 1;
  if (to.col < from.col) return 2;
  return 3;
}

// Look around once, then explore; `on_frame` runs after every pose change.
explore::ExplorationResult explore_scene(sim::Simulator& sim, explore::OccupancyMap& map, std::uint64_t seed,
                                         int budget, const std::function<void()>& on_frame) {
  for (int h = 0; h < 4; ++h) {
    on_frame();
    sim.turn_left();
  }
  std::mt19937_64 rng(seed);
  auto move = [&](const explore::Cell& from, const explore::Cell& to) {
    if (!(sim.agent().cell == from)) throw std::logic_error("explorer and simulator disagree on the agent cell");
    sim.set_agent({from, heading_toward(from, to)});
    const bool ok = sim.move_forward();
    on_frame();
    return ok;
  };
  return explore::run_exploration(map, sim.agent().cell, rng, move, budget);
}

}  // namespace

Walkthrough record_walkthrough(sim::Simulator& sim, std::uint64_t seed, int step_budget) {
  Walkthrough w;
  w.map = sim.empty_map();
  w.exploration = explore_scene(sim, w.map, seed, step_budget, [&] {
    const sim::Observation obs = sim.observe();
    w.frames.push_back({static_cast<int>(w.frames.size()), sim.agent(), sim.view(), obs.rgb, obs.depth});
  });
  return w;
}

bool usable_view(const ImageF& depth, double min_depth) {
  std::vector<float> valid;
  for (float d : depth.data)
    if (d > 0.0f) valid.push_back(d);
  if (valid.empty() || 2 * valid.size() < depth.data.size()) return false;
  auto mid = valid.begin() + static_cast<std::ptrdiff_t>(valid.size() / 2);
  std::nth_element(valid.begin(), mid, valid.end());
  return *mid >= min_depth;
}

PointCloud frames_pointcloud(const std::vector<RecordedFrame>& frames, int stride) {
  PointCloud pc;
  for (const auto& f : frames) pc.append(backproject(f.view, f.depth, &f.rgb, nullptr, stride));
  return pc;
}

SplatResult train_splat(const std::vector<RecordedFrame>& frames, const Config& cfg) {
  if (frames.empty()) throw InvalidArgument("no frames to train on");
  // Bumps repeat the previous camera; each camera pose is trained on once.
  std::vector<RecordedFrame> kept;
  std::set<std::array<double, 12>> seen;
  for (const auto& f : frames) {
    std::array<double, 12> key;
    std::copy(f.view.pose.rotation.data(), f.view.pose.rotation.data() + 9, key.begin());
    std::copy(f.view.pose.translation.data(), f.view.pose.translation.data() + 3, key.begin() + 9);
    if (seen.insert(key).second && usable_view(f.depth, cfg.min_view_depth)) kept.push_back(f);
  }
  if (kept.empty()) throw InvalidArgument("no frame passes the minimum view depth");
  std::vector<train::Frame> tf;
  tf.reserve(kept.size());
  for (const auto& f : kept) tf.push_back({f.view, f.rgb});
  SplatResult out;
  out.state.cloud = train::init_from_pointcloud(frames_pointcloud(kept, cfg.cloud_stride), cfg.init_voxel, cfg.sh_degree);
  out.report = train::train(out.state, tf, cfg.train);
  return out;
}

change::ConceptTable synthetic_concepts(const sim::SynthScene& scene, const change::RegionEmbedder& embedder) {
  auto accumulate = [](std::vector<double>& sum, const std::vector<double>& e) {
    if (sum.empty()) sum.assign(e.size(), 0.0);
    for (size_t i = 0; i < e.size(); ++i) sum[i] += e[i];
  };
  auto unit = [](std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
  };
  sim::SynthScene room = scene;
  room.objects.clear();
  sim::CameraConfig cam;
  auto make_view = [&](const Vec3& eye, const Vec3& target) {
    CameraView v;
    v.width = cam.width;
    v.height = cam.height;
    v.fx = v.fy = 0.5 * cam.width / std::tan(cam.hfov_deg * M_PI / 360);
    v.cx = 0.5 * (cam.width - 1);
    v.cy = 0.5 * (cam.height - 1);
    v.pose = look_at(eye, target);
    return v;
  };
  const Vec3 mid(0.5 * room.size_x, 0.5 * room.size_y, 0.0);

  // Background: walls seen head-on, floor seen from above.
  std::vector<double> wall, floor;
  for (int k = 0; k < 4; ++k) {
    const double a = k * M_PI / 2;
    const Vec3 dir(std::cos(a), std::sin(a), 0.0);
    const Vec3 eye = mid + Vec3(0, 0, 0.8) - 0.4 * dir;
    const CameraView v = make_view(eye, eye + dir);
    const sim::Observation o = sim::observe(room, v);
    accumulate(wall, embedder.embed(o.rgb, Mask(v.width, v.height, true)));
    const CameraView down = make_view(mid + Vec3(0.3 * dir.x(), 0.3 * dir.y(), 1.0), mid + Vec3(0.3 * dir.x(), 0.3 * dir.y(), 0) + 0.01 * dir);
    const sim::Observation of = sim::observe(room, down);
    accumulate(floor, embedder.embed(of.rgb, Mask(down.width, down.height, true)));
  }
  wall = unit(wall);
  floor = unit(floor);

  change::ConceptTable table;
  std::set<std::string> seen;
  for (const auto& o : scene.objects) {
    if (!seen.insert(o.appearance).second) continue;
    sim::SynthScene catalog = room;
    sim::SimObject item = o;
    item.state.position = Vec3(mid.x(), mid.y(), o.resting_height());
    catalog.objects = {item};
    std::vector<double> sum;
    for (int k = 0; k < 4; ++k) {
      const double a = k * M_PI / 2 + 0.4;
      const Vec3 eye = mid + Vec3(1.0 * std::cos(a), 1.0 * std::sin(a), 1.2);
      const CameraView v = make_view(eye, item.state.position);
      const sim::Observation obs = sim::observe(catalog, v);
      Mask m(v.width, v.height);
      for (size_t i = 0; i < obs.ids.size(); ++i) m.data[i] = obs.ids[i] == 0;
      accumulate(sum, embedder.embed(obs.rgb, m));
    }
    const std::vector<double> e = unit(sum);
    std::vector<double> on_wall(e.size()), on_floor(e.size());
    for (size_t i = 0; i < e.size(); ++i) {
      on_wall[i] = 0.25 * e[i] + wall[i];
      on_floor[i] = 0.25 * e[i] + floor[i];
    }
    table.add(o.appearance, e);
    table.add(o.appearance + " wall", on_wall);
    table.add(o.appearance + " mirror", on_floor);
  }
  return table;
}

sim::ShuffleSpec episode_shuffle(const sim::SynthScene& goal, const Config& cfg) {
  std::mt19937_64 rng(cfg.seed * 0xD1B54A32D192ED03ull + 5);
  const int n = static_cast<int>(goal.objects.size());
  if (goal.difficulty == sim::Difficulty::kAmbiguous) {
    // Both members of one look-alike pair move, plus random others.
    const int pair = 1 + static_cast<int>(rng() % 2);
    std::vector<int> chosen{2 * pair, 2 * pair + 1};
    std::vector<int> rest;
    for (int i = 0; i < n; ++i)
      if (i / 2 != pair) rest.push_back(i);
    std::shuffle(rest.begin(), rest.end(), rng);
    const int k = cfg.shuffle_count > 0 ? cfg.shuffle_count : 3 + static_cast<int>(rng() % 3);
    for (int i = 0; static_cast<int>(chosen.size()) < std::min(k, n); ++i) chosen.push_back(rest[i]);
    chosen.resize(std::min<size_t>(chosen.size(), static_cast<size_t>(std::max(k, 0))));
    return sim::shuffle_objects(goal, chosen, rng);
  }
  const int k = cfg.shuffle_count > 0 ? cfg.shuffle_count : 1 + static_cast<int>(rng() % 5);
  return sim::random_shuffle(goal, std::min(k, n), rng);
}

std::unique_ptr<change::FeatureBackend> make_backend(const Config& cfg) {
  if (cfg.feature_backend == "file")
    return std::make_unique<change::FileFeatureBackend>(cfg.embeddings_dir, cfg.patch_size, cfg.feature_dim);
  return std::make_unique<change::SyntheticFeatureBackend>(cfg.patch_size, cfg.gradient_weight);
}

namespace {

// Object footprints are at most ~0.27 m in radius and a cell reaches 0.18 m from its center.
constexpr double kMinDropDistance = 0.5;

struct Approach {
  CameraView view;
  std::optional<Mask> mask;  // empty: use the node's refined mask
};

// Footprint of the node's points in `view`, each point widened to 3x3 pixels.
Mask project_points(const PointCloud& pc, const CameraView& view) {
  Mask m(view.width, view.height);
  for (const Vec3& p : pc.points) {
    const auto [px, depth] = view.project_world(p);
    if (depth <= 0.0) continue;
    const int u = static_cast<int>(std::lround(px.x())), v = static_cast<int>(std::lround(px.y()));
    for (int dv = -1; dv <= 1; ++dv)
      for (int du = -1; du <= 1; ++du)
        if (u + du >= 0 && u + du < view.width && v + dv >= 0 && v + dv < view.height) m.set(u + du, v + dv, true);
  }
  return m;
}

// Moves the agent to the node's best view, or, when that cell is blocked, to the reachable
// cell closest to it from which the node center is in view.
std::optional<Approach> approach_pose(sim::Simulator& sim, const explore::OccupancyMap& grid,
                                      const objects::ObjectNode& node, const sim::AgentPose& best_view) {
  if (sim.navigate(best_view)) return Approach{node.view, std::nullopt};
  std::optional<sim::AgentPose> chosen;
  double chosen_d = std::numeric_limits<double>::infinity();
  const Vec2 home = grid.center_of(best_view.cell);
  for (int r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < grid.cols(); ++c) {
      const Vec2 at = grid.center_of({r, c});
      const double reach = (at - node.center.head<2>()).norm();
      const double d = (at - home).norm();
      if (reach < kMinDropDistance || reach > 1.5 || d >= chosen_d || !sim.reachable({r, c})) continue;
      for (int h = 0; h < 4; ++h) {
        const CameraView v = sim.view_at({{r, c}, h});
        const auto [px, depth] = v.project_world(node.center);
        if (depth > 0.0 && px.x() >= 0 && px.x() < v.width && px.y() >= 0 && px.y() < v.height) {
          chosen = sim::AgentPose{{r, c}, h};
          chosen_d = d;
          break;
        }
      }
    }
  if (!chosen || !sim.navigate(*chosen)) return std::nullopt;
  const CameraView v = sim.view();
  return Approach{v, project_points(node.points, v)};
}

// Mask pixels whose observed surface is off the floor and within reach of `center`; the input
// mask when none remain.
Mask grasp_mask(const Mask& m, const CameraView& v, const ImageF& depth, const Vec3& center) {
  constexpr double kFloorClearance = 0.02, kGraspRadius = 0.35;
  const RigidTransform to_world = v.pose.inverse();
  Mask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const double d = depth.at(x, y);
      if (!m.at(x, y) || d <= 0.0) continue;
      const Vec3 p = to_world.apply(Vec3((x - v.cx) / v.fx * d, (y - v.cy) / v.fy * d, d));
      if (p.z() > kFloorClearance && (p - center).head<2>().norm() <= kGraspRadius) out.set(x, y, true);
    }
  return out.count() ? out : m;
}

// Crop pixels where `near` is not behind `far`: a newly present object occludes what it covers.
change::DetectedRegion in_front(change::DetectedRegion d, const ImageF& near, const ImageF& far, double margin) {
  for (int y = 0; y < d.crop.height; ++y)
    for (int x = 0; x < d.crop.width; ++x) {
      const float a = near.at(x, y), b = far.at(x, y);
      if (d.crop.at(x, y) && (a <= 0.0f || (b > 0.0f && a > b + margin))) d.crop.set(x, y, false);
    }
  return d;
}

}  // namespace

UnshuffleResult run_unshuffle(const GaussianCloud& goal_splat, const sim::SynthScene& goal,
                              const sim::SynthScene& shuffled, const change::ConceptTable* table, const Config& cfg) {
  cfg.validate();
  UnshuffleResult res;
  sim::Simulator sim(shuffled, cfg.camera);
  const auto backend = make_backend(cfg);
  const change::ColorHistogramEmbedder embedder;
  objects::NodeStore store(cfg.nodes);
  std::vector<sim::AgentPose> poses;
  std::set<std::tuple<int, int, int>> compared;

  explore::OccupancyMap map = sim.empty_map();
  res.exploration = explore_scene(sim, map, cfg.seed * 0x9E3779B97F4A7C15ull + 3, cfg.unshuffle_steps, [&] {
    const int frame = static_cast<int>(poses.size());
    poses.push_back(sim.agent());
    // Each pose is compared once; close-range views are skipped.
    const sim::AgentPose& pose = sim.agent();
    if (!compared.insert({pose.cell.row, pose.cell.col, pose.heading}).second) return;
    const CameraView view = sim.view();
    const sim::Observation obs = sim.observe();
    if (!usable_view(obs.depth, cfg.min_view_depth)) return;
    const render::RenderOutput rendered = render::render(goal_splat, view, cfg.train.background);
    const ImageRGB goal_rgb = rendered.to_image();
    const ImageF goal_depth = rendered.depth_image();
    const change::DetectResult det = change::detect(obs.rgb, goal_rgb, *backend, embedder,
                                                    cfg.concept_filter ? table : nullptr, cfg.detect,
                                                    "frame_" + std::to_string(frame));
    for (const auto& d : det.current)
      if (auto node = objects::make_node(in_front(d, obs.depth, goal_depth, cfg.depth_margin), objects::Setting::kShuffled, frame, view, obs.rgb, obs.depth, cfg.nodes)) {
        store.insert(std::move(*node));
        ++res.detections;
      }
    for (const auto& d : det.goal)
      if (auto node = objects::make_node(in_front(d, goal_depth, obs.depth, cfg.depth_margin), objects::Setting::kGoal, frame, view, goal_rgb, goal_depth, cfg.nodes)) {
        store.insert(std::move(*node));
        ++res.detections;
      }
  });
  res.steps = static_cast<int>(poses.size());

  for (auto& n : store.nodes())
    if (n.setting == objects::Setting::kShuffled) n.refined_mask = objects::refine_mask(n);

  // Nodes seen too few times are treated as noise.
  auto observed = [&](objects::Setting s) {
    std::vector<const objects::ObjectNode*> out;
    for (const auto* n : store.nodes_in(s))
      if (n->merge_count >= cfg.min_node_observations) out.push_back(n);
    return out;
  };
  const auto shuffled_nodes = observed(objects::Setting::kShuffled);
  const auto goal_nodes = observed(objects::Setting::kGoal);
  res.match = cfg.matcher == Matcher::kGreedy ? assign::match_greedy(shuffled_nodes, goal_nodes)
                                              : assign::match_hungarian(shuffled_nodes, goal_nodes);
  // Weak pairs are left unmatched rather than acted on.
  assign::MatchResult confident = res.match;
  confident.pairs.clear();
  for (const auto& p : res.match.pairs) {
    if (p.similarity >= cfg.min_pair_similarity) {
      confident.pairs.push_back(p);
    } else {
      confident.unmatched_shuffled.push_back(p.shuffled_id);
      confident.unmatched_goal.push_back(p.goal_id);
    }
  }
  res.plan = assign::plan_rearrangement(confident, store.nodes(), cfg.noop_distance);

  const explore::OccupancyMap grid = sim.empty_map();
  for (const auto& pp : res.plan.pairs) {
    PairOutcome out{pp, "unreachable", std::nullopt};
    const objects::ObjectNode& node = store.nodes()[static_cast<size_t>(pp.pair.shuffled_id)];
    const auto approach = approach_pose(sim, grid, node, poses[static_cast<size_t>(node.frame)]);
    if (!node.refined_mask || !approach) {
      res.outcomes.push_back(out);
      continue;
    }
    // Nearest reachable cell within a meter of the drop point that the placed object will not cover.
    std::optional<sim::AgentPose> drop;
    double best = 1.0;
    for (int r = 0; r < grid.rows(); ++r)
      for (int c = 0; c < grid.cols(); ++c) {
        const double d = (grid.center_of({r, c}) - pp.place.head<2>()).norm();
        if (d >= kMinDropDistance && d < best && sim.reachable({r, c})) {
          best = d;
          drop = sim::AgentPose{{r, c}, 0};
        }
      }
    if (!drop) {
      res.outcomes.push_back(out);
      continue;
    }
    Mask reach = approach->mask ? *approach->mask : *node.refined_mask;
    const Mask footprint = project_points(node.points, approach->view);
    for (size_t i = 0; i < reach.data.size(); ++i) reach.data[i] = reach.data[i] || footprint.data[i];
    out.picked = sim.pick(approach->view, grasp_mask(reach, approach->view, sim.observe().depth, node.center));
    if (!out.picked) {
      out.status = "pick_failed";
      res.outcomes.push_back(out);
      continue;
    }
    sim.navigate(*drop);
    sim.place(pp.place);
    out.status = "placed";
    res.outcomes.push_back(out);
  }

  res.nodes = store.nodes();
  res.report = assign::metrics(shuffled.world(), sim.world(), goal.world(), cfg.tolerance);
  res.report.matcher = to_string(cfg.matcher);
  return res;
}

// ---------------------------------------------------------------------------

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec(const Quat& v) { return json::array({v[0], v[1], v[2], v[3]}); }

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Quat quat(const json& j) {
  if (!j.is_array() || j.size() != 4) throw FormatError("expected a quaternion [w, x, y, z]");
  return Quat(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

json to_json(const sim::SynthScene& s) {
  json j;
  j["seed"] = s.seed;
  j["difficulty"] = to_string(s.difficulty);
  j["size"] = json::array({s.size_x, s.size_y});
  j["wall_height"] = s.wall_height;
  j["floor_color"] = vec(s.floor_color);
  j["wall_colors"] = json::array();
  for (const auto& c : s.wall_colors) j["wall_colors"].push_back(vec(c));
  j["objects"] = json::array();
  for (const auto& o : s.objects) {
    json jo;
    jo["id"] = o.state.object_id;
    jo["shape"] = o.shape == sim::Shape::kSphere ? "sphere" : "box";
    jo["half_extents"] = vec(o.half_extents);
    jo["color"] = vec(o.color);
    jo["accent"] = vec(o.accent);
    jo["appearance"] = o.appearance;
    jo["position"] = vec(o.state.position);
    jo["orientation"] = vec(o.state.orientation);
    jo["openness"] = o.state.openness ? json(*o.state.openness) : json(nullptr);
    j["objects"].push_back(jo);
  }
  return j;
}

sim::SynthScene scene_from_json(const json& j) {
  return guarded("scene", [&] {
    sim::SynthScene s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
    s.size_x = j.at("size").at(0).get<double>();
    s.size_y = j.at("size").at(1).get<double>();
    s.wall_height = j.at("wall_height").get<double>();
    s.floor_color = vec3(j.at("floor_color"));
    if (j.at("wall_colors").size() != 4) throw FormatError("scene needs four wall colors");
    for (int k = 0; k < 4; ++k) s.wall_colors[k] = vec3(j.at("wall_colors").at(k));
    for (const auto& jo : j.at("objects")) {
      sim::SimObject o;
      o.state.object_id = jo.at("id").get<std::string>();
      const std::string shape = jo.at("shape").get<std::string>();
      if (shape != "box" && shape != "sphere") throw FormatError("unknown shape '" + shape + "'");
      o.shape = shape == "sphere" ? sim::Shape::kSphere : sim::Shape::kBox;
      o.half_extents = vec3(jo.at("half_extents"));
      o.color = vec3(jo.at("color"));
      o.accent = vec3(jo.at("accent"));
      o.appearance = jo.at("appearance").get<std::string>();
      o.state.position = vec3(jo.at("position"));
      o.state.orientation = quat(jo.at("orientation"));
      if (!jo.at("openness").is_null()) o.state.openness = jo.at("openness").get<double>();
      s.objects.push_back(o);
    }
    s.validate();
    return s;
  });
}

json to_json(const sim::ShuffleSpec& spec) {
  json j = json::array();
  for (const auto& c : spec.changes) {
    json jc;
    jc["id"] = c.object_id;
    jc["position"] = c.position ? vec(*c.position) : json(nullptr);
    jc["openness"] = c.openness ? json(*c.openness) : json(nullptr);
    j.push_back(jc);
  }
  return j;
}

sim::ShuffleSpec shuffle_from_json(const json& j) {
  return guarded("shuffle", [&] {
    if (!j.is_array()) throw FormatError("shuffle must be an array");
    sim::ShuffleSpec spec;
    for (const auto& jc : j) {
      sim::ShuffleSpec::Change c;
      c.object_id = jc.at("id").get<std::string>();
      if (!jc.at("position").is_null()) c.position = vec3(jc.at("position"));
      if (!jc.at("openness").is_null()) c.openness = jc.at("openness").get<double>();
      spec.changes.push_back(c);
    }
    return spec;
  });
}

json to_json(const assign::EpisodeReport& r) {
  json j;
  j["success"] = r.success;
  j["fixed"] = r.fixed;
  j["fixed_strict"] = r.fixed_strict;
  j["misplaced"] = r.misplaced;
  j["energy_remaining"] = r.energy_remaining;
  j["matcher"] = r.matcher;
  j["objects"] = json::array();
  for (const auto& o : r.objects)
    j["objects"].push_back({{"object_id", o.object_id},
                            {"at_goal_initial", o.at_goal_initial},
                            {"at_goal_final", o.at_goal_final},
                            {"distance_initial", o.distance_initial},
                            {"distance_final", o.distance_final}});
  return j;
}

assign::EpisodeReport report_from_json(const json& j) {
  return guarded("report", [&] {
    assign::EpisodeReport r;
    r.success = j.at("success").get<double>();
    r.fixed = j.at("fixed").get<double>();
    r.fixed_strict = j.at("fixed_strict").get<double>();
    r.misplaced = j.at("misplaced").get<double>();
    r.energy_remaining = j.at("energy_remaining").get<double>();
    r.matcher = j.value("matcher", std::string());
    if (j.contains("objects"))
      for (const auto& o : j.at("objects"))
        r.objects.push_back({o.at("object_id").get<std::string>(), o.at("at_goal_initial").get<bool>(),
                             o.at("at_goal_final").get<bool>(), o.at("distance_initial").get<double>(),
                             o.at("distance_final").get<double>()});
    return r;
  });
}

Aggregate aggregate(const std::vector<assign::EpisodeReport>& reports) {
  if (reports.empty()) throw InvalidArgument("aggregate needs at least one report");
  Aggregate a;
  a.episodes = static_cast<int>(reports.size());
  for (const auto& r : reports) {
    a.success += r.success;
    a.fixed += r.fixed;
    a.fixed_strict += r.fixed_strict;
    a.misplaced += r.misplaced;
    a.energy_remaining += r.energy_remaining;
  }
  const double n = a.episodes;
  a.success /= n;
  a.fixed /= n;
  a.fixed_strict /= n;
  a.misplaced /= n;
  a.energy_remaining /= n;
  return a;
}

json to_json(const Aggregate& a) {
  return {{"episodes", a.episodes},         {"success", a.success},     {"fixed", a.fixed},
          {"fixed_strict", a.fixed_strict}, {"misplaced", a.misplaced}, {"energy_remaining", a.energy_remaining}};
}

std::string aggregate_csv(const std::vector<std::string>& names, const std::vector<assign::EpisodeReport>& reports,
                          const Aggregate& a) {
  if (names.size() != reports.size()) throw InvalidArgument("one name per report");
  std::ostringstream out;
  out.precision(17);
  out << "report,success,fixed,fixed_strict,misplaced,energy_remaining\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << names[i] << ',' << r.success << ',' << r.fixed << ',' << r.fixed_strict << ',' << r.misplaced << ','
        << r.energy_remaining << '\n';
  }
  out << "mean," << a.success << ',' << a.fixed << ',' << a.fixed_strict << ',' << a.misplaced << ','
      << a.energy_remaining << '\n';
  return out.str();
}

}  // namespace splatr::pipeline
