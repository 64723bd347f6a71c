#pragma once

// Walkthrough and unshuffle phases on the synthetic simulator, plus their configuration.

#include "splatr/assign.hpp"
#include "splatr/change.hpp"
#include "splatr/explore.hpp"
#include "splatr/objects.hpp"
#include "splatr/sim.hpp"
#include "splatr/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace splatr::pipeline {

enum class Matcher { kHungarian, kGreedy };

std::string to_string(Matcher m);
Matcher matcher_from_string(const std::string& s);
std::string to_string(sim::Difficulty d);
sim::Difficulty difficulty_from_string(const std::string& s);

struct Config {
  // scene
  std::uint64_t seed = 7;
  sim::Difficulty difficulty = sim::Difficulty::kEasy;
  int shuffle_count = 0;  // 0: drawn from 1..5 with the episode seed
  sim::CameraConfig camera;
  // exploration
  int walkthrough_steps = 700;
  int unshuffle_steps = 1200;
  double min_view_depth = 0.5;  // frames with a closer median depth are not trained on or compared
  // splat
  int sh_degree = 0;
  double init_voxel = 0.08;
  int cloud_stride = 4;    // pixel stride when backprojecting frames for initialization
  train::TrainConfig train;
  // change detection
  std::string feature_backend = "synthetic";  // or "file"
  std::string embeddings_dir;                 // file backend input
  int patch_size = 8;
  int feature_dim = 0;  // file backend only
  double gradient_weight = 0.5;
  change::DetectConfig detect;
  bool concept_filter = true;
  // nodes
  objects::NodeStoreConfig nodes;
  double depth_margin = 0.05;  // a node keeps crop pixels where its side is at most this much farther
  // assignment and execution
  Matcher matcher = Matcher::kHungarian;
  double noop_distance = 0.3;
  double min_pair_similarity = 0.8;
  int min_node_observations = 3;  // nodes merged from fewer observations are not matched
  assign::Tolerance tolerance;

  Config();
  void validate() const;
};

/// Every key is written; reading accepts partial documents (missing keys keep their
/// defaults) and rejects unknown keys.
nlohmann::ordered_json to_json(const Config& cfg);
Config config_from_json(const nlohmann::ordered_json& j);

// ---------------------------------------------------------------------------

struct RecordedFrame {
  int step = 0;
  sim::AgentPose pose;
  CameraView view;
  ImageRGB rgb;
  ImageF depth;
  Quat stored_rotation = Quat::Zero();  // quaternion as read from a dataset; zero when recorded live
};

struct Walkthrough {
  std::vector<RecordedFrame> frames;
  explore::OccupancyMap map;
  explore::ExplorationResult exploration;
};

/// Explores the simulator's scene with the bump-driven explorer, recording one RGB-D frame
/// per motion attempt (plus a four-heading look-around at the start).
Walkthrough record_walkthrough(sim::Simulator& sim, std::uint64_t seed, int step_budget);

/// True when at least half the pixels have depth and their median is at least `min_depth`.
bool usable_view(const ImageF& depth, double min_depth);

/// Union of the frames' colored backprojections, sampled every `stride` pixels.
PointCloud frames_pointcloud(const std::vector<RecordedFrame>& frames, int stride);

struct SplatResult {
  train::TrainState state;
  train::TrainReport report;
};

SplatResult train_splat(const std::vector<RecordedFrame>& frames, const Config& cfg);

/// Concept table for the synthetic world: each object appearance is embedded from a
/// catalog rendering; "<name> wall" and "<name> mirror" blend it with the wall and floor.
change::ConceptTable synthetic_concepts(const sim::SynthScene& scene, const change::RegionEmbedder& embedder);

/// The shuffle applied to a goal scene for an episode.
sim::ShuffleSpec episode_shuffle(const sim::SynthScene& goal, const Config& cfg);

struct PairOutcome {
  assign::PlannedPair planned;
  std::string status;  // "placed", "pick_failed", "unreachable"
  std::optional<std::string> picked;
};

struct UnshuffleResult {
  std::vector<objects::ObjectNode> nodes;
  assign::MatchResult match;
  assign::Plan plan;
  std::vector<PairOutcome> outcomes;
  explore::ExplorationResult exploration;
  int steps = 0;
  int detections = 0;
  assign::EpisodeReport report;
};

std::unique_ptr<change::FeatureBackend> make_backend(const Config& cfg);

/// Explores the shuffled scene, compares each observation with the splat rendered from the
/// same camera, accumulates nodes, matches, executes the plan and scores the result.
UnshuffleResult run_unshuffle(const GaussianCloud& goal_splat, const sim::SynthScene& goal,
                              const sim::SynthScene& shuffled, const change::ConceptTable* table, const Config& cfg);

// ---------------------------------------------------------------------------
// JSON forms

nlohmann::ordered_json to_json(const sim::SynthScene& scene);
sim::SynthScene scene_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const sim::ShuffleSpec& spec);
sim::ShuffleSpec shuffle_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const assign::EpisodeReport& r);
assign::EpisodeReport report_from_json(const nlohmann::ordered_json& j);

struct Aggregate {
  int episodes = 0;
  double success = 0.0, fixed = 0.0, fixed_strict = 0.0, misplaced = 0.0, energy_remaining = 0.0;
};

/// Per-metric means. Throws InvalidArgument for an empty list.
Aggregate aggregate(const std::vector<assign::EpisodeReport>& reports);
nlohmann::ordered_json to_json(const Aggregate& a);
std::string aggregate_csv(const std::vector<std::string>& names, const std::vector<assign::EpisodeReport>& reports,
                          const Aggregate& a);

}  // namespace splatr::pipeline
