#pragma once

// Deterministic synthetic room: ray-cast RGB-D observations, shuffle episodes and a
// discrete agent that can navigate, pick and place.

#include "splatr/core.hpp"
#include "splatr/explore.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace splatr::sim {

enum class Shape { kBox, kSphere };
enum class Difficulty { kEasy, kAmbiguous };

struct SimObject {
  ObjectState state;      // position is the shape center; orientation is a yaw about +z
  Shape shape = Shape::kBox;
  Vec3 half_extents = Vec3::Constant(0.15);  // box; spheres use half_extents.x() as radius
  Vec3 color = Vec3::Constant(0.5);
  Vec3 accent = Vec3::Constant(0.5);         // band around the box top
  std::string appearance;                   // objects with equal appearance look identical

  double footprint_radius() const;
  double resting_height() const;  // z of the center when standing on the floor
};

struct SynthScene {
  double size_x = 3.0, size_y = 3.0;  // room spans [0, size_x] x [0, size_y]
  double wall_height = 1.5;
  Vec3 floor_color{0.55, 0.5, 0.45};
  Vec3 wall_colors[4] = {{0.78, 0.76, 0.7}, {0.72, 0.76, 0.78}, {0.76, 0.72, 0.74}, {0.74, 0.78, 0.72}};
  std::vector<SimObject> objects;
  std::uint64_t seed = 0;
  Difficulty difficulty = Difficulty::kEasy;

  WorldState world() const;
  const SimObject* find(const std::string& id) const;
  /// Throws InvalidArgument when an object leaves the room or two objects interpenetrate.
  void validate() const;
};

SynthScene generate_scene(std::uint64_t seed, Difficulty difficulty);

struct Observation {
  ImageRGB rgb;
  ImageF depth;              // camera z in meters, 0 where nothing was hit
  std::vector<int> ids;      // object index per pixel, -1 for room geometry or background
};

/// Ray-cast render (2x2 supersampled color; depth and ids from the pixel center).
/// Objects listed in `hidden` are not drawn.
Observation observe(const SynthScene& scene, const CameraView& view, const std::vector<int>& hidden = {});

struct ShuffleSpec {
  struct Change {
    std::string object_id;
    std::optional<Vec3> position;
    std::optional<double> openness;
  };
  std::vector<Change> changes;
};

/// Applies the spec; unlisted objects stay bit-identical. Throws InvalidArgument for
/// unknown ids or a resulting scene that fails validation.
SynthScene shuffle(const SynthScene& scene, const ShuffleSpec& spec);

/// Moves the listed objects (indices) to new free floor positions at least `min_move` away
/// from where they were and clear of every object's current and new footprint. The gap to
/// walls and footprints is 0.3 m, relaxed to 0.2 and then 0.15 m when no draw fits.
ShuffleSpec shuffle_objects(const SynthScene& scene, std::vector<int> indices, std::mt19937_64& rng,
                            double min_move = 0.6);

/// shuffle_objects on `k` objects drawn at random.
ShuffleSpec random_shuffle(const SynthScene& scene, int k, std::mt19937_64& rng, double min_move = 0.6);

struct CameraConfig {
  int width = 128, height = 96;
  double hfov_deg = 70.0;
  double height_m = 1.2;
  double pitch_deg = 30.0;  // downward
};

/// Agent heading h faces +x rotated by h * 90 degrees about +z.
struct AgentPose {
  explore::Cell cell;
  int heading = 0;
  bool operator==(const AgentPose&) const = default;
};

class Simulator {
 public:
  static constexpr double kCell = 0.25;

  Simulator(SynthScene scene, CameraConfig camera = {});

  const SynthScene& scene() const { return scene_; }
  const CameraConfig& camera() const { return camera_; }

  /// Map covering the room plus a one-cell ring of wall cells.
  explore::OccupancyMap empty_map() const;
  bool walkable(const explore::Cell& c) const;
  /// Ground-truth map (free / obstacle) of the current scene.
  explore::OccupancyMap ground_truth_map() const;

  const AgentPose& agent() const { return agent_; }
  void set_agent(const AgentPose& pose);
  /// First walkable cell in row-major order (center-out search).
  AgentPose default_start() const;

  CameraView view_at(const AgentPose& pose) const;
  CameraView view() const { return view_at(agent_); }
  Observation observe() const;
  Observation observe(const CameraView& view) const;

  /// One cell in the heading direction; false (and no motion) when blocked.
  bool move_forward();
  void turn_left();
  void turn_right();
  /// Teleports to `target` when it is reachable through walkable cells.
  bool navigate(const AgentPose& target);
  bool reachable(const explore::Cell& c) const;

  /// Picks the object covering at least half of the mask pixels as seen from `view`.
  /// Returns the object id or nullopt on failure.
  std::optional<std::string> pick(const CameraView& view, const Mask& mask);
  /// Puts the held object down with its center above `position` (x, y), resting on the floor,
  /// clamped to the room interior. False when nothing is held.
  bool place(const Vec3& position);
  const std::optional<int>& held() const { return held_; }

  WorldState world() const { return scene_.world(); }

 private:
  SynthScene scene_;
  CameraConfig camera_;
  AgentPose agent_;
  std::optional<int> held_;
};

}  // namespace splatr::sim
