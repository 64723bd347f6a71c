#include "splatr/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace splatr::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

struct Hit {
  double t = kInf;
  Vec3 color = Vec3::Zero();
  int id = -1;
};

double yaw_of(const Quat& q) { return 2.0 * std::atan2(q[3], q[0]); }

// Per-object constants hoisted out of the per-ray loop.
struct Prepared {
  const SimObject* o;
  int id;
  double cy, sy;
};

Vec3 shade_box(const Prepared& p, const Vec3& local_hit, int axis, double sign) {
  const SimObject& o = *p.o;
  if (axis == 2) return sign > 0 ? o.color : 0.4 * o.color;
  Vec3 n_local = Vec3::Zero();
  n_local[axis] = sign;
  const Vec2 n(p.cy * n_local.x() - p.sy * n_local.y(), p.sy * n_local.x() + p.cy * n_local.y());
  const double light = 0.72 + 0.18 * n.dot(Vec2(0.6, 0.8));
  const bool band = local_hit.z() > o.half_extents.z() * 0.55;
  return light * (band ? o.accent : o.color);
}

void intersect_object(const Prepared& p, const Vec3& origin, const Vec3& dir, Hit& best) {
  const SimObject& o = *p.o;
  const Vec3& c = o.state.position;
  if (o.shape == Shape::kSphere) {
    const double r = o.half_extents.x();
    const Vec3 oc = origin - c;
    const double a = dir.squaredNorm(), b = oc.dot(dir), cc = oc.squaredNorm() - r * r;
    const double disc = b * b - a * cc;
    if (disc < 0.0) return;
    const double t = (-b - std::sqrt(disc)) / a;
    if (t <= 0.0 || t >= best.t) return;
    const Vec3 n = (origin + t * dir - c) / r;
    const double light = 0.5 + 0.5 * std::max(0.0, n.dot(Vec3(0.3, 0.4, 0.866)));
    best = {t, light * (n.z() > 0.6 ? o.accent : o.color), p.id};
    return;
  }
  auto to_local = [&](const Vec3& v) { return Vec3(p.cy * v.x() + p.sy * v.y(), -p.sy * v.x() + p.cy * v.y(), v.z()); };
  const Vec3 lo = to_local(origin - c), ld = to_local(dir);
  double t0 = -kInf, t1 = kInf;
  int axis = -1;
  double sign = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double h = o.half_extents[a];
    if (std::abs(ld[a]) < 1e-15) {
      if (std::abs(lo[a]) > h) return;
      continue;
    }
    double ta = (-h - lo[a]) / ld[a], tb = (h - lo[a]) / ld[a];
    double s = -1.0;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1.0;
    }
    if (ta > t0) {
      t0 = ta;
      axis = a;
      sign = s;
    }
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t0 <= 0.0 || t0 >= best.t || axis < 0) return;
  best = {t0, shade_box(p, lo + t0 * ld, axis, sign), p.id};
}

Hit trace(const SynthScene& s, const std::vector<Prepared>& objects, const Vec3& origin, const Vec3& dir) {
  Hit best;
  // Floor.
  if (dir.z() < 0.0) {
    const double t = -origin.z() / dir.z();
    const Vec3 p = origin + t * dir;
    if (t > 0.0 && p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= s.size_x && p.y() <= s.size_y) {
      const int parity = (static_cast<int>(std::floor(p.x() / 0.5)) + static_cast<int>(std::floor(p.y() / 0.5))) & 1;
      best = {t, s.floor_color * (parity ? 1.08 : 0.94), -1};
    }
  }
  // Walls (inner faces): x = 0, x = X, y = 0, y = Y.
  const double planes[4] = {0.0, s.size_x, 0.0, s.size_y};
  for (int w = 0; w < 4; ++w) {
    const int axis = w < 2 ? 0 : 1;
    if (std::abs(dir[axis]) < 1e-15) continue;
    const double t = (planes[w] - origin[axis]) / dir[axis];
    if (t <= 0.0 || t >= best.t) continue;
    const Vec3 p = origin + t * dir;
    const int other = 1 - axis;
    const double extent = other == 0 ? s.size_x : s.size_y;
    if (p.z() < 0.0 || p.z() > s.wall_height || p[other] < 0.0 || p[other] > extent) continue;
    const bool stripe = p.z() < 0.08 || std::abs(p.z() - 0.9) < 0.03;
    best = {t, s.wall_colors[w] * (stripe ? 0.6 : 1.0), -1};
  }
  for (const Prepared& p : objects) intersect_object(p, origin, dir, best);
  return best;
}

bool overlaps(const SimObject& a, const Vec3& pa, const SimObject& b, const Vec3& pb, double gap) {
  return (pa - pb).head<2>().norm() < a.footprint_radius() + b.footprint_radius() + gap;
}

bool inside_room(const SynthScene& s, const SimObject& o, const Vec3& p, double margin) {
  const double r = o.footprint_radius() + margin;
  return p.x() >= r && p.y() >= r && p.x() <= s.size_x - r && p.y() <= s.size_y - r;
}

struct Palette {
  const char* name;
  Vec3 rgb;
};

const Palette kPalette[] = {
    {"red", {0.85, 0.15, 0.12}},   {"green", {0.15, 0.7, 0.2}},    {"blue", {0.15, 0.3, 0.85}},
    {"yellow", {0.9, 0.82, 0.1}},  {"magenta", {0.8, 0.15, 0.7}},  {"cyan", {0.1, 0.75, 0.8}},
    {"orange", {0.95, 0.5, 0.08}}, {"purple", {0.45, 0.2, 0.7}},
};

}  // namespace

double SimObject::footprint_radius() const {
  return shape == Shape::kSphere ? half_extents.x() : half_extents.head<2>().norm();
}

double SimObject::resting_height() const { return shape == Shape::kSphere ? half_extents.x() : half_extents.z(); }

WorldState SynthScene::world() const {
  WorldState w;
  for (const auto& o : objects) w.objects.push_back(o.state);
  return w;
}

const SimObject* SynthScene::find(const std::string& id) const {
  for (const auto& o : objects)
    if (o.state.object_id == id) return &o;
  return nullptr;
}

void SynthScene::validate() const {
  for (size_t i = 0; i < objects.size(); ++i) {
    objects[i].state.validate();
    if (!inside_room(*this, objects[i], objects[i].state.position, 0.0))
      throw InvalidArgument("object " + objects[i].state.object_id + " leaves the room");
    for (size_t j = 0; j < i; ++j)
      if (overlaps(objects[i], objects[i].state.position, objects[j], objects[j].state.position, 0.0))
        throw InvalidArgument("objects " + objects[j].state.object_id + " and " + objects[i].state.object_id +
                              " interpenetrate");
  }
}

SynthScene generate_scene(std::uint64_t seed, Difficulty difficulty) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SynthScene s;
  s.seed = seed;
  s.difficulty = difficulty;

  std::vector<int> hues(std::size(kPalette));
  for (size_t i = 0; i < hues.size(); ++i) hues[i] = static_cast<int>(i);
  std::shuffle(hues.begin(), hues.end(), rng);

  struct Template {
    Vec3 half;
    int hue, accent_hue;
    std::string appearance;
  };
  std::vector<Template> templates;
  auto random_half = [&]() { return Vec3(0.12 + 0.07 * u(rng), 0.12 + 0.07 * u(rng), 0.1 + 0.15 * u(rng)); };
  if (difficulty == Difficulty::kEasy) {
    const int n = 4 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i)
      templates.push_back({random_half(), hues[i], hues[i], kPalette[hues[i]].name});
  } else {
    // Three pairs sharing body color and size: the first pair is identical, the others
    // differ only in the accent band.
    for (int p = 0; p < 3; ++p) {
      const Vec3 half = random_half();
      const int body = hues[p];
      const int accent_a = p == 0 ? body : hues[3 + 2 * (p - 1)];
      const int accent_b = p == 0 ? body : hues[4 + 2 * (p - 1)];
      templates.push_back({half, body, accent_a, std::string(kPalette[body].name) + "/" + kPalette[accent_a].name});
      templates.push_back({half, body, accent_b, std::string(kPalette[body].name) + "/" + kPalette[accent_b].name});
    }
  }

  for (size_t i = 0; i < templates.size(); ++i) {
    SimObject o;
    o.shape = Shape::kBox;
    o.half_extents = templates[i].half;
    o.color = kPalette[templates[i].hue].rgb;
    o.accent = templates[i].accent_hue == templates[i].hue ? o.color * 0.8 : kPalette[templates[i].accent_hue].rgb;
    o.appearance = templates[i].appearance;
    o.state.object_id = "obj" + std::to_string(i);
    o.state.orientation = quat_from_axis_angle(Vec3::UnitZ(), u(rng) * kPi / 2);
    s.objects.push_back(o);
  }
  // Rejection sampling; a layout that gets stuck is redrawn from scratch.
  for (int layout = 0;; ++layout) {
    if (layout > 1000) throw std::logic_error("scene generation failed to place objects");
    bool ok = true;
    for (size_t i = 0; i < s.objects.size() && ok; ++i) {
      SimObject& o = s.objects[i];
      ok = false;
      for (int attempt = 0; attempt < 500 && !ok; ++attempt) {
        const Vec3 p(u(rng) * s.size_x, u(rng) * s.size_y, o.resting_height());
        if (!inside_room(s, o, p, 0.25)) continue;
        bool clear = true;
        for (size_t j = 0; j < i; ++j) clear &= !overlaps(o, p, s.objects[j], s.objects[j].state.position, 0.3);
        if (!clear) continue;
        o.state.position = p;
        ok = true;
      }
    }
    if (ok) break;
  }
  s.validate();
  return s;
}

Observation observe(const SynthScene& scene, const CameraView& view, const std::vector<int>& hidden) {
  view.validate();
  Observation obs{ImageRGB(view.width, view.height), ImageF(view.width, view.height), {}};
  obs.ids.assign(static_cast<size_t>(view.width) * view.height, -1);
  const Mat3 rt = view.pose.rotation.transpose();
  const Vec3 origin = view.camera_center();
  std::vector<Prepared> prepared;
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    if (std::find(hidden.begin(), hidden.end(), static_cast<int>(i)) != hidden.end()) continue;
    const double yaw = yaw_of(scene.objects[i].state.orientation);
    prepared.push_back({&scene.objects[i], static_cast<int>(i), std::cos(yaw), std::sin(yaw)});
  }
  constexpr double kSub[2] = {-0.25, 0.25};
  for (int y = 0; y < view.height; ++y)
    for (int x = 0; x < view.width; ++x) {
      auto ray = [&](double px, double py) {
        return trace(scene, prepared, origin, rt * Vec3((px - view.cx) / view.fx, (py - view.cy) / view.fy, 1.0));
      };
      const Hit center = ray(x, y);
      const size_t idx = static_cast<size_t>(y) * view.width + x;
      obs.depth.data[idx] = std::isfinite(center.t) ? static_cast<float>(center.t) : 0.0f;
      obs.ids[idx] = center.id;
      Vec3 c = Vec3::Zero();
      for (double sy : kSub)
        for (double sx : kSub) c += ray(x + sx, y + sy).color;
      c = (c / 4.0).cwiseMax(0.0).cwiseMin(1.0);
      for (int k = 0; k < 3; ++k) obs.rgb.at(x, y, k) = static_cast<float>(c[k]);
    }
  return obs;
}

SynthScene shuffle(const SynthScene& scene, const ShuffleSpec& spec) {
  SynthScene out = scene;
  for (const auto& ch : spec.changes) {
    auto it = std::find_if(out.objects.begin(), out.objects.end(),
                           [&](const SimObject& o) { return o.state.object_id == ch.object_id; });
    if (it == out.objects.end()) throw InvalidArgument("shuffle names unknown object " + ch.object_id);
    if (ch.position) it->state.position = *ch.position;
    if (ch.openness) {
      if (!it->state.openness) throw InvalidArgument("object " + ch.object_id + " is not openable");
      it->state.openness = *ch.openness;
    }
  }
  out.validate();
  return out;
}

ShuffleSpec random_shuffle(const SynthScene& scene, int k, std::mt19937_64& rng, double min_move) {
  if (k < 0 || k > static_cast<int>(scene.objects.size())) throw InvalidArgument("shuffle count out of range");
  std::vector<int> order(scene.objects.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<size_t>(k));
  return shuffle_objects(scene, order, rng, min_move);
}

ShuffleSpec shuffle_objects(const SynthScene& scene, std::vector<int> order, std::mt19937_64& rng, double min_move) {
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end()) throw InvalidArgument("object listed twice");
  for (int i : order)
    if (i < 0 || i >= static_cast<int>(scene.objects.size())) throw InvalidArgument("object index out of range");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // A crowded room can leave the last object no room; the whole draw then restarts, and
  // after enough restarts the wall margin and object gap shrink.
  for (const double gap : {0.3, 0.2, 0.15})
    for (int restart = 0; restart < 200; ++restart) {
      ShuffleSpec spec;
      std::vector<std::pair<int, Vec3>> claimed;  // new positions already chosen
      bool complete = true;
      for (int i : order) {
        const SimObject& o = scene.objects[i];
        bool found = false;
        for (int attempt = 0; attempt < 2000 && !found; ++attempt) {
          const Vec3 p(u(rng) * scene.size_x, u(rng) * scene.size_y, o.resting_height());
          if (!inside_room(scene, o, p, gap) || (p - o.state.position).head<2>().norm() < min_move) continue;
          bool clear = true;
          // Keep clear of every original position too, so each goal spot stays free.
          for (const auto& other : scene.objects)
            if (&other != &o) clear &= !overlaps(o, p, other, other.state.position, gap);
          for (const auto& [j, q] : claimed) clear &= !overlaps(o, p, scene.objects[j], q, gap);
          if (!clear) continue;
          claimed.push_back({i, p});
          spec.changes.push_back({o.state.object_id, p, std::nullopt});
          found = true;
        }
        if (!found) {
          complete = false;
          break;
        }
      }
      if (complete) return spec;
    }
  throw std::runtime_error("no free positions for the shuffled objects");
}

// --- Simulator ----------------------------------------------------------------

Simulator::Simulator(SynthScene scene, CameraConfig camera) : scene_(std::move(scene)), camera_(camera) {
  scene_.validate();
  agent_ = default_start();
}

explore::OccupancyMap Simulator::empty_map() const {
  const int cols = static_cast<int>(std::lround(scene_.size_x / kCell)) + 2;
  const int rows = static_cast<int>(std::lround(scene_.size_y / kCell)) + 2;
  return explore::OccupancyMap(rows, cols, kCell, Vec2(-kCell, -kCell));
}

bool Simulator::walkable(const explore::Cell& c) const {
  const explore::OccupancyMap m = empty_map();
  if (!m.inside(c)) return false;
  const Vec2 center = m.center_of(c);
  const double h = kCell / 2;
  if (center.x() - h < -1e-9 || center.y() - h < -1e-9 || center.x() + h > scene_.size_x + 1e-9 ||
      center.y() + h > scene_.size_y + 1e-9)
    return false;
  for (size_t i = 0; i < scene_.objects.size(); ++i) {
    if (held_ && *held_ == static_cast<int>(i)) continue;
    const SimObject& o = scene_.objects[i];
    // Distance from the footprint circle center to the cell square.
    const Vec2 p = o.state.position.head<2>();
    const Vec2 d = (p - center).cwiseAbs() - Vec2(h, h);
    if (d.cwiseMax(0.0).norm() < o.footprint_radius()) return false;
  }
  return true;
}

explore::OccupancyMap Simulator::ground_truth_map() const {
  explore::OccupancyMap m = empty_map();
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      m.set({r, c}, walkable({r, c}) ? explore::CellState::kFree : explore::CellState::kObstacle);
  return m;
}

void Simulator::set_agent(const AgentPose& pose) {
  if (!walkable(pose.cell)) throw InvalidArgument("agent pose is not walkable");
  agent_ = {pose.cell, ((pose.heading % 4) + 4) % 4};
}

AgentPose Simulator::default_start() const {
  const explore::OccupancyMap m = empty_map();
  const explore::Cell mid{m.rows() / 2, m.cols() / 2};
  for (int ring = 0; ring < std::max(m.rows(), m.cols()); ++ring)
    for (int r = mid.row - ring; r <= mid.row + ring; ++r)
      for (int c = mid.col - ring; c <= mid.col + ring; ++c)
        if (std::max(std::abs(r - mid.row), std::abs(c - mid.col)) == ring && walkable({r, c})) return {{r, c}, 0};
  throw std::runtime_error("scene has no walkable cell");
}

CameraView Simulator::view_at(const AgentPose& pose) const {
  const explore::OccupancyMap m = empty_map();
  const Vec2 xy = m.center_of(pose.cell);
  const double yaw = pose.heading * kPi / 2, pitch = camera_.pitch_deg * kPi / 180;
  const Vec3 eye(xy.x(), xy.y(), camera_.height_m);
  const Vec3 fwd(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch), -std::sin(pitch));
  CameraView v;
  v.width = camera_.width;
  v.height = camera_.height;
  v.fx = v.fy = 0.5 * camera_.width / std::tan(camera_.hfov_deg * kPi / 360);
  v.cx = 0.5 * (camera_.width - 1);
  v.cy = 0.5 * (camera_.height - 1);
  v.pose = look_at(eye, eye + fwd);
  return v;
}

Observation Simulator::observe() const { return observe(view()); }

Observation Simulator::observe(const CameraView& v) const {
  std::vector<int> hidden;
  if (held_) hidden.push_back(*held_);
  return sim::observe(scene_, v, hidden);
}

bool Simulator::move_forward() {
  constexpr int dr[4] = {0, 1, 0, -1}, dc[4] = {1, 0, -1, 0};
  const explore::Cell next{agent_.cell.row + dr[agent_.heading], agent_.cell.col + dc[agent_.heading]};
  if (!walkable(next)) return false;
  agent_.cell = next;
  return true;
}

void Simulator::turn_left() { agent_.heading = (agent_.heading + 1) % 4; }
void Simulator::turn_right() { agent_.heading = (agent_.heading + 3) % 4; }

bool Simulator::reachable(const explore::Cell& target) const {
  if (!walkable(target)) return false;
  const explore::OccupancyMap m = empty_map();
  std::vector<char> seen(static_cast<size_t>(m.rows()) * m.cols(), 0);
  std::deque<explore::Cell> q{agent_.cell};
  seen[m.index(agent_.cell)] = 1;
  while (!q.empty()) {
    const explore::Cell c = q.front();
    q.pop_front();
    if (c == target) return true;
    for (auto [dr, dc] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const explore::Cell n{c.row + dr, c.col + dc};
      if (!m.inside(n) || seen[m.index(n)] || !walkable(n)) continue;
      seen[m.index(n)] = 1;
      q.push_back(n);
    }
  }
  return false;
}

bool Simulator::navigate(const AgentPose& target) {
  if (!reachable(target.cell)) return false;
  agent_ = {target.cell, ((target.heading % 4) + 4) % 4};
  return true;
}

std::optional<std::string> Simulator::pick(const CameraView& v, const Mask& mask) {
  if (held_) return std::nullopt;
  if (mask.width != v.width || mask.height != v.height) throw InvalidArgument("pick mask does not match the view");
  const size_t total = mask.count();
  if (total == 0) return std::nullopt;
  const Observation obs = observe(v);
  std::vector<size_t> votes(scene_.objects.size(), 0);
  for (size_t i = 0; i < mask.data.size(); ++i)
    if (mask.data[i] && obs.ids[i] >= 0) ++votes[obs.ids[i]];
  const auto best = std::max_element(votes.begin(), votes.end());
  if (best == votes.end() || 2 * *best < total) return std::nullopt;
  // An exact 50/50 split between two objects has no dominant object.
  if (2 * *best == total && std::count(votes.begin(), votes.end(), *best) > 1) return std::nullopt;
  held_ = static_cast<int>(best - votes.begin());
  return scene_.objects[*held_].state.object_id;
}

bool Simulator::place(const Vec3& position) {
  if (!held_) return false;
  SimObject& o = scene_.objects[*held_];
  const double r = o.footprint_radius();
  o.state.position = Vec3(std::clamp(position.x(), r, scene_.size_x - r), std::clamp(position.y(), r, scene_.size_y - r),
                          o.resting_height());
  held_.reset();
  return true;
}

}  // namespace splatr::sim
