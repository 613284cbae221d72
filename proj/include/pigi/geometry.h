#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pigi/model.h"
#include "pigi/rng.h"

namespace pigi {

struct Vec2 {
  double x = 0, y = 0;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

struct Rect {
  Vec2 lo, hi;
  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  bool contains(Vec2 p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
  Rect shrunk(double m) const { return {{lo.x + m, lo.y + m},
                                        {hi.x - m, hi.y - m}}; }
};

struct Segment {
  Vec2 a, b;
};

// Exact separations used by every collision path.
double dist_point_rect(Vec2 p, const Rect& r);
double dist_point_seg(Vec2 p, Vec2 a, Vec2 b);
double dist_seg_seg(Vec2 a1, Vec2 b1, Vec2 a2, Vec2 b2);
bool seg_intersects_rect(Vec2 a, Vec2 b, const Rect& r);

struct ItemGeom {
  std::string id;
  double radius = 0.1;
  int color = 0;           // palette index, [0, 8)
  int shape_category = 0;  // generation variant family; not featurized
};

struct SurfaceGeom {
  std::string id;
  Rect rect;
};

enum class Side { South, East, North, West };

// Axis-aligned box with one door-covered opening. The door is a thick
// segment hinged at one corner of the opening; angle 0 seals it and
// positive angles swing outward (counterclockwise in world frame).
struct ContainerGeom {
  std::string id;
  Rect body;
  double wall = 0.08;
  Side opening = Side::South;
  std::string door_id;
  double door_limit = 2.0;  // (0, pi]
  double door_thickness = 0.02;
  std::string space_id;

  Rect interior() const;
  std::vector<Rect> wall_rects() const;
  Vec2 door_pivot() const;
  double door_base_angle() const;  // world angle of the closed door
  double door_length() const;
};

struct RobotGeom {
  double radius = 0.18;
  double reach = 0.9;
};

struct World2D {
  Rect bounds;
  RobotGeom robot;
  std::vector<ItemGeom> items;
  std::vector<SurfaceGeom> surfaces;
  std::vector<ContainerGeom> containers;  // one door + one space each
  std::vector<Rect> walls;                // extra static obstacles

  int item_index(const std::string& id) const;
  int surface_index(const std::string& id) const;
  int container_index(const std::string& id) const;
  // Containers indexed by door id / space id.
  int container_of_door(const std::string& door_id) const;
  int container_of_space(const std::string& space_id) const;
};

class GeometryError : public std::runtime_error {
 public:
  explicit GeometryError(const std::string& m) : std::runtime_error(m) {}
};

void validate_world(const World2D& w);

// Door segment endpoints at a given opening angle. The segment spans
// pivot -> pivot + L * dir(base + angle).
Segment door_fk(const ContainerGeom& c, double angle);
// Handle point grabbed when pulling: the far endpoint.
Vec2 door_handle(const ContainerGeom& c, double angle);

// Dynamic layer on top of the static world.
struct SceneState {
  std::vector<double> door_angles;  // parallel to world.containers
  std::vector<Vec2> item_pos;       // parallel to world.items
  int held_item = -1;
  Vec2 held_offset;                 // robot -> item when held
};

struct HeldSpec {
  Vec2 offset;
  double radius = 0.0;
};

// What the moving shape is determines which obstacle classes apply:
// the base collides with tables and container footprints, a held item
// clears tables but not walls or doors, the arm segment clears tables
// and container interiors.
struct CollisionQuery {
  enum class Body { RobotBase, HeldItem, Arm, PlacedItem };
  Body body = Body::RobotBase;
  Vec2 a;               // disc center, or segment start for Arm
  Vec2 b;               // segment end (Arm only)
  double radius = 0.0;  // disc bodies
  int ignore_item = -1;
  int ignore_door = -1;  // container index whose door is skipped
  bool include_items = false;
};

bool check_collision(const World2D& w, const SceneState& sc,
                     const CollisionQuery& q);

constexpr double kGripperOffset = 0.25;  // grasp standoff beyond item radius
constexpr int kIkSamples = 64;
constexpr double kGridRes = 0.02;
constexpr double kSweepStep = 0.005;
// Arm-vs-wall tests shave rects by this margin so endpoint contact (the
// closed-door handle sits exactly on the opening corner) is a grasp, not a
// collision.
constexpr double kContactEps = 1e-9;

// Grasp as (dx, dy, phi): offset from robot center to item center while
// held; |offset| = item radius + kGripperOffset; phi = offset direction.
Value sample_grasp(const World2D& w, int item, Rng& rng);

struct PlaceRegion {
  bool is_surface = true;
  int index = 0;  // into surfaces or containers (space)
};

class RegionTooSmall : public std::runtime_error {
 public:
  explicit RegionTooSmall(const std::string& m) : std::runtime_error(m) {}
};

// Uniform pose over the region shrunk by the item radius; static shapes
// are avoided, other movables are deliberately not considered here.
// Throws RegionTooSmall when the shrunk region is empty or fully blocked.
Value sample_placement(const World2D& w, int item, const PlaceRegion& region,
                       Rng& rng);

struct IkTarget {
  Vec2 point;                     // grasp point or door handle
  int ignore_item = -1;
  int ignore_door = -1;
  std::optional<HeldSpec> held;   // carried item, if any
};

// Rejection-samples a base conf with the target in reach, a clear
// straight-line approach, and no body collision. kIkSamples attempts.
std::optional<Value> sample_base_conf(const World2D& w, const SceneState& sc,
                                      const IkTarget& target, Rng& rng);

struct OccupancyGrid {
  double res = kGridRes;
  Vec2 origin;
  int nx = 0, ny = 0;
  std::vector<uint8_t> blocked;

  int index(int ix, int iy) const { return iy * nx + ix; }
  bool in_range(int ix, int iy) const {
    return ix >= 0 && ix < nx && iy >= 0 && iy < ny;
  }
  Vec2 center(int ix, int iy) const {
    return {origin.x + (ix + 0.5) * res, origin.y + (iy + 0.5) * res};
  }
};

// Reference kernel: straightforward cell loop.
OccupancyGrid build_occupancy_serial(const World2D& w, const SceneState& sc,
                                     const std::optional<HeldSpec>& held,
                                     double res = kGridRes);
// Same result computed with an OpenMP row loop; bitwise identical.
OccupancyGrid build_occupancy(const World2D& w, const SceneState& sc,
                              const std::optional<HeldSpec>& held,
                              double res = kGridRes);

// Grid A* at kGridRes with segment-shortcut smoothing. The returned
// trajectory starts at `start`, ends at `goal`, and is collision-free
// under interpolation at kSweepStep (verified before returning).
// `grid` may carry a prebuilt occupancy for the same scene/held pair.
std::optional<Value> plan_motion(const World2D& w, const SceneState& sc,
                                 Vec2 start, Vec2 goal,
                                 const std::optional<HeldSpec>& held,
                                 const OccupancyGrid* grid = nullptr);

// True when the swept disc (plus held disc, if any) stays collision-free
// along the polyline at kSweepStep resolution.
bool trajectory_clear(const World2D& w, const SceneState& sc,
                      const Value& traj,
                      const std::optional<HeldSpec>& held);

std::string scene_to_svg(const World2D& w, const SceneState& sc,
                         const std::vector<Vec2>* path = nullptr);

}  // namespace pigi
