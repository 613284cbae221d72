#include "pigi/geometry.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <set>
#include <tuple>

namespace pigi {

double dist_point_rect(Vec2 p, const Rect& r) {
  double dx = std::max({r.lo.x - p.x, 0.0, p.x - r.hi.x});
  double dy = std::max({r.lo.y - p.y, 0.0, p.y - r.hi.y});
  return std::sqrt(dx * dx + dy * dy);
}

double dist_point_seg(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = ab.dot(ab);
  if (len2 <= 0) return (p - a).norm();
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

namespace {

double cross(Vec2 o, Vec2 a, Vec2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool segs_intersect(Vec2 a1, Vec2 b1, Vec2 a2, Vec2 b2) {
  double d1 = cross(a2, b2, a1);
  double d2 = cross(a2, b2, b1);
  double d3 = cross(a1, b1, a2);
  double d4 = cross(a1, b1, b2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on = [](Vec2 p, Vec2 a, Vec2 b) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
  };
  if (d1 == 0 && on(a1, a2, b2)) return true;
  if (d2 == 0 && on(b1, a2, b2)) return true;
  if (d3 == 0 && on(a2, a1, b1)) return true;
  if (d4 == 0 && on(b2, a1, b1)) return true;
  return false;
}

}  // namespace

double dist_seg_seg(Vec2 a1, Vec2 b1, Vec2 a2, Vec2 b2) {
  if (segs_intersect(a1, b1, a2, b2)) return 0.0;
  return std::min({dist_point_seg(a1, a2, b2), dist_point_seg(b1, a2, b2),
                   dist_point_seg(a2, a1, b1), dist_point_seg(b2, a1, b1)});
}

bool seg_intersects_rect(Vec2 a, Vec2 b, const Rect& r) {
  if (r.contains(a) || r.contains(b)) return true;
  Vec2 c00 = r.lo, c11 = r.hi;
  Vec2 c10 = {r.hi.x, r.lo.y}, c01 = {r.lo.x, r.hi.y};
  return segs_intersect(a, b, c00, c10) || segs_intersect(a, b, c10, c11) ||
         segs_intersect(a, b, c11, c01) || segs_intersect(a, b, c01, c00);
}

Rect ContainerGeom::interior() const {
  Rect r = body.shrunk(wall);
  switch (opening) {
    case Side::South:
      r.lo.y = body.lo.y + door_thickness;
      break;
    case Side::East:
      r.hi.x = body.hi.x - door_thickness;
      break;
    case Side::North:
      r.hi.y = body.hi.y - door_thickness;
      break;
    case Side::West:
      r.lo.x = body.lo.x + door_thickness;
      break;
  }
  return r;
}

std::vector<Rect> ContainerGeom::wall_rects() const {
  double x0 = body.lo.x, y0 = body.lo.y, x1 = body.hi.x, y1 = body.hi.y;
  double w = wall;
  Rect west = {{x0, y0}, {x0 + w, y1}};
  Rect east = {{x1 - w, y0}, {x1, y1}};
  Rect south = {{x0 + w, y0}, {x1 - w, y0 + w}};
  Rect north = {{x0 + w, y1 - w}, {x1 - w, y1}};
  switch (opening) {
    case Side::South:
      return {west, east, north};
    case Side::North:
      return {west, east, south};
    case Side::East:
      return {{{x0, y0}, {x0 + w, y1}},
              {{x0 + w, y0}, {x1, y0 + w}},
              {{x0 + w, y1 - w}, {x1, y1}}};
    case Side::West:
      return {{{x1 - w, y0}, {x1, y1}},
              {{x0, y0}, {x1 - w, y0 + w}},
              {{x0, y1 - w}, {x1 - w, y1}}};
  }
  return {};
}

Vec2 ContainerGeom::door_pivot() const {
  switch (opening) {
    case Side::North:
      return {body.lo.x + wall, body.hi.y};
    case Side::South:
      return {body.hi.x - wall, body.lo.y};
    case Side::East:
      return {body.hi.x, body.hi.y - wall};
    case Side::West:
      return {body.lo.x, body.lo.y + wall};
  }
  return {};
}

double ContainerGeom::door_base_angle() const {
  switch (opening) {
    case Side::North:
      return 0.0;
    case Side::South:
      return kPi;
    case Side::East:
      return -kPi / 2;
    case Side::West:
      return kPi / 2;
  }
  return 0.0;
}

double ContainerGeom::door_length() const {
  bool horizontal = opening == Side::North || opening == Side::South;
  return (horizontal ? body.width() : body.height()) - 2 * wall;
}

int World2D::item_index(const std::string& id) const {
  for (size_t i = 0; i < items.size(); ++i)
    if (items[i].id == id) return static_cast<int>(i);
  return -1;
}

int World2D::surface_index(const std::string& id) const {
  for (size_t i = 0; i < surfaces.size(); ++i)
    if (surfaces[i].id == id) return static_cast<int>(i);
  return -1;
}

int World2D::container_index(const std::string& id) const {
  for (size_t i = 0; i < containers.size(); ++i)
    if (containers[i].id == id) return static_cast<int>(i);
  return -1;
}

int World2D::container_of_door(const std::string& door_id) const {
  for (size_t i = 0; i < containers.size(); ++i)
    if (containers[i].door_id == door_id) return static_cast<int>(i);
  return -1;
}

int World2D::container_of_space(const std::string& space_id) const {
  for (size_t i = 0; i < containers.size(); ++i)
    if (containers[i].space_id == space_id) return static_cast<int>(i);
  return -1;
}

void validate_world(const World2D& w) {
  if (w.bounds.width() <= 0 || w.bounds.height() <= 0)
    throw GeometryError("world bounds are empty");
  if (w.robot.radius <= 0 || w.robot.reach <= w.robot.radius)
    throw GeometryError("robot needs 0 < radius < reach");
  std::set<std::string> ids;
  auto claim = [&](const std::string& id) {
    if (!ids.insert(id).second)
      throw GeometryError("duplicate geometry id " + id);
  };
  for (const ItemGeom& it : w.items) {
    claim(it.id);
    if (it.radius <= 0) throw GeometryError(it.id + ": radius must be > 0");
    if (it.color < 0 || it.color >= 8)
      throw GeometryError(it.id + ": color outside palette");
  }
  for (const SurfaceGeom& s : w.surfaces) {
    claim(s.id);
    if (s.rect.width() <= 0 || s.rect.height() <= 0)
      throw GeometryError(s.id + ": degenerate rect");
  }
  for (const ContainerGeom& c : w.containers) {
    claim(c.id);
    claim(c.door_id);
    claim(c.space_id);
    if (c.wall <= 0 || c.body.width() <= 2 * c.wall ||
        c.body.height() <= 2 * c.wall)
      throw GeometryError(c.id + ": walls leave no interior");
    if (c.door_limit <= 0 || c.door_limit > kPi)
      throw GeometryError(c.id + ": door limit must lie in (0, pi]");
    if (c.door_thickness <= 0 || c.door_length() <= 0)
      throw GeometryError(c.id + ": degenerate door");
    Rect in = c.interior();
    if (in.width() <= 0 || in.height() <= 0)
      throw GeometryError(c.id + ": empty interior");
  }
}

Segment door_fk(const ContainerGeom& c, double angle) {
  if (angle < -kValueTol || angle > c.door_limit + kValueTol)
    throw GeometryError(c.door_id + ": angle outside joint limits");
  Vec2 pivot = c.door_pivot();
  double a = c.door_base_angle() + angle;
  double len = c.door_length();
  return {pivot, {pivot.x + len * std::cos(a), pivot.y + len * std::sin(a)}};
}

Vec2 door_handle(const ContainerGeom& c, double angle) {
  return door_fk(c, angle).b;
}

namespace {

struct DiscObstacles {
  bool bounds, tables, bodies, walls, doors, items;
};

bool disc_collides(const World2D& w, const SceneState& sc, Vec2 c, double r,
                   const DiscObstacles& ob, int ignore_item, int ignore_door,
                   bool include_doors = true) {
  if (ob.bounds) {
    if (c.x - r < w.bounds.lo.x || c.x + r > w.bounds.hi.x ||
        c.y - r < w.bounds.lo.y || c.y + r > w.bounds.hi.y)
      return true;
  }
  if (ob.tables)
    for (const SurfaceGeom& s : w.surfaces)
      if (dist_point_rect(c, s.rect) < r) return true;
  for (const Rect& wallRect : w.walls)
    if (dist_point_rect(c, wallRect) < r) return true;
  for (size_t ci = 0; ci < w.containers.size(); ++ci) {
    const ContainerGeom& box = w.containers[ci];
    if (ob.bodies) {
      if (dist_point_rect(c, box.body) < r) return true;
    } else if (ob.walls) {
      for (const Rect& wr : box.wall_rects())
        if (dist_point_rect(c, wr) < r) return true;
    }
    if (ob.doors && include_doors && static_cast<int>(ci) != ignore_door) {
      Segment d = door_fk(box, sc.door_angles[ci]);
      if (dist_point_seg(c, d.a, d.b) < r + box.door_thickness / 2)
        return true;
    }
  }
  if (ob.items) {
    for (size_t ii = 0; ii < w.items.size(); ++ii) {
      if (static_cast<int>(ii) == ignore_item) continue;
      if (static_cast<int>(ii) == sc.held_item) continue;
      if ((c - sc.item_pos[ii]).norm() < r + w.items[ii].radius) return true;
    }
  }
  return false;
}

}  // namespace

bool check_collision(const World2D& w, const SceneState& sc,
                     const CollisionQuery& q) {
  using B = CollisionQuery::Body;
  switch (q.body) {
    case B::RobotBase:
      return disc_collides(
          w, sc, q.a, q.radius,
          {.bounds = true, .tables = true, .bodies = true, .walls = true,
           .doors = true, .items = false},
          q.ignore_item, q.ignore_door);
    case B::HeldItem:
    case B::PlacedItem:
      return disc_collides(
          w, sc, q.a, q.radius,
          {.bounds = true, .tables = false, .bodies = false, .walls = true,
           .doors = true, .items = q.include_items},
          q.ignore_item, q.ignore_door);
    case B::Arm: {
      // Endpoint contact with a wall corner is a grasp, not a collision:
      // the closed-door handle coincides with the opening corner, so the
      // rects are shaved by an epsilon that only forgives boundary touches.
      for (const Rect& wallRect : w.walls)
        if (seg_intersects_rect(q.a, q.b, wallRect.shrunk(kContactEps)))
          return true;
      for (size_t ci = 0; ci < w.containers.size(); ++ci) {
        const ContainerGeom& box = w.containers[ci];
        for (const Rect& wr : box.wall_rects())
          if (seg_intersects_rect(q.a, q.b, wr.shrunk(kContactEps)))
            return true;
        if (static_cast<int>(ci) == q.ignore_door) continue;
        Segment d = door_fk(box, sc.door_angles[ci]);
        if (dist_seg_seg(q.a, q.b, d.a, d.b) < box.door_thickness / 2)
          return true;
      }
      return false;
    }
  }
  return false;
}

Value sample_grasp(const World2D& w, int item, Rng& rng) {
  double phi = rng.uniform(0, 2 * kPi);
  double mag = w.items[item].radius + kGripperOffset;
  return Value::grasp(mag * std::cos(phi), mag * std::sin(phi), phi);
}

Value sample_placement(const World2D& w, int item, const PlaceRegion& region,
                       Rng& rng) {
  Rect r = region.is_surface ? w.surfaces[region.index].rect
                             : w.containers[region.index].interior();
  double rad = w.items[item].radius;
  Rect s = r.shrunk(rad);
  const double eps = 1e-12;
  if (s.width() < -eps || s.height() < -eps)
    throw RegionTooSmall("item does not fit in region");
  for (int attempt = 0; attempt < 200; ++attempt) {
    double x = s.width() <= 0 ? s.lo.x : rng.uniform(s.lo.x, s.hi.x);
    double y = s.height() <= 0 ? s.lo.y : rng.uniform(s.lo.y, s.hi.y);
    // Static shapes only; doors are articulated and interiors are already
    // shrunk past the closed door line.
    Vec2 c = {x, y};
    bool hit = false;
    for (const Rect& wallRect : w.walls)
      if (dist_point_rect(c, wallRect) < rad) hit = true;
    for (const ContainerGeom& box : w.containers)
      for (const Rect& wr : box.wall_rects())
        if (dist_point_rect(c, wr) < rad) hit = true;
    if (c.x - rad < w.bounds.lo.x || c.x + rad > w.bounds.hi.x ||
        c.y - rad < w.bounds.lo.y || c.y + rad > w.bounds.hi.y)
      hit = true;
    if (!hit) return Value::pose(x, y, 0.0);
  }
  throw RegionTooSmall("no free placement in region after 200 attempts");
}

std::optional<Value> sample_base_conf(const World2D& w, const SceneState& sc,
                                      const IkTarget& target, Rng& rng) {
  double lo = w.robot.radius + 0.01;
  double hi = w.robot.reach;
  if (lo >= hi) return std::nullopt;
  for (int attempt = 0; attempt < kIkSamples; ++attempt) {
    double alpha = rng.uniform(0, 2 * kPi);
    double rho = rng.uniform(lo, hi);
    Vec2 q = {target.point.x + rho * std::cos(alpha),
              target.point.y + rho * std::sin(alpha)};
    CollisionQuery base;
    base.body = CollisionQuery::Body::RobotBase;
    base.a = q;
    base.radius = w.robot.radius;
    base.ignore_door = target.ignore_door;
    if (check_collision(w, sc, base)) continue;
    if (target.held) {
      CollisionQuery held;
      held.body = CollisionQuery::Body::HeldItem;
      held.a = q + target.held->offset;
      held.radius = target.held->radius;
      held.ignore_door = target.ignore_door;
      held.ignore_item = target.ignore_item;
      if (check_collision(w, sc, held)) continue;
    }
    CollisionQuery arm;
    arm.body = CollisionQuery::Body::Arm;
    arm.a = q;
    arm.b = target.point;
    arm.ignore_item = target.ignore_item;
    arm.ignore_door = target.ignore_door;
    if (check_collision(w, sc, arm)) continue;
    double theta = std::atan2(target.point.y - q.y, target.point.x - q.x);
    return Value::base_conf(q.x, q.y, theta);
  }
  return std::nullopt;
}

namespace {

bool cell_blocked(const World2D& w, const SceneState& sc,
                  const std::optional<HeldSpec>& held, Vec2 c) {
  CollisionQuery base;
  base.body = CollisionQuery::Body::RobotBase;
  base.a = c;
  base.radius = w.robot.radius;
  if (check_collision(w, sc, base)) return true;
  if (held) {
    CollisionQuery h;
    h.body = CollisionQuery::Body::HeldItem;
    h.a = c + held->offset;
    h.radius = held->radius;
    if (check_collision(w, sc, h)) return true;
  }
  return false;
}

OccupancyGrid make_grid_shell(const World2D& w, double res) {
  OccupancyGrid g;
  g.res = res;
  g.origin = w.bounds.lo;
  g.nx = std::max(1, static_cast<int>(std::ceil(w.bounds.width() / res)));
  g.ny = std::max(1, static_cast<int>(std::ceil(w.bounds.height() / res)));
  g.blocked.assign(static_cast<size_t>(g.nx) * g.ny, 0);
  return g;
}

}  // namespace

OccupancyGrid build_occupancy_serial(const World2D& w, const SceneState& sc,
                                     const std::optional<HeldSpec>& held,
                                     double res) {
  OccupancyGrid g = make_grid_shell(w, res);
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      g.blocked[g.index(ix, iy)] =
          cell_blocked(w, sc, held, g.center(ix, iy)) ? 1 : 0;
  return g;
}

OccupancyGrid build_occupancy(const World2D& w, const SceneState& sc,
                              const std::optional<HeldSpec>& held,
                              double res) {
  OccupancyGrid g = make_grid_shell(w, res);
#pragma omp parallel for schedule(static)
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      g.blocked[g.index(ix, iy)] =
          cell_blocked(w, sc, held, g.center(ix, iy)) ? 1 : 0;
  return g;
}

namespace {

bool sweep_clear(const World2D& w, const SceneState& sc, Vec2 a, Vec2 b,
                 const std::optional<HeldSpec>& held) {
  double len = (b - a).norm();
  int steps = std::max(1, static_cast<int>(std::ceil(len / kSweepStep)));
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    Vec2 p = a + (b - a) * t;
    if (cell_blocked(w, sc, held, p)) return false;
  }
  return true;
}

}  // namespace

bool trajectory_clear(const World2D& w, const SceneState& sc,
                      const Value& traj,
                      const std::optional<HeldSpec>& held) {
  if (traj.kind != ValueKind::Trajectory || traj.data.size() < 3)
    return false;
  size_t n = traj.data.size() / 3;
  for (size_t i = 0; i + 1 < n; ++i) {
    Vec2 a = {traj.data[3 * i], traj.data[3 * i + 1]};
    Vec2 b = {traj.data[3 * (i + 1)], traj.data[3 * (i + 1) + 1]};
    if (!sweep_clear(w, sc, a, b, held)) return false;
  }
  if (n == 1) {
    Vec2 a = {traj.data[0], traj.data[1]};
    if (cell_blocked(w, sc, held, a)) return false;
  }
  return true;
}

std::optional<Value> plan_motion(const World2D& w, const SceneState& sc,
                                 Vec2 start, Vec2 goal,
                                 const std::optional<HeldSpec>& held,
                                 const OccupancyGrid* grid) {
  OccupancyGrid local;
  if (!grid) {
    local = build_occupancy(w, sc, held);
    grid = &local;
  }
  const OccupancyGrid& g = *grid;

  auto cell_of = [&](Vec2 p) -> std::optional<std::pair<int, int>> {
    int ix = static_cast<int>(std::floor((p.x - g.origin.x) / g.res));
    int iy = static_cast<int>(std::floor((p.y - g.origin.y) / g.res));
    if (!g.in_range(ix, iy)) return std::nullopt;
    return std::make_pair(ix, iy);
  };
  auto sc_cell = cell_of(start);
  auto gc_cell = cell_of(goal);
  if (!sc_cell || !gc_cell) return std::nullopt;
  int sidx = g.index(sc_cell->first, sc_cell->second);
  int gidx = g.index(gc_cell->first, gc_cell->second);

  // The endpoints were verified collision-free by the caller; their cells
  // may still be conservatively blocked, and the final sweep check below
  // rejects anything that is actually in contact.
  auto blocked = [&](int idx) {
    if (idx == sidx || idx == gidx) return false;
    return g.blocked[idx] != 0;
  };

  const int dx8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  const int dy8[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  const double cost8[8] = {1, std::sqrt(2.0), 1, std::sqrt(2.0),
                           1, std::sqrt(2.0), 1, std::sqrt(2.0)};

  size_t total = g.blocked.size();
  std::vector<double> dist(total, std::numeric_limits<double>::infinity());
  std::vector<int> parent(total, -1);
  std::vector<uint8_t> closed(total, 0);

  auto heur = [&](int idx) {
    int ix = idx % g.nx, iy = idx / g.nx;
    int gx = gidx % g.nx, gy = gidx / g.nx;
    double adx = std::abs(ix - gx), ady = std::abs(iy - gy);
    return std::max(adx, ady) + (std::sqrt(2.0) - 1) * std::min(adx, ady);
  };

  using QItem = std::tuple<double, double, int>;  // f, g, idx
  std::priority_queue<QItem, std::vector<QItem>, std::greater<QItem>> open;
  dist[sidx] = 0;
  open.push({heur(sidx), 0.0, sidx});
  bool found = sidx == gidx;
  while (!open.empty() && !found) {
    auto [f, gc, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = 1;
    if (idx == gidx) {
      found = true;
      break;
    }
    int ix = idx % g.nx, iy = idx / g.nx;
    for (int k = 0; k < 8; ++k) {
      int nx = ix + dx8[k], ny = iy + dy8[k];
      if (!g.in_range(nx, ny)) continue;
      int nidx = g.index(nx, ny);
      if (blocked(nidx) || closed[nidx]) continue;
      // No corner cutting: a diagonal step needs both cardinals free.
      if (dx8[k] != 0 && dy8[k] != 0) {
        if (blocked(g.index(ix + dx8[k], iy)) ||
            blocked(g.index(ix, iy + dy8[k])))
          continue;
      }
      double ng = dist[idx] + cost8[k];
      if (ng < dist[nidx] - 1e-12) {
        dist[nidx] = ng;
        parent[nidx] = idx;
        open.push({ng + heur(nidx), ng, nidx});
      }
    }
  }
  if (!found) return std::nullopt;

  std::vector<Vec2> pts;
  pts.push_back(start);
  std::vector<int> chain;
  for (int at = gidx; at != -1; at = parent[at]) chain.push_back(at);
  std::reverse(chain.begin(), chain.end());
  for (size_t i = 1; i + 1 < chain.size(); ++i) {
    int ix = chain[i] % g.nx, iy = chain[i] / g.nx;
    pts.push_back(g.center(ix, iy));
  }
  pts.push_back(goal);

  // Greedy shortcutting over the polyline.
  std::vector<Vec2> smooth;
  smooth.push_back(pts[0]);
  size_t i = 0;
  while (i + 1 < pts.size()) {
    size_t j = pts.size() - 1;
    while (j > i + 1 && !sweep_clear(w, sc, pts[i], pts[j], held)) --j;
    smooth.push_back(pts[j]);
    i = j;
  }

  std::vector<double> flat;
  for (size_t kk = 0; kk < smooth.size(); ++kk) {
    Vec2 p = smooth[kk];
    Vec2 next = kk + 1 < smooth.size() ? smooth[kk + 1] : smooth[kk];
    Vec2 prev = kk > 0 ? smooth[kk - 1] : smooth[kk];
    Vec2 d = kk + 1 < smooth.size() ? next - p : p - prev;
    double theta = (d.x == 0 && d.y == 0) ? 0.0 : std::atan2(d.y, d.x);
    flat.insert(flat.end(), {p.x, p.y, theta});
  }
  Value traj = Value::trajectory(std::move(flat));
  if (!trajectory_clear(w, sc, traj, held)) return std::nullopt;
  return traj;
}

namespace {

void svg_rect(std::string& out, const Rect& r, const char* fill,
              double opacity = 1.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<rect x='%.3f' y='%.3f' width='%.3f' height='%.3f' "
                "fill='%s' opacity='%.2f'/>\n",
                r.lo.x, r.lo.y, r.width(), r.height(), fill, opacity);
  out += buf;
}

}  // namespace

std::string scene_to_svg(const World2D& w, const SceneState& sc,
                         const std::vector<Vec2>* path) {
  static const char* kPalette[8] = {"#888",    "#d62728", "#2ca02c",
                                    "#1f77b4", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2"};
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns='http://www.w3.org/2000/svg' viewBox='%.3f %.3f "
                "%.3f %.3f' width='800'>\n<g transform='translate(0,%.3f) "
                "scale(1,-1)'>\n",
                w.bounds.lo.x, w.bounds.lo.y, w.bounds.width(),
                w.bounds.height(), w.bounds.lo.y + w.bounds.hi.y);
  out += buf;
  svg_rect(out, w.bounds, "#fafafa");
  for (const SurfaceGeom& s : w.surfaces) svg_rect(out, s.rect, "#c8b27d", 0.8);
  for (const Rect& r : w.walls) svg_rect(out, r, "#444");
  for (size_t ci = 0; ci < w.containers.size(); ++ci) {
    const ContainerGeom& c = w.containers[ci];
    svg_rect(out, c.interior(), "#e8f0fe", 0.9);
    for (const Rect& r : c.wall_rects()) svg_rect(out, r, "#555");
    Segment d = door_fk(c, sc.door_angles[ci]);
    std::snprintf(buf, sizeof buf,
                  "<line x1='%.3f' y1='%.3f' x2='%.3f' y2='%.3f' "
                  "stroke='#b00' stroke-width='%.3f'/>\n",
                  d.a.x, d.a.y, d.b.x, d.b.y, c.door_thickness * 3);
    out += buf;
  }
  for (size_t ii = 0; ii < w.items.size(); ++ii) {
    Vec2 p = sc.item_pos[ii];
    std::snprintf(buf, sizeof buf,
                  "<circle cx='%.3f' cy='%.3f' r='%.3f' fill='%s'/>\n", p.x,
                  p.y, w.items[ii].radius,
                  kPalette[w.items[ii].color % 8]);
    out += buf;
  }
  if (path && path->size() > 1) {
    out += "<polyline fill='none' stroke='#06c' stroke-width='0.02' points='";
    for (Vec2 p : *path) {
      std::snprintf(buf, sizeof buf, "%.3f,%.3f ", p.x, p.y);
      out += buf;
    }
    out += "'/>\n";
  }
  out += "</g></svg>\n";
  return out;
}

}  // namespace pigi
