#include "pigi/refine.h"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <unordered_map>

#include "json.hpp"
#include "pigi/problem_io.h"
#include "pigi/rng.h"

namespace pigi {

namespace {

constexpr const char* kFailKin = "kinematics";
constexpr const char* kFailCollision = "collision";
constexpr const char* kFailPlacement = "placement";
constexpr const char* kFailJoint = "joint-limit";
constexpr const char* kFailMotion = "motion";

const char* const kKnownTags[] = {"motion",     "kin",  "approach",
                                  "placement",  "pull", "jointlimit",
                                  "pullclose"};

bool known_tag(const std::string& tag) {
  for (const char* t : kKnownTags)
    if (tag == t) return true;
  return false;
}

// Checks that fail a whole step early run before expensive sweeps.
int tag_priority(const std::string& tag) {
  if (tag == "jointlimit") return 0;
  if (tag == "placement") return 1;
  if (tag == "kin") return 2;
  if (tag == "approach") return 3;
  if (tag == "pull" || tag == "pullclose") return 4;
  return 5;  // motion
}

// Per-category world index for every problem object; -1 for the robot.
std::vector<int> world_indices(const Problem& p) {
  const World2D& w = *p.world;
  std::vector<int> idx(p.objects.size(), -1);
  for (size_t o = 0; o < p.objects.size(); ++o) {
    const ObjectInfo& info = p.objects[o];
    switch (info.category) {
      case ObjectCategory::Item: idx[o] = w.item_index(info.id); break;
      case ObjectCategory::Surface: idx[o] = w.surface_index(info.id); break;
      case ObjectCategory::Container: idx[o] = w.container_index(info.id); break;
      case ObjectCategory::Door: idx[o] = w.container_of_door(info.id); break;
      case ObjectCategory::Space: idx[o] = w.container_of_space(info.id); break;
      case ObjectCategory::Robot: break;
    }
  }
  return idx;
}

double dist_seg_rect(Vec2 a, Vec2 b, const Rect& r) {
  if (seg_intersects_rect(a, b, r)) return 0.0;
  Vec2 c00 = r.lo, c11 = r.hi;
  Vec2 c10 = {r.hi.x, r.lo.y}, c01 = {r.lo.x, r.hi.y};
  double d = dist_seg_seg(a, b, c00, c10);
  d = std::min(d, dist_seg_seg(a, b, c10, c11));
  d = std::min(d, dist_seg_seg(a, b, c11, c01));
  return std::min(d, dist_seg_seg(a, b, c01, c00));
}

int sweep_count(double a0, double a1, double length) {
  double arc = std::fabs(a1 - a0) * length;
  return std::max(8, static_cast<int>(std::ceil(arc / kSweepStep)));
}

}  // namespace

int ConstraintGraph::var_position(int free_id) const {
  for (size_t i = 0; i < variables.size(); ++i)
    if (variables[i].id == free_id) return static_cast<int>(i);
  return -1;
}

std::string sampler_to_string(const SamplerBinding& b, const World2D& w) {
  switch (b.kind) {
    case SamplerKind::ItemGrasp:
      return "grasp(" + w.items[b.item].id + ")";
    case SamplerKind::Placement: {
      const std::string& r = b.region.is_surface
                                 ? w.surfaces[b.region.index].id
                                 : w.containers[b.region.index].space_id;
      return "placement(" + w.items[b.item].id + ", " + r + ")";
    }
    case SamplerKind::DoorAngle:
      return "angle(" + w.containers[b.container].door_id + ")";
    case SamplerKind::HandleGrasp:
      return "handle-grasp(" + w.containers[b.container].door_id + ")";
    case SamplerKind::ManipConf:
      return "conf(reach " + w.items[b.item].id + ")";
    case SamplerKind::PullConf:
      return "conf(pull " + w.containers[b.container].door_id + ")";
    case SamplerKind::FreeConf:
      return "conf(free)";
    case SamplerKind::Output:
      return "trajectory(output)";
  }
  return "?";
}

ConstraintGraph extract_constraints(const Skeleton& skel, const Problem& p) {
  const World2D& w = *p.world;
  std::vector<int> widx = world_indices(p);
  ConstraintGraph g;
  // binding strength per variable: 0 none, 1 free-conf fallback,
  // 2 role-specific, 3 output slot
  std::vector<int> strength;
  std::map<int, int> pos;

  auto touch = [&](const FreeRef& f, ValueKind kind, int step) -> int {
    auto it = pos.find(f.id);
    if (it != pos.end()) return it->second;
    int at = static_cast<int>(g.variables.size());
    pos[f.id] = at;
    ConstraintVar v;
    v.id = f.id;
    v.kind = kind;
    v.first_step = step;
    v.sampler.step = step;
    g.variables.push_back(v);
    strength.push_back(0);
    return at;
  };
  auto bind = [&](int vp, int rank, SamplerBinding b) {
    if (strength[vp] >= rank) return;
    strength[vp] = rank;
    g.variables[vp].sampler = b;
  };

  for (size_t s = 0; s < skel.steps.size(); ++s) {
    const GroundAction& ga = skel.steps[s];
    const ActionSchema& sch = ga.spec();
    const std::string& variant = sch.variant;
    int step = static_cast<int>(s);

    auto item_at = [&](int slot) {
      return widx[std::get<ObjId>(ga.args[slot])];
    };
    auto region_at = [&](int slot) {
      ObjId o = std::get<ObjId>(ga.args[slot]);
      PlaceRegion r;
      r.is_surface = p.objects[o].category == ObjectCategory::Surface;
      r.index = widx[o];
      return r;
    };

    for (size_t j = 0; j < ga.args.size(); ++j) {
      const FreeRef* f = std::get_if<FreeRef>(&ga.args[j]);
      if (!f) continue;
      int vp = touch(*f, sch.params[j].vkind, step);
      SamplerBinding b;
      b.step = step;
      b.slot = static_cast<int>(j);
      if (sch.params[j].binding == ParamBinding::Output) {
        b.kind = SamplerKind::Output;
        bind(vp, 3, b);
        continue;
      }
      if (variant == "pick@surface" || variant == "pick@space" ||
          variant == "place@surface" || variant == "place@space") {
        if (j == 4) {
          b.kind = SamplerKind::ItemGrasp;
          b.item = item_at(0);
          bind(vp, 2, b);
        } else if (j == 5) {
          b.kind = SamplerKind::ManipConf;
          b.item = item_at(0);
          bind(vp, 2, b);
        } else if (j == 3) {
          b.kind = SamplerKind::Placement;
          b.item = item_at(0);
          b.region = region_at(1);
          bind(vp, 2, b);
        }
      } else if (variant == "pullopen" || variant == "pullclose") {
        int ci = item_at(0);  // door objects map to their container
        bool open = variant == "pullopen";
        if (open && j == 3) {
          b.kind = SamplerKind::DoorAngle;
          b.container = ci;
          bind(vp, 2, b);
        } else if (j == (open ? 4u : 3u)) {
          b.kind = SamplerKind::HandleGrasp;
          b.container = ci;
          bind(vp, 2, b);
        } else if (j == (open ? 5u : 4u)) {
          b.kind = SamplerKind::PullConf;
          b.container = ci;
          bind(vp, 2, b);
        }
      } else if (variant == "move") {
        b.kind = SamplerKind::FreeConf;
        bind(vp, 1, b);
      }
    }

    for (const ConstraintTpl& tpl : sch.constraints) {
      if (!known_tag(tpl.tag))
        throw ConstraintError("unknown constraint tag: " + tpl.tag +
                              " in action " + variant);
      Constraint c;
      c.tag = tpl.tag;
      c.step = step;
      for (int pi : tpl.params) c.args.push_back(ga.args[pi]);
      g.constraints.push_back(std::move(c));
    }
  }
  (void)w;

  // Binding order: the step whose action the sampler serves, then slot.
  // Derived handle grasps go after the conf they are computed from.
  std::vector<int> order(g.variables.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int bb) {
    const ConstraintVar& va = g.variables[a];
    const ConstraintVar& vb = g.variables[bb];
    int sa = va.sampler.step, sb = vb.sampler.step;
    if (sa != sb) return sa < sb;
    int ra = va.sampler.kind == SamplerKind::HandleGrasp ? 99 : va.sampler.slot;
    int rb = vb.sampler.kind == SamplerKind::HandleGrasp ? 99 : vb.sampler.slot;
    return ra < rb;
  });
  std::vector<ConstraintVar> sorted;
  sorted.reserve(order.size());
  for (int i : order) sorted.push_back(g.variables[i]);
  g.variables = std::move(sorted);
  return g;
}

namespace {

class TimeUp {};

struct Refiner {
  const Skeleton& skel;
  const Problem& p;
  const World2D& w;
  const RefinementBudget& budget;
  uint64_t seed;
  ConstraintGraph graph;
  std::vector<int> widx;
  SceneState init_scene;
  RefinementStats stats;

  std::map<int, int> pos_of;                  // free id -> variable position
  std::vector<std::optional<Value>> bound;    // by variable position
  std::vector<std::optional<Value>> outputs;  // by step
  std::vector<int> dfs_vars;                  // positions, skipping outputs
  std::vector<std::vector<int>> ready;        // var position -> constraints
  std::vector<int> upfront;                   // constraints ready at start

  std::unordered_map<std::string, OccupancyGrid> grids;
  std::chrono::steady_clock::time_point t0;
  long draws_left = 0, checks_left = 0;
  int restart = 0;

  double lo_reach() const { return w.robot.radius + 0.01; }

  void fail(const char* bucket) { ++stats.failures[bucket]; }

  void tick() {
    double el = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    if (el > budget.wall_clock) throw TimeUp{};
  }

  const Value* val_of(const Term& t) const {
    if (const Value* v = std::get_if<Value>(&t)) return v;
    if (const FreeRef* f = std::get_if<FreeRef>(&t)) {
      auto it = pos_of.find(f->id);
      if (it == pos_of.end()) return nullptr;
      const std::optional<Value>& b = bound[it->second];
      return b ? &*b : nullptr;
    }
    return nullptr;
  }

  static Vec2 xy(const Value& v) { return {v.data[0], v.data[1]}; }

  SceneState scene_before(int step) const {
    SceneState sc = init_scene;
    for (int t = 0; t < step; ++t) {
      const GroundAction& ga = skel.steps[t];
      const std::string& variant = ga.spec().variant;
      if (variant == "pick@surface" || variant == "pick@space") {
        const Value* g = val_of(ga.args[4]);
        if (!g) continue;
        sc.held_item = widx[std::get<ObjId>(ga.args[0])];
        sc.held_offset = xy(*g);
      } else if (variant == "place@surface" || variant == "place@space") {
        const Value* pv = val_of(ga.args[3]);
        if (!pv) continue;
        int wi = widx[std::get<ObjId>(ga.args[0])];
        sc.held_item = -1;
        sc.item_pos[wi] = xy(*pv);
      } else if (variant == "pullopen") {
        const Value* a = val_of(ga.args[3]);
        if (!a) continue;
        sc.door_angles[widx[std::get<ObjId>(ga.args[0])]] = a->data[0];
      } else if (variant == "pullclose") {
        sc.door_angles[widx[std::get<ObjId>(ga.args[0])]] = 0.0;
      }
    }
    return sc;
  }

  std::optional<HeldSpec> held_spec(const SceneState& sc) const {
    if (sc.held_item < 0) return std::nullopt;
    return HeldSpec{sc.held_offset, w.items[sc.held_item].radius};
  }

  const OccupancyGrid& grid_for(const SceneState& sc,
                                const std::optional<HeldSpec>& held) {
    std::string key;
    key.reserve(sc.door_angles.size() * 8 + 24);
    auto put = [&key](double d) {
      char b[8];
      std::memcpy(b, &d, 8);
      key.append(b, 8);
    };
    for (double a : sc.door_angles) put(a);
    if (held) {
      put(held->offset.x);
      put(held->offset.y);
      put(held->radius);
    }
    auto it = grids.find(key);
    if (it != grids.end()) return it->second;
    return grids.emplace(std::move(key), build_occupancy(w, sc, held))
        .first->second;
  }

  bool base_clear(const SceneState& sc, Vec2 at) const {
    CollisionQuery q;
    q.body = CollisionQuery::Body::RobotBase;
    q.a = at;
    q.radius = w.robot.radius;
    return !check_collision(w, sc, q);
  }
  bool held_clear(const SceneState& sc, Vec2 at, double r, int ignore) const {
    CollisionQuery q;
    q.body = CollisionQuery::Body::HeldItem;
    q.a = at;
    q.radius = r;
    q.ignore_item = ignore;
    return !check_collision(w, sc, q);
  }
  bool arm_clear(const SceneState& sc, Vec2 a, Vec2 b, int ignore_door) const {
    CollisionQuery q;
    q.body = CollisionQuery::Body::Arm;
    q.a = a;
    q.b = b;
    q.ignore_door = ignore_door;
    return !check_collision(w, sc, q);
  }

  // One constraint evaluation; binds outputs[step] for motion and pulls.
  bool eval(const Constraint& c) {
    tick();
    --checks_left;
    ++stats.checks;
    SceneState sc = scene_before(c.step);

    if (c.tag == "jointlimit") {
      int ci = widx[std::get<ObjId>(c.args[0])];
      double a = val_of(c.args[1])->data[0];
      if (a <= 1e-12 || a > w.containers[ci].door_limit + kValueTol) {
        fail(kFailJoint);
        return false;
      }
      return true;
    }

    if (c.tag == "placement") {
      int wi = widx[std::get<ObjId>(c.args[0])];
      ObjId dst = std::get<ObjId>(c.args[1]);
      const Value* pv = val_of(c.args[2]);
      double rad = w.items[wi].radius;
      Rect region = p.objects[dst].category == ObjectCategory::Surface
                        ? w.surfaces[widx[dst]].rect
                        : w.containers[widx[dst]].interior();
      if (!region.shrunk(rad).contains(xy(*pv))) {
        fail(kFailPlacement);
        return false;
      }
      CollisionQuery q;
      q.body = CollisionQuery::Body::PlacedItem;
      q.a = xy(*pv);
      q.radius = rad;
      q.ignore_item = wi;
      q.include_items = true;
      if (check_collision(w, sc, q)) {
        fail(kFailCollision);
        return false;
      }
      return true;
    }

    if (c.tag == "kin") {
      int wi = widx[std::get<ObjId>(c.args[0])];
      const Value* pv = val_of(c.args[1]);
      const Value* gv = val_of(c.args[2]);
      const Value* qv = val_of(c.args[3]);
      double d = (xy(*qv) - xy(*pv)).norm();
      if (d < lo_reach() || d > w.robot.reach) {
        fail(kFailKin);
        return false;
      }
      if (!base_clear(sc, xy(*qv))) {
        fail(kFailCollision);
        return false;
      }
      if (!held_clear(sc, xy(*qv) + xy(*gv), w.items[wi].radius, wi)) {
        fail(kFailCollision);
        return false;
      }
      return true;
    }

    if (c.tag == "approach") {
      const Value* pv = val_of(c.args[1]);
      const Value* qv = val_of(c.args[2]);
      if (!arm_clear(sc, xy(*qv), xy(*pv), -1)) {
        fail(kFailCollision);
        return false;
      }
      return true;
    }

    if (c.tag == "motion") {
      const Value* qf = val_of(c.args[0]);
      const Value* qt = val_of(c.args[1]);
      std::optional<HeldSpec> held = held_spec(sc);
      if (!base_clear(sc, xy(*qt))) {
        fail(kFailCollision);
        return false;
      }
      if (held &&
          !held_clear(sc, xy(*qt) + held->offset, held->radius, sc.held_item)) {
        fail(kFailCollision);
        return false;
      }
      const OccupancyGrid& grid = grid_for(sc, held);
      std::optional<Value> traj =
          plan_motion(w, sc, xy(*qf), xy(*qt), held, &grid);
      if (!traj) {
        fail(kFailMotion);
        return false;
      }
      outputs[c.step] = std::move(traj);
      return true;
    }

    // pull | pullclose
    bool open = c.tag == "pull";
    int ci = widx[std::get<ObjId>(c.args[0])];
    const ContainerGeom& box = w.containers[ci];
    double a0 = val_of(c.args[1])->data[0];
    double a1 = open ? val_of(c.args[2])->data[0] : 0.0;
    const Value* gv = val_of(c.args[open ? 3 : 2]);
    const Value* qv = val_of(c.args[open ? 4 : 3]);
    Vec2 q = xy(*qv), off = xy(*gv);
    if ((q + off - door_handle(box, a0)).norm() > 1e-6) {
      fail(kFailKin);
      return false;
    }
    double mag = off.norm();
    if (mag < lo_reach() || mag > w.robot.reach) {
      fail(kFailKin);
      return false;
    }
    int n = sweep_count(a0, a1, box.door_length());
    for (int k = 0; k <= n; ++k) {
      double a = a0 + (a1 - a0) * k / n;
      Segment door = door_fk(box, a);
      Vec2 h = door.b;
      double d = (q - h).norm();
      if (d < lo_reach() || d > w.robot.reach) {
        fail(kFailKin);
        return false;
      }
      if (dist_point_seg(q, door.a, door.b) <
          w.robot.radius + box.door_thickness / 2) {
        fail(kFailCollision);
        return false;
      }
      if (!arm_clear(sc, q, h, ci)) {
        fail(kFailCollision);
        return false;
      }
      double half = box.door_thickness / 2;
      for (size_t ii = 0; ii < w.items.size(); ++ii) {
        if (static_cast<int>(ii) == sc.held_item) continue;
        if (dist_point_seg(sc.item_pos[ii], door.a, door.b) <
            w.items[ii].radius + half) {
          fail(kFailCollision);
          return false;
        }
      }
      if (h.x < w.bounds.lo.x || h.x > w.bounds.hi.x || h.y < w.bounds.lo.y ||
          h.y > w.bounds.hi.y) {
        fail(kFailCollision);
        return false;
      }
      bool blocked = false;
      for (const Rect& wall : w.walls)
        if (dist_seg_rect(door.a, door.b, wall) < half) blocked = true;
      for (const SurfaceGeom& s : w.surfaces)
        if (dist_seg_rect(door.a, door.b, s.rect) < half) blocked = true;
      for (size_t oc = 0; oc < w.containers.size(); ++oc) {
        if (static_cast<int>(oc) == ci) continue;
        for (const Rect& wr : w.containers[oc].wall_rects())
          if (dist_seg_rect(door.a, door.b, wr) < half) blocked = true;
      }
      if (blocked) {
        fail(kFailCollision);
        return false;
      }
    }
    outputs[c.step] =
        Value::trajectory({qv->data[0], qv->data[1], qv->data[2]});
    return true;
  }

  // Candidate j for a variable; streams are keyed (seed, id, restart, j)
  // so growing the budget appends candidates without shifting earlier ones.
  std::optional<Value> draw(const ConstraintVar& v, int j) {
    tick();
    --draws_left;
    ++stats.samples;
    ++stats.per_var_samples[v.id];
    Rng rng = Rng::stream(seed, static_cast<uint64_t>(v.id),
                          static_cast<uint64_t>(restart),
                          static_cast<uint64_t>(j));
    const SamplerBinding& b = v.sampler;
    switch (b.kind) {
      case SamplerKind::ItemGrasp:
        return sample_grasp(w, b.item, rng);
      case SamplerKind::Placement:
        try {
          return sample_placement(w, b.item, b.region, rng);
        } catch (const RegionTooSmall&) {
          fail(kFailPlacement);
          return std::nullopt;
        }
      case SamplerKind::DoorAngle: {
        double limit = w.containers[b.container].door_limit;
        return Value::joint_angle(limit * (1.0 - rng.uniform()));
      }
      case SamplerKind::HandleGrasp: {
        const GroundAction& ga = skel.steps[b.step];
        bool open = ga.spec().variant == "pullopen";
        const Value* qv = val_of(ga.args[open ? 5 : 4]);
        if (!qv) {
          fail(kFailKin);
          return std::nullopt;
        }
        SceneState sc = scene_before(b.step);
        Vec2 h = door_handle(w.containers[b.container],
                             sc.door_angles[b.container]);
        Vec2 off = h - xy(*qv);
        double mag = off.norm();
        if (mag < lo_reach() || mag > w.robot.reach) {
          fail(kFailKin);
          return std::nullopt;
        }
        return Value::grasp(off.x, off.y, std::atan2(off.y, off.x));
      }
      case SamplerKind::ManipConf: {
        const GroundAction& ga = skel.steps[b.step];
        const Value* pv = val_of(ga.args[3]);
        if (!pv) {
          fail(kFailKin);
          return std::nullopt;
        }
        SceneState sc = scene_before(b.step);
        IkTarget target;
        target.point = xy(*pv);
        target.ignore_item = b.item;
        const std::string& variant = ga.spec().variant;
        if (variant == "place@surface" || variant == "place@space") {
          const Value* gv = val_of(ga.args[4]);
          if (gv) target.held = HeldSpec{xy(*gv), w.items[b.item].radius};
        }
        std::optional<Value> conf = sample_base_conf(w, sc, target, rng);
        if (!conf) fail(kFailKin);
        return conf;
      }
      case SamplerKind::PullConf: {
        SceneState sc = scene_before(b.step);
        IkTarget target;
        target.point =
            door_handle(w.containers[b.container], sc.door_angles[b.container]);
        target.ignore_door = b.container;
        std::optional<Value> conf = sample_base_conf(w, sc, target, rng);
        if (!conf) fail(kFailKin);
        return conf;
      }
      case SamplerKind::FreeConf: {
        double x = rng.uniform(w.bounds.lo.x, w.bounds.hi.x);
        double y = rng.uniform(w.bounds.lo.y, w.bounds.hi.y);
        double theta = rng.uniform(-kPi, kPi);
        SceneState sc = scene_before(v.first_step);
        if (!base_clear(sc, {x, y})) {
          fail(kFailCollision);
          return std::nullopt;
        }
        return Value::base_conf(x, y, theta);
      }
      case SamplerKind::Output:
        return std::nullopt;
    }
    return std::nullopt;
  }

  // 0 solved, 1 subtree exhausted, 2 restart abandoned
  int descend(size_t di) {
    if (di == dfs_vars.size()) return 0;
    int vp = dfs_vars[di];
    const ConstraintVar& v = graph.variables[vp];
    int max_c =
        v.sampler.kind == SamplerKind::HandleGrasp ? 1 : budget.samples_per_var;
    for (int j = 0; j < max_c; ++j) {
      if (draws_left <= 0 || checks_left <= 0) return 2;
      std::optional<Value> cand = draw(v, j);
      if (!cand) continue;
      bound[vp] = std::move(cand);
      std::vector<int> touched;
      bool ok = true;
      for (int cix : ready[vp]) {
        const Constraint& c = graph.constraints[cix];
        bool had = outputs[c.step].has_value();
        if (!eval(c)) {
          ok = false;
          break;
        }
        if (!had && outputs[c.step]) touched.push_back(c.step);
      }
      int r = ok ? descend(di + 1) : -1;
      if (r == 0) return 0;
      bound[vp].reset();
      for (int st : touched) outputs[st].reset();
      if (r == 2) return 2;
    }
    return 1;
  }

  RefinementResult run() {
    t0 = std::chrono::steady_clock::now();
    RefinementResult res;
    stats.failures[kFailKin] = 0;
    stats.failures[kFailCollision] = 0;
    stats.failures[kFailPlacement] = 0;
    stats.failures[kFailJoint] = 0;
    stats.failures[kFailMotion] = 0;

    widx = world_indices(p);
    graph = extract_constraints(skel, p);
    init_scene = initial_scene(p);
    bound.assign(graph.variables.size(), std::nullopt);
    outputs.assign(skel.steps.size(), std::nullopt);
    for (size_t i = 0; i < graph.variables.size(); ++i) {
      pos_of[graph.variables[i].id] = static_cast<int>(i);
      if (graph.variables[i].sampler.kind != SamplerKind::Output)
        dfs_vars.push_back(static_cast<int>(i));
    }

    // A constraint is ready at the last binding it waits on: its own free
    // inputs plus every scene-shaping variable bound at an earlier step.
    ready.assign(graph.variables.size(), {});
    std::vector<int> order(graph.constraints.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const Constraint& ca = graph.constraints[a];
      const Constraint& cb = graph.constraints[b];
      if (ca.step != cb.step) return ca.step < cb.step;
      return tag_priority(ca.tag) < tag_priority(cb.tag);
    });
    for (int cix : order) {
      const Constraint& c = graph.constraints[cix];
      int at = -1;
      for (const Term& t : c.args) {
        if (const FreeRef* f = std::get_if<FreeRef>(&t)) {
          int vp = pos_of.at(f->id);
          if (graph.variables[vp].sampler.kind != SamplerKind::Output)
            at = std::max(at, vp);
        }
      }
      for (size_t vp = 0; vp < graph.variables.size(); ++vp) {
        SamplerKind k = graph.variables[vp].sampler.kind;
        bool shapes_scene = k == SamplerKind::ItemGrasp ||
                            k == SamplerKind::Placement ||
                            k == SamplerKind::DoorAngle;
        if (shapes_scene && graph.variables[vp].first_step < c.step)
          at = std::max(at, static_cast<int>(vp));
      }
      if (at < 0)
        upfront.push_back(cix);
      else
        ready[at].push_back(cix);
    }

    auto finish = [&](bool ok) {
      res.bound = ok;
      stats.seconds = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      res.stats = stats;
      return res;
    };

    try {
      draws_left = checks_left = 1L << 40;  // upfront checks are not capped
      for (int cix : upfront)
        if (!eval(graph.constraints[cix])) return finish(false);

      long cap = std::max<long>(
          512, static_cast<long>(dfs_vars.size()) * budget.samples_per_var * 32);
      for (restart = 0; restart < budget.restarts; ++restart) {
        stats.restarts_used = restart + 1;
        draws_left = checks_left = cap;
        for (int vp : dfs_vars) bound[vp].reset();
        if (descend(0) == 0) {
          Skeleton sol = skel;
          for (size_t s = 0; s < sol.steps.size(); ++s) {
            GroundAction& ga = sol.steps[s];
            for (size_t j = 0; j < ga.args.size(); ++j) {
              if (ga.spec().params[j].binding == ParamBinding::Output) {
                ga.args[j] = *outputs[s];
              } else if (const FreeRef* f = std::get_if<FreeRef>(&ga.args[j])) {
                ga.args[j] = *bound[pos_of.at(f->id)];
              }
            }
          }
          res.solution = std::move(sol);
          return finish(true);
        }
      }
    } catch (const TimeUp&) {
    }
    return finish(false);
  }
};

}  // namespace

RefinementResult sample_plan(const Skeleton& skel, const Problem& p,
                             const RefinementBudget& budget, uint64_t seed) {
  Refiner r{skel, p, *p.world, budget, seed, {}, {}, {}, {}, {}, {},
            {},   {}, {},       {},     {},   {}};
  return r.run();
}

// ---------------------------------------------------------------------------
// Independent validation. Rebuilt on the raw distance primitives so a bug
// in the sampling-side checks cannot vouch for itself.

namespace {

struct VThread {
  std::vector<double> ang;
  std::vector<Vec2> pos;
  int held = -1;
  Vec2 off;
};

bool v_in_bounds(const World2D& w, Vec2 c, double r) {
  return c.x - r >= w.bounds.lo.x && c.x + r <= w.bounds.hi.x &&
         c.y - r >= w.bounds.lo.y && c.y + r <= w.bounds.hi.y;
}

bool v_base_ok(const World2D& w, const VThread& th, Vec2 c) {
  double r = w.robot.radius;
  if (!v_in_bounds(w, c, r)) return false;
  for (const SurfaceGeom& s : w.surfaces)
    if (dist_point_rect(c, s.rect) < r) return false;
  for (const Rect& wall : w.walls)
    if (dist_point_rect(c, wall) < r) return false;
  for (size_t ci = 0; ci < w.containers.size(); ++ci) {
    const ContainerGeom& box = w.containers[ci];
    if (dist_point_rect(c, box.body) < r) return false;
    Segment d = door_fk(box, th.ang[ci]);
    if (dist_point_seg(c, d.a, d.b) < r + box.door_thickness / 2) return false;
  }
  return true;
}

bool v_disc_ok(const World2D& w, const VThread& th, Vec2 c, double r) {
  if (!v_in_bounds(w, c, r)) return false;
  for (const Rect& wall : w.walls)
    if (dist_point_rect(c, wall) < r) return false;
  for (size_t ci = 0; ci < w.containers.size(); ++ci) {
    const ContainerGeom& box = w.containers[ci];
    for (const Rect& wr : box.wall_rects())
      if (dist_point_rect(c, wr) < r) return false;
    Segment d = door_fk(box, th.ang[ci]);
    if (dist_point_seg(c, d.a, d.b) < r + box.door_thickness / 2) return false;
  }
  return true;
}

bool v_arm_ok(const World2D& w, const VThread& th, Vec2 a, Vec2 b,
              int skip_door) {
  for (const Rect& wall : w.walls)
    if (seg_intersects_rect(a, b, wall.shrunk(kContactEps))) return false;
  for (size_t ci = 0; ci < w.containers.size(); ++ci) {
    const ContainerGeom& box = w.containers[ci];
    for (const Rect& wr : box.wall_rects())
      if (seg_intersects_rect(a, b, wr.shrunk(kContactEps))) return false;
    if (static_cast<int>(ci) == skip_door) continue;
    Segment d = door_fk(box, th.ang[ci]);
    if (dist_seg_seg(a, b, d.a, d.b) < box.door_thickness / 2) return false;
  }
  return true;
}

Vec2 v_xy(const Value& v) { return {v.data[0], v.data[1]}; }

}  // namespace

ValidationReport validate_solution(const Skeleton& solution,
                                   const Problem& p) {
  const World2D& w = *p.world;
  std::vector<int> widx = world_indices(p);
  ValidationReport bad;
  bad.ok = false;

  if (!solution.free_params().empty()) {
    bad.constraint = "unbound parameter";
    return bad;
  }

  VThread th;
  SceneState sc0 = initial_scene(p);
  th.ang = sc0.door_angles;
  th.pos = sc0.item_pos;
  th.held = sc0.held_item;
  th.off = sc0.held_offset;

  State state = p.init;
  double lo = w.robot.radius + 0.01, hi = w.robot.reach;

  for (size_t s = 0; s < solution.steps.size(); ++s) {
    const GroundAction& ga = solution.steps[s];
    const std::string& variant = ga.spec().variant;
    bad.step = static_cast<int>(s);

    try {
      state = apply_abstract(state, ga, p.objects);
    } catch (const PreconditionViolation& e) {
      bad.constraint = std::string("precondition: ") + e.literal();
      return bad;
    }

    auto sweep_disc = [&](Vec2 a, Vec2 b, bool base, Vec2 held_off,
                          double held_r) {
      int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() /
                                                     kSweepStep)));
      for (int k = 0; k <= n; ++k) {
        Vec2 c = a + (b - a) * (static_cast<double>(k) / n);
        if (base && !v_base_ok(w, th, c)) return false;
        if (!base && !v_disc_ok(w, th, c, held_r)) return false;
        if (base && th.held >= 0 && !v_disc_ok(w, th, c + held_off, held_r))
          return false;
      }
      return true;
    };

    if (variant == "move") {
      const Value& qf = std::get<Value>(ga.args[1]);
      const Value& qt = std::get<Value>(ga.args[2]);
      const Value& t = std::get<Value>(ga.args[3]);
      if (t.kind != ValueKind::Trajectory || t.data.size() < 3 ||
          t.data.size() % 3 != 0) {
        bad.constraint = "trajectory";
        return bad;
      }
      size_t nw = t.data.size() / 3;
      Vec2 first = {t.data[0], t.data[1]};
      Vec2 last = {t.data[3 * (nw - 1)], t.data[3 * (nw - 1) + 1]};
      if ((first - v_xy(qf)).norm() > 1e-6 || (last - v_xy(qt)).norm() > 1e-6) {
        bad.constraint = "trajectory";
        return bad;
      }
      double held_r = th.held >= 0 ? w.items[th.held].radius : 0.0;
      for (size_t k = 0; k + 1 < nw; ++k) {
        Vec2 a = {t.data[3 * k], t.data[3 * k + 1]};
        Vec2 b = {t.data[3 * (k + 1)], t.data[3 * (k + 1) + 1]};
        if (!sweep_disc(a, b, true, th.off, held_r)) {
          bad.constraint = "trajectory";
          return bad;
        }
      }
    } else if (variant == "pick@surface" || variant == "pick@space" ||
               variant == "place@surface" || variant == "place@space") {
      bool is_pick = variant[1] == 'i';
      int wi = widx[std::get<ObjId>(ga.args[0])];
      const Value& pv = std::get<Value>(ga.args[3]);
      const Value& gv = std::get<Value>(ga.args[4]);
      const Value& qv = std::get<Value>(ga.args[5]);
      double rad = w.items[wi].radius;

      if (std::fabs(v_xy(gv).norm() - (rad + kGripperOffset)) > 1e-6) {
        bad.constraint = "grasp";
        return bad;
      }
      double d = (v_xy(qv) - v_xy(pv)).norm();
      if (d < lo - 1e-9 || d > hi + 1e-9) {
        bad.constraint = "kinematics";
        return bad;
      }
      if (!v_base_ok(w, th, v_xy(qv))) {
        bad.constraint = "collision";
        return bad;
      }
      if (is_pick && (th.pos[wi] - v_xy(pv)).norm() > 1e-6) {
        bad.constraint = "kinematics";
        return bad;
      }
      {
        // the held disc hovers at the grasp offset on both sides of the
        // action; doors and walls must clear it
        VThread ta = th;
        ta.held = wi;
        if (!v_disc_ok(w, ta, v_xy(qv) + v_xy(gv), rad)) {
          bad.constraint = "collision";
          return bad;
        }
        if (!v_arm_ok(w, ta, v_xy(qv), v_xy(pv), -1)) {
          bad.constraint = "approach";
          return bad;
        }
      }
      if (!is_pick) {
        ObjId dst = std::get<ObjId>(ga.args[1]);
        Rect region = p.objects[dst].category == ObjectCategory::Surface
                          ? w.surfaces[widx[dst]].rect
                          : w.containers[widx[dst]].interior();
        if (!region.shrunk(rad).contains(v_xy(pv))) {
          bad.constraint = "placement";
          return bad;
        }
        VThread ta = th;
        ta.held = wi;
        if (!v_disc_ok(w, ta, v_xy(pv), rad)) {
          bad.constraint = "placement";
          return bad;
        }
        for (size_t ii = 0; ii < w.items.size(); ++ii) {
          if (static_cast<int>(ii) == wi) continue;
          if ((th.pos[ii] - v_xy(pv)).norm() < w.items[ii].radius + rad) {
            bad.constraint = "collision";
            return bad;
          }
        }
      }
      if (is_pick) {
        th.held = wi;
        th.off = v_xy(gv);
      } else {
        th.held = -1;
        th.pos[wi] = v_xy(pv);
      }
    } else {  // pullopen | pullclose
      bool open = variant == "pullopen";
      int ci = widx[std::get<ObjId>(ga.args[0])];
      const ContainerGeom& box = w.containers[ci];
      double a0 = std::get<Value>(ga.args[2]).data[0];
      double a1 = open ? std::get<Value>(ga.args[3]).data[0] : 0.0;
      const Value& gv = std::get<Value>(ga.args[open ? 4 : 3]);
      const Value& qv = std::get<Value>(ga.args[open ? 5 : 4]);
      const Value& tv = std::get<Value>(ga.args[open ? 6 : 5]);

      if (std::fabs(a0 - th.ang[ci]) > 1e-9) {
        bad.constraint = "kinematics";
        return bad;
      }
      if (a0 < -kValueTol || a0 > box.door_limit + kValueTol || a1 < -kValueTol ||
          a1 > box.door_limit + kValueTol || (open && a1 <= 1e-12)) {
        bad.constraint = "joint-limit";
        return bad;
      }
      Vec2 q = v_xy(qv), off = v_xy(gv);
      if ((q + off - door_handle(box, a0)).norm() > 1e-6) {
        bad.constraint = "kinematics";
        return bad;
      }
      if (tv.kind != ValueKind::Trajectory || tv.data.size() != 3 ||
          (Vec2{tv.data[0], tv.data[1]} - q).norm() > 1e-6) {
        bad.constraint = "trajectory";
        return bad;
      }
      if (!v_base_ok(w, th, q)) {
        bad.constraint = "collision";
        return bad;
      }
      int n = sweep_count(a0, a1, box.door_length());
      double half = box.door_thickness / 2;
      for (int k = 0; k <= n; ++k) {
        double a = a0 + (a1 - a0) * k / n;
        Segment door = door_fk(box, a);
        double d = (q - door.b).norm();
        if (d < lo - 1e-9 || d > hi + 1e-9) {
          bad.constraint = "kinematics";
          return bad;
        }
        if (dist_point_seg(q, door.a, door.b) < w.robot.radius + half) {
          bad.constraint = "collision";
          return bad;
        }
        VThread ta = th;
        ta.ang[ci] = a;
        if (!v_arm_ok(w, ta, q, door.b, ci)) {
          bad.constraint = "collision";
          return bad;
        }
        for (size_t ii = 0; ii < w.items.size(); ++ii) {
          if (static_cast<int>(ii) == th.held) continue;
          if (dist_point_seg(th.pos[ii], door.a, door.b) <
              w.items[ii].radius + half) {
            bad.constraint = "collision";
            return bad;
          }
        }
        if (!v_in_bounds(w, door.b, 0.0)) {
          bad.constraint = "collision";
          return bad;
        }
        for (const Rect& wall : w.walls)
          if (dist_seg_rect(door.a, door.b, wall) < half) {
            bad.constraint = "collision";
            return bad;
          }
        for (const SurfaceGeom& sgeo : w.surfaces)
          if (dist_seg_rect(door.a, door.b, sgeo.rect) < half) {
            bad.constraint = "collision";
            return bad;
          }
        for (size_t oc = 0; oc < w.containers.size(); ++oc) {
          if (static_cast<int>(oc) == ci) continue;
          for (const Rect& wr : w.containers[oc].wall_rects())
            if (dist_seg_rect(door.a, door.b, wr) < half) {
              bad.constraint = "collision";
              return bad;
            }
        }
      }
      th.ang[ci] = a1;
    }
  }

  if (!goal_satisfied(state, p.goal)) {
    bad.step = static_cast<int>(solution.steps.size());
    bad.constraint = "goal";
    return bad;
  }
  return ValidationReport{};
}

std::string refinement_record_json(const Problem& p, const StrippedPlan& plan,
                                   const RefinementResult& r) {
  nlohmann::json j;
  j["problem"] = p.name;
  nlohmann::json steps = nlohmann::json::array();
  for (const StrippedAction& a : plan) {
    nlohmann::json step = nlohmann::json::array();
    step.push_back(a.name);
    for (ObjId o : a.objects) step.push_back(p.objects[o].id);
    steps.push_back(std::move(step));
  }
  j["plan"] = std::move(steps);
  j["outcome"] = r.bound ? "bound" : "exhausted";
  j["samples"] = r.stats.samples;
  j["checks"] = r.stats.checks;
  j["restarts"] = r.stats.restarts_used;
  j["seconds"] = r.stats.seconds;
  j["failures"] = r.stats.failures;
  return j.dump();
}

}  // namespace pigi
