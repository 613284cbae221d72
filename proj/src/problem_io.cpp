#include "pigi/problem_io.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace pigi {

namespace {

std::string describe(const SExpr& e) {
  switch (e.kind) {
    case SExpr::Kind::Symbol:
      return "'" + e.text + "'";
    case SExpr::Kind::Number:
      return "number " + write_sexpr(e, -1);
    case SExpr::Kind::String:
      return "string \"" + e.text + "\"";
    case SExpr::Kind::List:
      return e.head().empty() ? "a list" : "(" + e.head() + " ...)";
  }
  return "?";
}

[[noreturn]] void fail(const SExpr& e, const std::string& expected,
                       const std::string& detail = "") {
  throw ParseError(e.span, expected, describe(e), detail);
}

const SExpr& nth(const SExpr& list, size_t i, const char* expected) {
  if (list.kind != SExpr::Kind::List || i >= list.items.size())
    fail(list, expected, "missing element " + std::to_string(i));
  return list.items[i];
}

const std::string& sym(const SExpr& e, const char* what) {
  if (e.kind != SExpr::Kind::Symbol) fail(e, what);
  return e.text;
}

double num(const SExpr& e, const char* what) {
  if (e.kind != SExpr::Kind::Number) fail(e, what);
  return e.num;
}

// Locates the unique (head ...) child; null when absent.
const SExpr* find_form(const SExpr& parent, const char* head,
                       size_t from = 1) {
  const SExpr* found = nullptr;
  for (size_t i = from; i < parent.items.size(); ++i) {
    const SExpr& c = parent.items[i];
    if (c.kind == SExpr::Kind::List && c.head() == head) {
      if (found) fail(c, std::string("a single (") + head + " ...) form");
      found = &c;
    }
  }
  return found;
}

const SExpr& need_form(const SExpr& parent, const char* head,
                       size_t from = 1) {
  const SExpr* f = find_form(parent, head, from);
  if (!f) fail(parent, std::string("a (") + head + " ...) form");
  return *f;
}

Rect rect_from(const SExpr& form, size_t from) {
  if (form.items.size() != from + 4)
    fail(form, "x y w h", "4 numbers required");
  double x = num(form.items[from], "number x");
  double y = num(form.items[from + 1], "number y");
  double w = num(form.items[from + 2], "number w");
  double h = num(form.items[from + 3], "number h");
  return {{x, y}, {x + w, y + h}};
}

double single_num(const SExpr& form) {
  if (form.items.size() != 2) fail(form, "one number");
  return num(form.items[1], "a number");
}

Side side_by_name(const SExpr& e) {
  const std::string& s = sym(e, "an opening side");
  if (s == "south") return Side::South;
  if (s == "east") return Side::East;
  if (s == "north") return Side::North;
  if (s == "west") return Side::West;
  fail(e, "south, east, north or west");
}

const char* side_name(Side s) {
  switch (s) {
    case Side::South:
      return "south";
    case Side::East:
      return "east";
    case Side::North:
      return "north";
    case Side::West:
      return "west";
  }
  return "?";
}

Value value_from_sexpr(const SExpr& e) {
  if (e.kind != SExpr::Kind::List || e.items.empty())
    fail(e, "a value form like (pose x y theta)");
  const std::string& h = e.head();
  std::vector<double> d;
  for (size_t i = 1; i < e.items.size(); ++i)
    d.push_back(num(e.items[i], "a number"));
  if (h == "pose" && d.size() == 3) return Value::pose(d[0], d[1], d[2]);
  if (h == "grasp" && d.size() == 3) return Value::grasp(d[0], d[1], d[2]);
  if (h == "baseconf" && d.size() == 3)
    return Value::base_conf(d[0], d[1], d[2]);
  if (h == "jointangle" && d.size() == 1) return Value::joint_angle(d[0]);
  if (h == "traj" && !d.empty() && d.size() % 3 == 0)
    return Value::trajectory(std::move(d));
  fail(e, "a value form with the right arity");
}

SExpr value_to_sexpr(const Value& v) {
  std::vector<SExpr> items;
  items.push_back(SExpr::symbol(value_kind_name(v.kind)));
  for (double d : v.data) items.push_back(SExpr::number(d));
  return SExpr::list(std::move(items));
}

}  // namespace

World2D parse_world(const std::string& text, const std::string& filename) {
  SExpr root = parse_sexpr(text, filename);
  if (root.head() != "world") fail(root, "(world ...)");
  World2D w;
  bool saw_bounds = false, saw_robot = false;
  for (size_t i = 1; i < root.items.size(); ++i) {
    const SExpr& f = root.items[i];
    if (f.kind != SExpr::Kind::List || f.items.empty())
      fail(f, "a (bounds/robot/surface/container/item/wallrect ...) form");
    const std::string& h = f.head();
    if (h == "bounds") {
      w.bounds = rect_from(f, 1);
      saw_bounds = true;
    } else if (h == "robot") {
      w.robot.radius = single_num(need_form(f, "radius"));
      w.robot.reach = single_num(need_form(f, "reach"));
      saw_robot = true;
    } else if (h == "surface") {
      SurfaceGeom s;
      s.id = sym(nth(f, 1, "surface id"), "surface id");
      s.rect = rect_from(need_form(f, "rect", 2), 1);
      w.surfaces.push_back(std::move(s));
    } else if (h == "container") {
      ContainerGeom c;
      c.id = sym(nth(f, 1, "container id"), "container id");
      c.body = rect_from(need_form(f, "body", 2), 1);
      c.wall = single_num(need_form(f, "wall", 2));
      c.opening = side_by_name(nth(need_form(f, "opening", 2), 1,
                                   "opening side"));
      const SExpr& door = need_form(f, "door", 2);
      c.door_id = sym(nth(door, 1, "door id"), "door id");
      c.door_limit = single_num(need_form(door, "limit", 2));
      c.door_thickness = single_num(need_form(door, "thickness", 2));
      const SExpr& space = need_form(f, "space", 2);
      c.space_id = sym(nth(space, 1, "space id"), "space id");
      w.containers.push_back(std::move(c));
    } else if (h == "item") {
      ItemGeom it;
      it.id = sym(nth(f, 1, "item id"), "item id");
      it.radius = single_num(need_form(f, "radius", 2));
      it.color = static_cast<int>(single_num(need_form(f, "color", 2)));
      it.shape_category =
          static_cast<int>(single_num(need_form(f, "shape", 2)));
      w.items.push_back(std::move(it));
    } else if (h == "wallrect") {
      w.walls.push_back(rect_from(f, 1));
    } else {
      fail(f, "one of bounds/robot/surface/container/item/wallrect");
    }
  }
  if (!saw_bounds) fail(root, "a (bounds ...) form");
  if (!saw_robot) fail(root, "a (robot ...) form");
  validate_world(w);
  return w;
}

namespace {

SExpr rect_to_items(const char* head, const Rect& r) {
  return SExpr::list({SExpr::symbol(head), SExpr::number(r.lo.x),
                      SExpr::number(r.lo.y), SExpr::number(r.width()),
                      SExpr::number(r.height())});
}

SExpr kv(const char* head, double v) {
  return SExpr::list({SExpr::symbol(head), SExpr::number(v)});
}

}  // namespace

std::string serialize_world(const World2D& w) {
  std::vector<SExpr> forms;
  forms.push_back(rect_to_items("bounds", w.bounds));
  forms.push_back(SExpr::list({SExpr::symbol("robot"),
                               kv("radius", w.robot.radius),
                               kv("reach", w.robot.reach)}));
  for (const SurfaceGeom& s : w.surfaces)
    forms.push_back(SExpr::list({SExpr::symbol("surface"),
                                 SExpr::symbol(s.id),
                                 rect_to_items("rect", s.rect)}));
  for (const ContainerGeom& c : w.containers) {
    SExpr door = SExpr::list({SExpr::symbol("door"), SExpr::symbol(c.door_id),
                              kv("limit", c.door_limit),
                              kv("thickness", c.door_thickness)});
    forms.push_back(SExpr::list(
        {SExpr::symbol("container"), SExpr::symbol(c.id),
         rect_to_items("body", c.body), kv("wall", c.wall),
         SExpr::list({SExpr::symbol("opening"),
                      SExpr::symbol(side_name(c.opening))}),
         std::move(door),
         SExpr::list({SExpr::symbol("space"), SExpr::symbol(c.space_id)})}));
  }
  for (const ItemGeom& it : w.items)
    forms.push_back(SExpr::list(
        {SExpr::symbol("item"), SExpr::symbol(it.id), kv("radius", it.radius),
         kv("color", it.color), kv("shape", it.shape_category)}));
  for (const Rect& r : w.walls) forms.push_back(rect_to_items("wallrect", r));

  std::string out = "(world";
  for (const SExpr& f : forms) {
    out += "\n  ";
    out += write_sexpr(f, -1);
  }
  out += ")\n";
  return out;
}

SExpr literal_to_sexpr(const Literal& l,
                       const std::vector<ObjectInfo>& objects) {
  std::vector<SExpr> items;
  items.push_back(SExpr::symbol(pred_info(l.pred).name));
  for (const Term& t : l.args) {
    if (std::holds_alternative<ObjId>(t))
      items.push_back(SExpr::symbol(objects[std::get<ObjId>(t)].id));
    else if (std::holds_alternative<Value>(t))
      items.push_back(value_to_sexpr(std::get<Value>(t)));
    else
      items.push_back(
          SExpr::symbol("#" + std::to_string(std::get<FreeRef>(t).id)));
  }
  return SExpr::list(std::move(items));
}

Literal literal_from_sexpr(const SExpr& e, const Problem& p) {
  if (e.kind != SExpr::Kind::List || e.items.empty() ||
      e.items[0].kind != SExpr::Kind::Symbol)
    fail(e, "a literal like (supported tomato1 table1 (pose ...))");
  auto pred = pred_by_name(e.items[0].text);
  if (!pred) fail(e.items[0], "a predicate name");
  const PredInfo& info = pred_info(*pred);
  size_t full = info.args.size();
  size_t got = e.items.size() - 1;
  bool short_ok = info.trailing_value_optional && got == full - 1;
  if (got != full && !short_ok)
    fail(e, std::string(info.name) + " with " + std::to_string(full) +
                (info.trailing_value_optional ? " (or one fewer)" : "") +
                " arguments",
         "arity mismatch");
  Literal l;
  l.pred = *pred;
  for (size_t i = 0; i < got; ++i) {
    const SExpr& a = e.items[i + 1];
    const PredArgSpec& spec = info.args[i];
    if (spec.is_object) {
      const std::string& id = sym(a, "an object id");
      auto oid = p.find_object(id);
      if (!oid) fail(a, "a declared object id");
      if (p.objects[*oid].category != spec.cat)
        fail(a, std::string("a ") + category_name(spec.cat) + " object");
      l.args.emplace_back(*oid);
    } else {
      if (a.kind == SExpr::Kind::Symbol && !a.text.empty() &&
          a.text[0] == '#')
        fail(a, "a concrete value", "free parameters not allowed here");
      Value v = value_from_sexpr(a);
      if (v.kind != spec.vkind)
        fail(a, std::string("a ") + value_kind_name(spec.vkind) + " value");
      l.args.emplace_back(std::move(v));
    }
  }
  return l;
}

Problem parse_problem(const std::string& text, const std::string& filename) {
  SExpr root = parse_sexpr(text, filename);
  if (root.head() != "problem") fail(root, "(problem <name> ...)");
  Problem p;
  p.name = sym(nth(root, 1, "problem name"), "problem name");

  const SExpr& world = need_form(root, "world", 2);
  const SExpr& wpath = nth(world, 1, "world file path");
  if (wpath.kind != SExpr::Kind::String) fail(wpath, "a quoted path");
  p.world_path = wpath.text;

  const SExpr& objs = need_form(root, "objects", 2);
  std::vector<std::pair<const SExpr*, std::string>> parents;
  for (size_t i = 1; i < objs.items.size(); ++i) {
    const SExpr& o = objs.items[i];
    if (o.kind != SExpr::Kind::List || o.items.size() < 2)
      fail(o, "(category id ...)");
    auto cat = category_by_name(sym(o.items[0], "an object category"));
    if (!cat) fail(o.items[0], "an object category");
    ObjectInfo info;
    info.category = *cat;
    info.id = sym(o.items[1], "an object id");
    std::string parent_id;
    if (const SExpr* pf = find_form(o, "parent", 2))
      parent_id = sym(nth(*pf, 1, "parent id"), "parent id");
    parents.emplace_back(&o, parent_id);
    p.objects.push_back(std::move(info));
  }
  for (size_t i = 0; i < p.objects.size(); ++i) {
    const std::string& pid = parents[i].second;
    if (pid.empty()) continue;
    auto at = p.find_object(pid);
    if (!at) fail(*parents[i].first, "a declared parent id");
    p.objects[i].parent = *at;
  }

  const SExpr& init = need_form(root, "init", 2);
  std::vector<Literal> lits;
  for (size_t i = 1; i < init.items.size(); ++i)
    lits.push_back(literal_from_sexpr(init.items[i], p));
  p.init = State::make(std::move(lits));

  const SExpr& goal = need_form(root, "goal", 2);
  for (size_t i = 1; i < goal.items.size(); ++i)
    p.goal.push_back(literal_from_sexpr(goal.items[i], p));

  // Every section accounted for; anything else is a typo.
  for (size_t i = 2; i < root.items.size(); ++i) {
    const std::string& h = root.items[i].head();
    if (h != "world" && h != "objects" && h != "init" && h != "goal")
      fail(root.items[i], "one of world/objects/init/goal");
  }
  return p;
}

std::string serialize_problem(const Problem& p) {
  std::string out = "(problem " + p.name + "\n";
  out += "  (world \"" + p.world_path + "\")\n";
  out += "  (objects";
  for (const ObjectInfo& o : p.objects) {
    out += "\n    (";
    out += category_name(o.category);
    out += " " + o.id;
    if (o.parent >= 0) out += " (parent " + p.objects[o.parent].id + ")";
    out += ")";
  }
  out += ")\n  (init";
  for (const Literal& l : p.init.lits) {
    out += "\n    ";
    out += write_sexpr(literal_to_sexpr(l, p.objects), -1);
  }
  out += ")\n  (goal";
  for (const Literal& l : p.goal) {
    out += "\n    ";
    out += write_sexpr(literal_to_sexpr(l, p.objects), -1);
  }
  out += "))\n";
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_text_file(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("short write to " + path);
}

World2D load_world(const std::string& path) {
  return parse_world(read_text_file(path), path);
}

namespace {

// World geometry and problem objects must agree id for id.
void check_world_binding(const Problem& p) {
  const World2D& w = *p.world;
  auto require = [&](const std::string& id, bool ok, const char* what) {
    if (!ok)
      throw ValidationError(std::string(what) + " " + id +
                            " missing on the other side of the world file");
  };
  for (const ObjectInfo& o : p.objects) {
    switch (o.category) {
      case ObjectCategory::Item:
        require(o.id, w.item_index(o.id) >= 0, "item");
        break;
      case ObjectCategory::Surface:
        require(o.id, w.surface_index(o.id) >= 0, "surface");
        break;
      case ObjectCategory::Container:
        require(o.id, w.container_index(o.id) >= 0, "container");
        break;
      case ObjectCategory::Door:
        require(o.id, w.container_of_door(o.id) >= 0, "door");
        break;
      case ObjectCategory::Space:
        require(o.id, w.container_of_space(o.id) >= 0, "space");
        break;
      case ObjectCategory::Robot:
        break;
    }
  }
  auto declared = [&](const std::string& id, ObjectCategory cat) {
    auto oid = p.find_object(id);
    return oid && p.objects[*oid].category == cat;
  };
  for (const ItemGeom& it : w.items)
    require(it.id, declared(it.id, ObjectCategory::Item), "item");
  for (const SurfaceGeom& s : w.surfaces)
    require(s.id, declared(s.id, ObjectCategory::Surface), "surface");
  for (const ContainerGeom& c : w.containers) {
    require(c.id, declared(c.id, ObjectCategory::Container), "container");
    require(c.door_id, declared(c.door_id, ObjectCategory::Door), "door");
    require(c.space_id, declared(c.space_id, ObjectCategory::Space), "space");
  }
}

}  // namespace

SceneState initial_scene(const Problem& p) {
  if (!p.world) throw ValidationError("problem has no world attached");
  const World2D& w = *p.world;
  SceneState sc;
  sc.door_angles.assign(w.containers.size(), 0.0);
  sc.item_pos.assign(w.items.size(), Vec2{0, 0});
  for (size_t oid = 0; oid < p.objects.size(); ++oid) {
    const ObjectInfo& o = p.objects[oid];
    if (o.category == ObjectCategory::Door) {
      int ci = w.container_of_door(o.id);
      const Literal* l =
          p.init.find_prefix(Pred::AtAngle, {Term(static_cast<ObjId>(oid))});
      if (ci < 0 || !l)
        throw ValidationError("door " + o.id + " has no angle");
      sc.door_angles[ci] = std::get<Value>(l->args[1]).data[0];
    } else if (o.category == ObjectCategory::Item) {
      int ii = w.item_index(o.id);
      Term self = Term(static_cast<ObjId>(oid));
      const Literal* l = p.init.find_prefix(Pred::Supported, {self});
      if (!l) l = p.init.find_prefix(Pred::In, {self});
      if (ii < 0 || !l || l->args.size() < 3)
        throw ValidationError("item " + o.id + " has no placement pose");
      const Value& pose = std::get<Value>(l->args[2]);
      sc.item_pos[ii] = {pose.data[0], pose.data[1]};
    }
  }
  return sc;
}

void validate_scene(const World2D& w, const SceneState& sc) {
  const double tol = 1e-6;
  for (size_t ci = 0; ci < w.containers.size(); ++ci) {
    double a = sc.door_angles[ci];
    if (a < -tol || a > w.containers[ci].door_limit + tol)
      throw GeometryError(w.containers[ci].door_id +
                          ": angle outside joint limits");
  }
  for (size_t i = 0; i < w.items.size(); ++i) {
    Vec2 p = sc.item_pos[i];
    double r = w.items[i].radius - tol;
    const std::string& id = w.items[i].id;
    if (p.x - r < w.bounds.lo.x || p.x + r > w.bounds.hi.x ||
        p.y - r < w.bounds.lo.y || p.y + r > w.bounds.hi.y)
      throw GeometryError(id + " outside world bounds");
    for (size_t j = i + 1; j < w.items.size(); ++j)
      if ((p - sc.item_pos[j]).norm() < r + w.items[j].radius)
        throw GeometryError("overlapping shapes: " + id + ", " +
                            w.items[j].id);
    for (const Rect& wall : w.walls)
      if (dist_point_rect(p, wall) < r)
        throw GeometryError("overlapping shapes: " + id + ", wall");
    for (size_t ci = 0; ci < w.containers.size(); ++ci) {
      const ContainerGeom& c = w.containers[ci];
      for (const Rect& wr : c.wall_rects())
        if (dist_point_rect(p, wr) < r)
          throw GeometryError("overlapping shapes: " + id + ", " + c.id);
      Segment d = door_fk(c, sc.door_angles[ci]);
      if (dist_point_seg(p, d.a, d.b) < r + c.door_thickness / 2)
        throw GeometryError("overlapping shapes: " + id + ", " + c.door_id);
    }
  }
}

Problem load_problem(const std::string& path) {
  Problem p = parse_problem(read_text_file(path), path);
  std::filesystem::path wp(p.world_path);
  if (wp.is_relative())
    wp = std::filesystem::path(path).parent_path() / wp;
  p.world = std::make_shared<World2D>(load_world(wp.string()));
  validate_problem(p);
  check_world_binding(p);
  SceneState sc = initial_scene(p);
  validate_scene(*p.world, sc);

  // Robot start conf must stand clear as well.
  const Literal* conf = p.init.find_prefix(Pred::AtConf, {Term(p.robot())});
  const Value& q = std::get<Value>(conf->args[1]);
  CollisionQuery base;
  base.body = CollisionQuery::Body::RobotBase;
  base.a = {q.data[0], q.data[1]};
  base.radius = p.world->robot.radius - 1e-6;
  if (check_collision(*p.world, sc, base))
    throw GeometryError("robot start conf collides");
  return p;
}

namespace {

Term term_from_sexpr(const SExpr& e, const Problem& p) {
  if (e.kind == SExpr::Kind::Symbol) {
    if (!e.text.empty() && e.text[0] == '#') {
      int id = -1;
      try {
        id = std::stoi(e.text.substr(1));
      } catch (...) {
        fail(e, "#<number>");
      }
      if (id < 0) fail(e, "#<number>");
      return FreeRef{id};
    }
    auto oid = p.find_object(e.text);
    if (!oid) fail(e, "a declared object id");
    return *oid;
  }
  if (e.kind == SExpr::Kind::List) return value_from_sexpr(e);
  fail(e, "an object id, #<n>, or value form");
}

SExpr action_to_sexpr(const GroundAction& ga,
                      const std::vector<ObjectInfo>& objects) {
  std::vector<SExpr> items;
  items.push_back(SExpr::symbol(ga.spec().variant));
  for (const Term& t : ga.args) {
    if (std::holds_alternative<ObjId>(t))
      items.push_back(SExpr::symbol(objects[std::get<ObjId>(t)].id));
    else if (std::holds_alternative<Value>(t))
      items.push_back(value_to_sexpr(std::get<Value>(t)));
    else
      items.push_back(
          SExpr::symbol("#" + std::to_string(std::get<FreeRef>(t).id)));
  }
  return SExpr::list(std::move(items));
}

}  // namespace

std::string serialize_skeleton(const Skeleton& s,
                               const std::vector<ObjectInfo>& objects) {
  std::vector<SExpr> items;
  items.push_back(SExpr::symbol("skeleton"));
  for (const GroundAction& ga : s.steps)
    items.push_back(action_to_sexpr(ga, objects));
  return write_sexpr(SExpr::list(std::move(items)), -1);
}

Skeleton parse_skeleton(const std::string& line, const Problem& p,
                        const std::string& filename) {
  SExpr root = parse_sexpr(line, filename);
  if (root.head() != "skeleton") fail(root, "(skeleton ...)");
  Skeleton s;
  for (size_t i = 1; i < root.items.size(); ++i) {
    const SExpr& a = root.items[i];
    if (a.kind != SExpr::Kind::List || a.items.empty())
      fail(a, "(variant args...)");
    const std::string& variant = sym(a.items[0], "an action variant");
    int idx = -1;
    const auto& schemas = builtin_schemas();
    for (size_t k = 0; k < schemas.size(); ++k)
      if (schemas[k].variant == variant) idx = static_cast<int>(k);
    if (idx < 0) fail(a.items[0], "a known action variant");
    const ActionSchema& schema = schemas[idx];
    if (a.items.size() - 1 != schema.params.size())
      fail(a, variant + " with " + std::to_string(schema.params.size()) +
                  " arguments",
           "arity mismatch");
    GroundAction ga;
    ga.schema = idx;
    for (size_t k = 0; k < schema.params.size(); ++k) {
      Term t = term_from_sexpr(a.items[k + 1], p);
      const ParamSpec& ps = schema.params[k];
      if (ps.is_object) {
        if (!std::holds_alternative<ObjId>(t) ||
            p.objects[std::get<ObjId>(t)].category != ps.cat)
          fail(a.items[k + 1],
               std::string("a ") + category_name(ps.cat) + " object");
      } else {
        if (std::holds_alternative<ObjId>(t))
          fail(a.items[k + 1], "a value or #<n>");
        if (std::holds_alternative<Value>(t) &&
            std::get<Value>(t).kind != ps.vkind)
          fail(a.items[k + 1],
               std::string("a ") + value_kind_name(ps.vkind) + " value");
      }
      ga.args.push_back(std::move(t));
    }
    s.steps.push_back(std::move(ga));
  }
  return s;
}

std::string serialize_stripped(const StrippedPlan& sp,
                               const std::vector<ObjectInfo>& objects) {
  std::vector<SExpr> items;
  items.push_back(SExpr::symbol("plan"));
  for (const StrippedAction& a : sp) {
    std::vector<SExpr> ai;
    ai.push_back(SExpr::symbol(a.name));
    for (ObjId o : a.objects) ai.push_back(SExpr::symbol(objects[o].id));
    items.push_back(SExpr::list(std::move(ai)));
  }
  return write_sexpr(SExpr::list(std::move(items)), -1);
}

StrippedPlan parse_stripped(const std::string& line, const Problem& p,
                            const std::string& filename) {
  SExpr root = parse_sexpr(line, filename);
  if (root.head() != "plan") fail(root, "(plan ...)");
  StrippedPlan sp;
  for (size_t i = 1; i < root.items.size(); ++i) {
    const SExpr& a = root.items[i];
    if (a.kind != SExpr::Kind::List || a.items.empty())
      fail(a, "(name objects...)");
    StrippedAction sa;
    sa.name = sym(a.items[0], "an action name");
    for (size_t k = 1; k < a.items.size(); ++k) {
      auto oid = p.find_object(sym(a.items[k], "an object id"));
      if (!oid) fail(a.items[k], "a declared object id");
      sa.objects.push_back(*oid);
    }
    sp.push_back(std::move(sa));
  }
  return sp;
}

std::string to_csv(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      const std::string& f = row[i];
      if (f.find_first_of(",\"\n") != std::string::npos) {
        out += '"';
        for (char c : f) {
          if (c == '"') out += '"';
          out += c;
        }
        out += '"';
      } else {
        out += f;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace pigi
