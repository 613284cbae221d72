#include "pigi/model.h"

#include <algorithm>
#include <array>
#include <cassert>

namespace pigi {

namespace {
constexpr std::array<const char*, kNumObjectCategories> kCategoryNames = {
    "item", "surface", "container", "door", "space", "robot"};
constexpr std::array<const char*, kNumValueKinds> kValueKindNames = {
    "pose", "grasp", "baseconf", "jointangle", "traj"};
}  // namespace

const char* category_name(ObjectCategory c) {
  return kCategoryNames[static_cast<int>(c)];
}

std::optional<ObjectCategory> category_by_name(const std::string& s) {
  for (int i = 0; i < kNumObjectCategories; ++i)
    if (s == kCategoryNames[i]) return static_cast<ObjectCategory>(i);
  return std::nullopt;
}

const char* value_kind_name(ValueKind k) {
  return kValueKindNames[static_cast<int>(k)];
}

Value Value::pose(double x, double y, double theta) {
  return Value{ValueKind::Pose, {x, y, norm_angle(theta)}};
}
Value Value::grasp(double dx, double dy, double phi) {
  return Value{ValueKind::Grasp, {dx, dy, norm_angle(phi)}};
}
Value Value::base_conf(double x, double y, double theta) {
  return Value{ValueKind::BaseConf, {x, y, norm_angle(theta)}};
}
Value Value::joint_angle(double a) {
  return Value{ValueKind::JointAngle, {norm_angle(a)}};
}
Value Value::trajectory(std::vector<double> flat) {
  assert(!flat.empty() && flat.size() % 3 == 0);
  for (size_t i = 2; i < flat.size(); i += 3) flat[i] = norm_angle(flat[i]);
  return Value{ValueKind::Trajectory, std::move(flat)};
}

namespace {

bool is_angle_component(ValueKind k, size_t i) {
  switch (k) {
    case ValueKind::Pose:
    case ValueKind::Grasp:
    case ValueKind::BaseConf:
      return i == 2;
    case ValueKind::JointAngle:
      return true;
    case ValueKind::Trajectory:
      return i % 3 == 2;
  }
  return false;
}

}  // namespace

bool value_approx_equal(const Value& a, const Value& b, double tol) {
  if (a.kind != b.kind || a.data.size() != b.data.size()) return false;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = is_angle_component(a.kind, i)
                   ? norm_angle(a.data[i] - b.data[i])
                   : a.data[i] - b.data[i];
    if (std::abs(d) > tol) return false;
  }
  return true;
}

bool term_equal(const Term& a, const Term& b) { return a == b; }

bool term_less(const Term& a, const Term& b) {
  if (a.index() != b.index()) return a.index() < b.index();
  switch (a.index()) {
    case 0:
      return std::get<ObjId>(a) < std::get<ObjId>(b);
    case 1: {
      const Value& va = std::get<Value>(a);
      const Value& vb = std::get<Value>(b);
      if (va.kind != vb.kind) return va.kind < vb.kind;
      return va.data < vb.data;
    }
    default:
      return std::get<FreeRef>(a).id < std::get<FreeRef>(b).id;
  }
}

namespace {

bool term_approx(const Term& a, const Term& b, double tol) {
  if (a.index() != b.index()) return false;
  if (a.index() == 1)
    return value_approx_equal(std::get<Value>(a), std::get<Value>(b), tol);
  return a == b;
}

const PredInfo& build_pred_info(Pred p) {
  using C = ObjectCategory;
  using V = ValueKind;
  auto obj = [](C c) { return PredArgSpec{true, c, V::Pose}; };
  auto val = [](V v) { return PredArgSpec{false, C::Item, v}; };
  static const std::array<PredInfo, kNumPreds> table = {{
      {"graspable", {obj(C::Item)}, false, false},
      {"isjoint", {obj(C::Door), obj(C::Container)}, false, false},
      {"containable", {obj(C::Item), obj(C::Space)}, false, false},
      {"supported", {obj(C::Item), obj(C::Surface), val(V::Pose)}, false,
       false},
      {"in", {obj(C::Item), obj(C::Space), val(V::Pose)}, true, false},
      {"on", {obj(C::Item), obj(C::Surface)}, false, true},
      {"holding", {obj(C::Item), val(V::Grasp)}, true, false},
      {"handempty", {}, false, false},
      {"open", {obj(C::Door)}, false, false},
      {"closed", {obj(C::Door)}, false, false},
      {"atangle", {obj(C::Door), val(V::JointAngle)}, false, false},
      {"atconf", {obj(C::Robot), val(V::BaseConf)}, false, false},
  }};
  return table[static_cast<int>(p)];
}

}  // namespace

const PredInfo& pred_info(Pred p) { return build_pred_info(p); }

std::optional<Pred> pred_by_name(const std::string& s) {
  for (int i = 0; i < kNumPreds; ++i) {
    Pred p = static_cast<Pred>(i);
    if (s == pred_info(p).name) return p;
  }
  return std::nullopt;
}

bool Literal::operator==(const Literal& o) const {
  return pred == o.pred && args == o.args;
}

bool literal_less(const Literal& a, const Literal& b) {
  if (a.pred != b.pred) return a.pred < b.pred;
  if (a.args.size() != b.args.size()) return a.args.size() < b.args.size();
  for (size_t i = 0; i < a.args.size(); ++i) {
    if (!(a.args[i] == b.args[i])) return term_less(a.args[i], b.args[i]);
  }
  return false;
}

namespace {

std::string term_to_string(const Term& t,
                           const std::vector<ObjectInfo>& objects) {
  if (std::holds_alternative<ObjId>(t)) {
    ObjId o = std::get<ObjId>(t);
    if (o >= 0 && o < static_cast<int>(objects.size()))
      return objects[o].id;
    return "obj" + std::to_string(o);
  }
  if (std::holds_alternative<FreeRef>(t))
    return "#" + std::to_string(std::get<FreeRef>(t).id);
  const Value& v = std::get<Value>(t);
  std::string s = std::string("(") + value_kind_name(v.kind);
  for (double d : v.data) s += " " + std::to_string(d);
  return s + ")";
}

}  // namespace

std::string literal_to_string(const Literal& l,
                              const std::vector<ObjectInfo>& objects) {
  std::string s = std::string("(") + pred_info(l.pred).name;
  for (const Term& t : l.args) s += " " + term_to_string(t, objects);
  return s + ")";
}

State State::make(std::vector<Literal> ls) {
  std::sort(ls.begin(), ls.end(), literal_less);
  ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
  State s;
  s.lits = std::move(ls);
  return s;
}

bool State::contains(const Literal& l) const {
  return std::binary_search(lits.begin(), lits.end(), l, literal_less);
}

void State::add(const Literal& l) {
  auto it = std::lower_bound(lits.begin(), lits.end(), l, literal_less);
  if (it != lits.end() && *it == l) return;
  lits.insert(it, l);
}

void State::remove(const Literal& l) {
  auto it = std::lower_bound(lits.begin(), lits.end(), l, literal_less);
  if (it != lits.end() && *it == l) lits.erase(it);
}

const Literal* State::find_prefix(Pred p,
                                  const std::vector<Term>& prefix) const {
  for (const Literal& l : lits) {
    if (l.pred != p) continue;
    if (l.args.size() < prefix.size()) continue;
    bool ok = true;
    for (size_t i = 0; i < prefix.size(); ++i)
      if (!(l.args[i] == prefix[i])) {
        ok = false;
        break;
      }
    if (ok) return &l;
  }
  return nullptr;
}

namespace {

ParamSpec obj_param(const std::string& name, ObjectCategory c, bool hidden) {
  ParamSpec p;
  p.name = name;
  p.is_object = true;
  p.cat = c;
  p.hidden = hidden;
  return p;
}

ParamSpec val_param(const std::string& name, ValueKind k, ParamBinding b) {
  ParamSpec p;
  p.name = name;
  p.is_object = false;
  p.vkind = k;
  p.binding = b;
  return p;
}

std::vector<ActionSchema> make_builtin_schemas() {
  using C = ObjectCategory;
  using V = ValueKind;
  using B = ParamBinding;
  std::vector<ActionSchema> out;

  {
    ActionSchema a;
    a.display = "move";
    a.variant = "move";
    a.params = {obj_param("r", C::Robot, true),
                val_param("q_from", V::BaseConf, B::FromState),
                val_param("q_to", V::BaseConf, B::Choice),
                val_param("t", V::Trajectory, B::Output)};
    a.pre = {{Pred::AtConf, {TermTpl::p(0), TermTpl::p(1)}}};
    a.add = {{Pred::AtConf, {TermTpl::p(0), TermTpl::p(2)}}};
    a.del = {{Pred::AtConf, {TermTpl::p(0), TermTpl::p(1)}}};
    a.constraints = {{"motion", {1, 2, 3}}};
    out.push_back(std::move(a));
  }

  for (bool surface : {true, false}) {
    ActionSchema a;
    a.display = "pick";
    a.variant = surface ? "pick@surface" : "pick@space";
    a.params = {obj_param("i", C::Item, false),
                obj_param("src", surface ? C::Surface : C::Space, true),
                obj_param("r", C::Robot, true),
                val_param("p", V::Pose, B::FromState),
                val_param("g", V::Grasp, B::Choice),
                val_param("q", V::BaseConf, B::FromState)};
    Pred placed = surface ? Pred::Supported : Pred::In;
    a.pre = {{Pred::Graspable, {TermTpl::p(0)}},
             {Pred::HandEmpty, {}},
             {placed, {TermTpl::p(0), TermTpl::p(1), TermTpl::p(3)}},
             {Pred::AtConf, {TermTpl::p(2), TermTpl::p(5)}}};
    a.add = {{Pred::Holding, {TermTpl::p(0), TermTpl::p(4)}}};
    a.del = {{placed, {TermTpl::p(0), TermTpl::p(1), TermTpl::p(3)}},
             {Pred::HandEmpty, {}}};
    a.constraints = {{"kin", {0, 3, 4, 5}}, {"approach", {0, 3, 5}}};
    out.push_back(std::move(a));
  }

  for (bool surface : {true, false}) {
    ActionSchema a;
    a.display = "place";
    a.variant = surface ? "place@surface" : "place@space";
    a.params = {obj_param("i", C::Item, false),
                obj_param("dst", surface ? C::Surface : C::Space, true),
                obj_param("r", C::Robot, true),
                val_param("p", V::Pose, B::Choice),
                val_param("g", V::Grasp, B::FromState),
                val_param("q", V::BaseConf, B::FromState)};
    a.pre = {{Pred::Holding, {TermTpl::p(0), TermTpl::p(4)}},
             {Pred::AtConf, {TermTpl::p(2), TermTpl::p(5)}}};
    if (!surface)
      a.pre.insert(a.pre.begin(),
                   {Pred::Containable, {TermTpl::p(0), TermTpl::p(1)}});
    Pred placed = surface ? Pred::Supported : Pred::In;
    a.add = {{placed, {TermTpl::p(0), TermTpl::p(1), TermTpl::p(3)}},
             {Pred::HandEmpty, {}}};
    a.del = {{Pred::Holding, {TermTpl::p(0), TermTpl::p(4)}}};
    a.constraints = {{"placement", {0, 1, 3}},
                     {"kin", {0, 3, 4, 5}},
                     {"approach", {0, 3, 5}}};
    out.push_back(std::move(a));
  }

  {
    ActionSchema a;
    a.display = "pullopen";
    a.variant = "pullopen";
    a.params = {obj_param("d", C::Door, false),
                obj_param("r", C::Robot, true),
                val_param("a_from", V::JointAngle, B::FromState),
                val_param("a_to", V::JointAngle, B::Choice),
                val_param("g", V::Grasp, B::Choice),
                val_param("q", V::BaseConf, B::FromState),
                val_param("t", V::Trajectory, B::Output)};
    a.pre = {{Pred::AtAngle, {TermTpl::p(0), TermTpl::p(2)}},
             {Pred::HandEmpty, {}},
             {Pred::AtConf, {TermTpl::p(1), TermTpl::p(5)}}};
    a.add = {{Pred::AtAngle, {TermTpl::p(0), TermTpl::p(3)}},
             {Pred::Open, {TermTpl::p(0)}}};
    a.del = {{Pred::AtAngle, {TermTpl::p(0), TermTpl::p(2)}},
             {Pred::Closed, {TermTpl::p(0)}}};
    a.constraints = {{"pull", {0, 2, 3, 4, 5, 6}}, {"jointlimit", {0, 3}}};
    out.push_back(std::move(a));
  }

  {
    ActionSchema a;
    a.display = "pullclose";
    a.variant = "pullclose";
    a.params = {obj_param("d", C::Door, false),
                obj_param("r", C::Robot, true),
                val_param("a_from", V::JointAngle, B::FromState),
                val_param("g", V::Grasp, B::Choice),
                val_param("q", V::BaseConf, B::FromState),
                val_param("t", V::Trajectory, B::Output)};
    a.pre = {{Pred::AtAngle, {TermTpl::p(0), TermTpl::p(2)}},
             {Pred::HandEmpty, {}},
             {Pred::AtConf, {TermTpl::p(1), TermTpl::p(4)}}};
    a.add = {{Pred::AtAngle,
              {TermTpl::p(0), TermTpl::c(Value::joint_angle(0.0))}},
             {Pred::Closed, {TermTpl::p(0)}}};
    a.del = {{Pred::AtAngle, {TermTpl::p(0), TermTpl::p(2)}},
             {Pred::Open, {TermTpl::p(0)}}};
    a.constraints = {{"pullclose", {0, 2, 3, 4, 5}}};
    out.push_back(std::move(a));
  }

  return out;
}

}  // namespace

const std::vector<ActionSchema>& builtin_schemas() {
  static const std::vector<ActionSchema> schemas = make_builtin_schemas();
  return schemas;
}

int schema_index(const std::string& variant) {
  const auto& s = builtin_schemas();
  for (size_t i = 0; i < s.size(); ++i)
    if (s[i].variant == variant) return static_cast<int>(i);
  throw std::out_of_range("unknown schema variant: " + variant);
}

bool GroundAction::operator==(const GroundAction& o) const {
  return schema == o.schema && args == o.args;
}

std::vector<FreeRef> Skeleton::free_params() const {
  std::vector<FreeRef> out;
  for (const GroundAction& ga : steps)
    for (const Term& t : ga.args)
      if (std::holds_alternative<FreeRef>(t)) {
        FreeRef f = std::get<FreeRef>(t);
        bool seen = false;
        for (const FreeRef& g : out)
          if (g.id == f.id) {
            seen = true;
            break;
          }
        if (!seen) out.push_back(f);
      }
  return out;
}

StrippedPlan strip_continuous(const Skeleton& skel) {
  StrippedPlan out;
  out.reserve(skel.steps.size());
  for (const GroundAction& ga : skel.steps) {
    const ActionSchema& sc = ga.spec();
    StrippedAction sa;
    sa.name = sc.display;
    for (size_t i = 0; i < sc.params.size(); ++i) {
      if (!sc.params[i].is_object || sc.params[i].hidden) continue;
      sa.objects.push_back(std::get<ObjId>(ga.args[i]));
    }
    out.push_back(std::move(sa));
  }
  return out;
}

Literal instantiate(const LitTpl& tpl, const GroundAction& ga) {
  Literal l;
  l.pred = tpl.pred;
  l.args.reserve(tpl.args.size());
  for (const TermTpl& t : tpl.args) {
    if (t.param >= 0)
      l.args.push_back(ga.args[t.param]);
    else
      l.args.push_back(t.const_value);
  }
  return l;
}

namespace {

// Tolerant lookup: objects and frees exact, values within kValueTol.
const Literal* find_tolerant(const State& s, const Literal& l) {
  for (const Literal& c : s.lits) {
    if (c.pred != l.pred || c.args.size() != l.args.size()) continue;
    bool ok = true;
    for (size_t i = 0; i < l.args.size(); ++i)
      if (!term_approx(c.args[i], l.args[i], kValueTol)) {
        ok = false;
        break;
      }
    if (ok) return &c;
  }
  return nullptr;
}

}  // namespace

State apply_abstract(const State& s, const GroundAction& ga,
                     const std::vector<ObjectInfo>& objects) {
  const ActionSchema& sc = ga.spec();
  if (ga.args.size() != sc.params.size())
    throw std::invalid_argument("ground action arity mismatch for " +
                                sc.variant);
  for (const LitTpl& tpl : sc.pre) {
    Literal need = instantiate(tpl, ga);
    if (!find_tolerant(s, need))
      throw PreconditionViolation(sc.display,
                                  literal_to_string(need, objects));
  }
  State out = s;
  for (const LitTpl& tpl : sc.del) {
    Literal gone = instantiate(tpl, ga);
    if (const Literal* hit = find_tolerant(out, gone)) {
      Literal exact = *hit;
      out.remove(exact);
    }
  }
  for (const LitTpl& tpl : sc.add) out.add(instantiate(tpl, ga));
  return out;
}

namespace {

bool goal_literal_matches(const Literal& goal, const Literal& cand) {
  Pred target = goal.pred == Pred::On ? Pred::Supported : goal.pred;
  if (cand.pred != target) return false;
  if (cand.args.size() < goal.args.size()) return false;
  size_t extra = cand.args.size() - goal.args.size();
  if (extra > 1) return false;
  // An omitted trailing value matches any binding of that slot, including
  // an optimistic placeholder that refinement has not grounded yet.
  if (extra == 1 && std::holds_alternative<ObjId>(cand.args.back()))
    return false;
  for (size_t i = 0; i < goal.args.size(); ++i)
    if (!term_approx(cand.args[i], goal.args[i], kValueTol)) return false;
  return true;
}

}  // namespace

bool goal_satisfied(const State& s, const std::vector<Literal>& goal) {
  for (const Literal& g : goal) {
    bool hit = false;
    for (const Literal& c : s.lits)
      if (goal_literal_matches(g, c)) {
        hit = true;
        break;
      }
    if (!hit) return false;
  }
  return true;
}

std::optional<ObjId> Problem::find_object(const std::string& id) const {
  for (size_t i = 0; i < objects.size(); ++i)
    if (objects[i].id == id) return static_cast<ObjId>(i);
  return std::nullopt;
}

ObjId Problem::robot() const {
  for (size_t i = 0; i < objects.size(); ++i)
    if (objects[i].category == ObjectCategory::Robot)
      return static_cast<ObjId>(i);
  throw ValidationError("problem has no robot");
}

std::vector<ObjId> Problem::of_category(ObjectCategory c) const {
  std::vector<ObjId> out;
  for (size_t i = 0; i < objects.size(); ++i)
    if (objects[i].category == c) out.push_back(static_cast<ObjId>(i));
  return out;
}

namespace {

void check_literal_shape(const Problem& p, const Literal& l, bool in_goal) {
  const PredInfo& info = pred_info(l.pred);
  if (!in_goal && info.goal_only)
    throw ValidationError(std::string(info.name) +
                          " is a goal form and cannot appear in init");
  size_t want = info.args.size();
  bool short_ok = in_goal && info.trailing_value_optional;
  if (l.args.size() != want && !(short_ok && l.args.size() == want - 1))
    throw ValidationError(std::string("arity mismatch for ") + info.name +
                          ": " + literal_to_string(l, p.objects));
  for (size_t i = 0; i < l.args.size(); ++i) {
    const PredArgSpec& spec = info.args[i];
    const Term& t = l.args[i];
    if (spec.is_object) {
      if (!std::holds_alternative<ObjId>(t))
        throw ValidationError("expected object argument " +
                              std::to_string(i) + " in " +
                              literal_to_string(l, p.objects));
      ObjId o = std::get<ObjId>(t);
      if (o < 0 || o >= static_cast<int>(p.objects.size()))
        throw ValidationError("object index out of range");
      if (p.objects[o].category != spec.cat)
        throw ValidationError(std::string("argument ") + p.objects[o].id +
                              " of " + info.name + " must be a " +
                              category_name(spec.cat));
    } else {
      if (std::holds_alternative<ObjId>(t))
        throw ValidationError("expected value argument " +
                              std::to_string(i) + " in " +
                              literal_to_string(l, p.objects));
      if (std::holds_alternative<Value>(t) &&
          std::get<Value>(t).kind != spec.vkind)
        throw ValidationError("value kind mismatch in " +
                              literal_to_string(l, p.objects));
    }
  }
}

}  // namespace

void validate_problem(const Problem& p) {
  for (size_t i = 0; i < p.objects.size(); ++i) {
    for (size_t j = i + 1; j < p.objects.size(); ++j)
      if (p.objects[i].id == p.objects[j].id)
        throw ValidationError("duplicate object id " + p.objects[i].id);
    const ObjectInfo& o = p.objects[i];
    bool needs_parent = o.category == ObjectCategory::Door ||
                        o.category == ObjectCategory::Space;
    if (needs_parent) {
      if (o.parent < 0 || o.parent >= static_cast<int>(p.objects.size()) ||
          p.objects[o.parent].category != ObjectCategory::Container)
        throw ValidationError(o.id + " must have a container parent");
    }
  }
  int robots = 0;
  for (const ObjectInfo& o : p.objects)
    if (o.category == ObjectCategory::Robot) ++robots;
  if (robots != 1)
    throw ValidationError("problem must declare exactly one robot, has " +
                          std::to_string(robots));

  for (const Literal& l : p.init.lits) check_literal_shape(p, l, false);
  for (const Literal& l : p.goal) {
    check_literal_shape(p, l, true);
    switch (l.pred) {
      case Pred::Holding:
      case Pred::On:
      case Pred::In:
      case Pred::Closed:
      case Pred::Open:
        break;
      default:
        throw ValidationError(std::string("goal predicate not allowed: ") +
                              pred_info(l.pred).name);
    }
  }

  // Placement bookkeeping: every item sits in exactly one place, with pose.
  for (size_t i = 0; i < p.objects.size(); ++i) {
    if (p.objects[i].category != ObjectCategory::Item) continue;
    int placements = 0;
    for (const Literal& l : p.init.lits) {
      if ((l.pred == Pred::Supported || l.pred == Pred::In) &&
          std::get<ObjId>(l.args[0]) == static_cast<ObjId>(i)) {
        ++placements;
        if (l.args.size() != 3 ||
            !std::holds_alternative<Value>(l.args[2]))
          throw ValidationError("placement of " + p.objects[i].id +
                                " must carry a pose");
      }
      if (l.pred == Pred::Holding)
        throw ValidationError("init cannot contain holding literals");
    }
    if (placements != 1)
      throw ValidationError(p.objects[i].id + " must have exactly one " +
                            "placement literal, has " +
                            std::to_string(placements));
  }

  // The robot is somewhere and its hand is empty.
  ObjId r = p.robot();
  if (!p.init.find_prefix(Pred::AtConf, {Term(r)}))
    throw ValidationError("init must place the robot with atconf");
  if (!p.init.find_prefix(Pred::HandEmpty, {}))
    throw ValidationError("init must contain handempty");

  // Exactly one angle per door; open/closed flags consistent.
  for (size_t i = 0; i < p.objects.size(); ++i) {
    if (p.objects[i].category != ObjectCategory::Door) continue;
    ObjId d = static_cast<ObjId>(i);
    int angles = 0;
    for (const Literal& l : p.init.lits)
      if (l.pred == Pred::AtAngle && std::get<ObjId>(l.args[0]) == d)
        ++angles;
    if (angles != 1)
      throw ValidationError(p.objects[i].id +
                            " must have exactly one atangle literal");
    bool open = p.init.find_prefix(Pred::Open, {Term(d)}) != nullptr;
    bool closed = p.init.find_prefix(Pred::Closed, {Term(d)}) != nullptr;
    if (open == closed)
      throw ValidationError(p.objects[i].id +
                            " must be flagged open xor closed");
  }
}

}  // namespace pigi
