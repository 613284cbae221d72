#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pigi {

struct World2D;

constexpr double kValueTol = 1e-9;
constexpr double kPi = 3.141592653589793;

// Normalize to (-pi, pi].
inline double norm_angle(double a) {
  a = std::fmod(a, 2 * kPi);
  if (a <= -kPi) a += 2 * kPi;
  if (a > kPi) a -= 2 * kPi;
  return a;
}

enum class ObjectCategory { Item, Surface, Container, Door, Space, Robot };
constexpr int kNumObjectCategories = 6;

const char* category_name(ObjectCategory c);
std::optional<ObjectCategory> category_by_name(const std::string& s);

using ObjId = int;

struct ObjectInfo {
  std::string id;       // unique symbol, scoped ids use "owner:part"
  ObjectCategory category;
  ObjId parent = -1;    // doors and spaces point at their container
};

enum class ValueKind { Pose, Grasp, BaseConf, JointAngle, Trajectory };
constexpr int kNumValueKinds = 5;

const char* value_kind_name(ValueKind k);

// Continuous parameter payload. Angle components are kept in (-pi, pi].
struct Value {
  ValueKind kind = ValueKind::Pose;
  std::vector<double> data;

  static Value pose(double x, double y, double theta);
  static Value grasp(double dx, double dy, double phi);
  static Value base_conf(double x, double y, double theta);
  static Value joint_angle(double a);
  // Waypoints flattened as (x, y, theta) triplets; at least one waypoint.
  static Value trajectory(std::vector<double> flat_waypoints);

  bool operator==(const Value& o) const {
    return kind == o.kind && data == o.data;
  }
};

// Tolerant comparison; angle components are compared modulo 2*pi.
bool value_approx_equal(const Value& a, const Value& b,
                        double tol = kValueTol);

// Unbound continuous parameter. Ids are unique within a search session.
struct FreeRef {
  int id = -1;
  bool operator==(const FreeRef& o) const { return id == o.id; }
};

using Term = std::variant<ObjId, Value, FreeRef>;

bool term_equal(const Term& a, const Term& b);
// Strict ordering for canonical state layout (exact, not tolerant).
bool term_less(const Term& a, const Term& b);

enum class Pred {
  Graspable,
  IsJoint,
  Containable,
  Supported,
  In,
  On,       // goal form only; matches Supported with any pose
  Holding,
  HandEmpty,
  Open,
  Closed,
  AtAngle,
  AtConf,
};
constexpr int kNumPreds = 12;

struct PredArgSpec {
  bool is_object = true;
  ObjectCategory cat = ObjectCategory::Item;
  ValueKind vkind = ValueKind::Pose;
};

struct PredInfo {
  const char* name;
  std::vector<PredArgSpec> args;
  bool trailing_value_optional;  // goal form may omit the final Value arg
  bool goal_only;                // never appears in states
};

const PredInfo& pred_info(Pred p);
std::optional<Pred> pred_by_name(const std::string& s);

struct Literal {
  Pred pred;
  std::vector<Term> args;

  bool operator==(const Literal& o) const;
};

bool literal_less(const Literal& a, const Literal& b);
std::string literal_to_string(const Literal& l,
                              const std::vector<ObjectInfo>& objects);

// Canonically ordered ground literal set.
struct State {
  std::vector<Literal> lits;

  static State make(std::vector<Literal> ls);
  bool contains(const Literal& l) const;
  void add(const Literal& l);
  void remove(const Literal& l);

  // First literal with this predicate whose leading args match `prefix`.
  const Literal* find_prefix(Pred p, const std::vector<Term>& prefix) const;

  bool operator==(const State& o) const { return lits == o.lits; }
};

enum class ParamBinding {
  FromState,  // bound by matching a precondition literal against the state
  Choice,     // drawn from the optimistic parameter set
  Output      // produced by refinement (trajectories)
};

struct ParamSpec {
  std::string name;
  bool is_object;
  ObjectCategory cat = ObjectCategory::Item;  // object params
  ValueKind vkind = ValueKind::Pose;          // continuous params
  bool hidden = false;  // object params omitted from stripped tuples
  ParamBinding binding = ParamBinding::FromState;
};

struct TermTpl {
  int param = -1;      // index into params, or -1 when const_value is set
  Value const_value;   // pullclose target angle
  static TermTpl p(int i) { TermTpl t; t.param = i; return t; }
  static TermTpl c(Value v) { TermTpl t; t.const_value = std::move(v); return t; }
};

struct LitTpl {
  Pred pred;
  std::vector<TermTpl> args;
};

// Constraint template carried by a schema; `params` index the schema's
// parameter list. Tags are consumed by refinement.
struct ConstraintTpl {
  std::string tag;  // motion | kin | approach | placement | pull | jointlimit
  std::vector<int> params;
};

struct ActionSchema {
  std::string display;   // name used in files and stripped tuples
  std::string variant;   // unique key, e.g. "pick@surface"
  std::vector<ParamSpec> params;
  std::vector<LitTpl> pre, add, del;
  std::vector<ConstraintTpl> constraints;
};

// The built-in domain: move, pick, place, pullopen, pullclose
// (pick/place in surface and space variants).
const std::vector<ActionSchema>& builtin_schemas();
// Indices of the schema list for convenience in tests.
int schema_index(const std::string& variant);

struct GroundAction {
  int schema = -1;            // index into builtin_schemas()
  std::vector<Term> args;     // one entry per schema param

  const ActionSchema& spec() const { return builtin_schemas()[schema]; }
  bool operator==(const GroundAction& o) const;
};

struct Skeleton {
  std::vector<GroundAction> steps;

  std::vector<FreeRef> free_params() const;  // distinct, in first-use order
  bool operator==(const Skeleton& o) const { return steps == o.steps; }
};

struct StrippedAction {
  std::string name;
  std::vector<ObjId> objects;

  bool operator==(const StrippedAction& o) const = default;
  bool operator<(const StrippedAction& o) const {
    if (name != o.name) return name < o.name;
    return objects < o.objects;
  }
};

using StrippedPlan = std::vector<StrippedAction>;

// Drops every Value/Free slot and every hidden object (robot, pick source,
// place destination). Move reduces to a name-only tuple.
StrippedPlan strip_continuous(const Skeleton& skel);

class PreconditionViolation : public std::runtime_error {
 public:
  PreconditionViolation(std::string action, std::string literal)
      : std::runtime_error("precondition of " + action + " not satisfied: " +
                          literal),
        action_(std::move(action)),
        literal_(std::move(literal)) {}
  const std::string& action() const { return action_; }
  const std::string& literal() const { return literal_; }

 private:
  std::string action_, literal_;
};

struct Problem {
  std::string name;
  std::vector<ObjectInfo> objects;
  std::string world_path;  // as written in the problem file
  std::shared_ptr<const World2D> world;
  State init;
  std::vector<Literal> goal;

  std::optional<ObjId> find_object(const std::string& id) const;
  ObjId robot() const;  // exactly one robot per problem
  std::vector<ObjId> of_category(ObjectCategory c) const;
};

// Instantiates a literal template against bound action args.
Literal instantiate(const LitTpl& tpl, const GroundAction& ga);

// Checks preconditions and applies add/delete effects.
// Throws PreconditionViolation naming the failed literal.
State apply_abstract(const State& s, const GroundAction& ga,
                     const std::vector<ObjectInfo>& objects);

// True iff every goal literal is present. A goal literal that omits its
// trailing Value matches any state literal extending it; `on` matches
// `supported` the same way. Values compare within kValueTol.
bool goal_satisfied(const State& s, const std::vector<Literal>& goal);

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& m) : std::runtime_error(m) {}
};

// Structural invariants: unique ids, one robot, well-typed literals,
// one placement literal with pose per item, goal forms only in goals.
void validate_problem(const Problem& p);

}  // namespace pigi
