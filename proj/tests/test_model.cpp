#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "helpers.h"
#include "pigi/model.h"

using namespace pigi;

TEST_CASE("angles normalize into the half-open interval") {
  CHECK(norm_angle(kPi) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(norm_angle(-kPi) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(norm_angle(3 * kPi) == doctest::Approx(kPi).epsilon(1e-9));
  CHECK(std::abs(norm_angle(2 * kPi)) < 1e-12);
  CHECK(norm_angle(0.25) == 0.25);
  for (double a = -20; a < 20; a += 0.377) {
    double n = norm_angle(a);
    CHECK(n > -kPi - 1e-12);
    CHECK(n <= kPi + 1e-12);
    CHECK(std::abs(std::sin(n - a)) < 1e-9);
  }
}

TEST_CASE("value comparison is tolerant and wraps angle slots") {
  CHECK(value_approx_equal(Value::pose(1, 2, 0.1),
                           Value::pose(1, 2, 0.1 + 2 * kPi)));
  CHECK(value_approx_equal(Value::grasp(0.1, 0.2, -kPi),
                           Value::grasp(0.1, 0.2, kPi)));
  CHECK(!value_approx_equal(Value::pose(1, 2, 0), Value::pose(1, 2.1, 0)));
  CHECK(!value_approx_equal(Value::pose(1, 2, 0), Value::grasp(1, 2, 0)));
  CHECK(value_approx_equal(Value::joint_angle(0.5),
                           Value::joint_angle(0.5 + 5e-10)));
  CHECK(!value_approx_equal(Value::joint_angle(0.5),
                            Value::joint_angle(0.5 + 5e-9)));
  // x/y slots do not wrap.
  CHECK(!value_approx_equal(Value::pose(0, 0, 0), Value::pose(2 * kPi, 0, 0)));
  CHECK(value_approx_equal(Value::trajectory({0, 0, 0, 1, 1, kPi}),
                           Value::trajectory({0, 0, 0, 1, 1, -kPi})));
}

TEST_CASE("category and value kind names round-trip") {
  for (int i = 0; i < kNumObjectCategories; ++i) {
    auto c = static_cast<ObjectCategory>(i);
    auto back = category_by_name(category_name(c));
    REQUIRE(back.has_value());
    CHECK(*back == c);
  }
  CHECK(!category_by_name("widget").has_value());
  CHECK(std::string(value_kind_name(ValueKind::BaseConf)) == "baseconf");
}

TEST_CASE("predicate table spot checks") {
  CHECK(std::string(pred_info(Pred::Supported).name) == "supported");
  CHECK(pred_info(Pred::Supported).args.size() == 3);
  CHECK(!pred_info(Pred::Supported).trailing_value_optional);
  CHECK(pred_info(Pred::In).trailing_value_optional);
  CHECK(pred_info(Pred::Holding).trailing_value_optional);
  CHECK(pred_info(Pred::On).goal_only);
  CHECK(!pred_info(Pred::In).goal_only);
  CHECK(pred_info(Pred::HandEmpty).args.empty());
  CHECK(pred_info(Pred::IsJoint).args.size() == 2);
  for (int i = 0; i < kNumPreds; ++i) {
    auto p = static_cast<Pred>(i);
    auto back = pred_by_name(pred_info(p).name);
    REQUIRE(back.has_value());
    CHECK(*back == p);
  }
  CHECK(!pred_by_name("frobnicate").has_value());
}

TEST_CASE("states hold a canonical sorted literal set") {
  Literal a{Pred::HandEmpty, {}};
  Literal b{Pred::Graspable, {ObjId(3)}};
  Literal c{Pred::Graspable, {ObjId(1)}};
  State s1 = State::make({a, b, c});
  State s2 = State::make({c, a, b});
  CHECK(s1 == s2);
  CHECK(std::is_sorted(s1.lits.begin(), s1.lits.end(), literal_less));
  CHECK(s1.contains(b));

  State s3 = s1;
  s3.remove(b);
  CHECK(!s3.contains(b));
  CHECK(s3.lits.size() == 2);
  s3.add(b);
  CHECK(s3 == s1);
  // Adding a present literal is a no-op, not a duplicate.
  s3.add(b);
  CHECK(s3 == s1);
  CHECK(std::is_sorted(s3.lits.begin(), s3.lits.end(), literal_less));
}

TEST_CASE("prefix lookup returns the first canonical match") {
  Literal l1{Pred::Supported, {ObjId(5), ObjId(1), Value::pose(1, 1, 0)}};
  Literal l2{Pred::Supported, {ObjId(5), ObjId(2), Value::pose(2, 2, 0)}};
  Literal l3{Pred::Supported, {ObjId(7), ObjId(1), Value::pose(3, 3, 0)}};
  State s = State::make({l3, l2, l1});
  const Literal* hit = s.find_prefix(Pred::Supported, {ObjId(5)});
  REQUIRE(hit != nullptr);
  CHECK(std::get<ObjId>(hit->args[1]) == ObjId(1));
  CHECK(s.find_prefix(Pred::Supported, {ObjId(9)}) == nullptr);
  CHECK(s.find_prefix(Pred::Holding, {}) == nullptr);
}

TEST_CASE("term ordering groups objects, values, then free slots") {
  Term o = ObjId(4);
  Term v = Value::pose(0, 0, 0);
  Term f = FreeRef{2};
  CHECK(term_less(o, v));
  CHECK(term_less(v, f));
  CHECK(term_less(Term(ObjId(1)), Term(ObjId(2))));
  CHECK(term_less(Term(FreeRef{1}), Term(FreeRef{2})));
  CHECK(!term_less(f, f));
  CHECK(term_equal(f, Term(FreeRef{2})));
}

TEST_CASE("schema table covers the five actions in seven variants") {
  const auto& ss = builtin_schemas();
  REQUIRE(ss.size() == 7);
  CHECK(schema_index("move") >= 0);
  CHECK(schema_index("pick@surface") >= 0);
  CHECK(schema_index("pick@space") >= 0);
  CHECK(schema_index("place@surface") >= 0);
  CHECK(schema_index("place@space") >= 0);
  CHECK(schema_index("pullopen") >= 0);
  CHECK(schema_index("pullclose") >= 0);
  CHECK_THROWS_AS(schema_index("teleport"), std::out_of_range);

  const ActionSchema& mv = ss[schema_index("move")];
  CHECK(mv.display == "move");
  REQUIRE(mv.params.size() == 4);
  CHECK(mv.params[0].hidden);
  CHECK(mv.params[2].binding == ParamBinding::Choice);
  CHECK(mv.params[3].binding == ParamBinding::Output);
  CHECK(mv.params[3].vkind == ValueKind::Trajectory);

  const ActionSchema& pk = ss[schema_index("pick@surface")];
  CHECK(pk.display == "pick");
  CHECK(!pk.params[0].hidden);
  CHECK(pk.params[1].hidden);
  CHECK(pk.params[2].hidden);
  CHECK(pk.params[4].binding == ParamBinding::Choice);  // grasp

  // Every literal template indexes a real parameter of its schema, and
  // every constraint names only real parameters.
  for (const ActionSchema& a : ss) {
    auto check_tpl = [&](const LitTpl& t) {
      for (const TermTpl& tt : t.args)
        if (tt.param >= 0) CHECK(tt.param < static_cast<int>(a.params.size()));
    };
    for (const auto& t : a.pre) check_tpl(t);
    for (const auto& t : a.add) check_tpl(t);
    for (const auto& t : a.del) check_tpl(t);
    for (const ConstraintTpl& c : a.constraints)
      for (int pi : c.params) {
        CHECK(pi >= 0);
        CHECK(pi < static_cast<int>(a.params.size()));
      }
  }
}

namespace {

// Ground [move, pick item0] against the single-table toy.
Skeleton toy_pick_skeleton(const Problem& p) {
  ObjId robot = p.robot();
  ObjId item = *p.find_object("item0");
  ObjId table = *p.find_object("table0");
  const Literal* conf = p.init.find_prefix(Pred::AtConf, {robot});
  const Literal* sup = p.init.find_prefix(Pred::Supported, {item});
  Skeleton s;
  GroundAction mv;
  mv.schema = schema_index("move");
  mv.args = {robot, conf->args[1], FreeRef{0}, FreeRef{1}};
  GroundAction pk;
  pk.schema = schema_index("pick@surface");
  pk.args = {item, table, robot, sup->args[2], FreeRef{2}, FreeRef{0}};
  s.steps = {mv, pk};
  return s;
}

}  // namespace

TEST_CASE("abstract application applies effects and rejects bad steps") {
  auto g = toys::make_toy({.name = "t", .tables = 1, .items = 1});
  const Problem& p = g.problem;
  Skeleton s = toy_pick_skeleton(p);

  State after_move = apply_abstract(p.init, s.steps[0], p.objects);
  ObjId robot = p.robot();
  CHECK(after_move.find_prefix(Pred::AtConf, {robot}) != nullptr);
  CHECK(std::holds_alternative<FreeRef>(
      after_move.find_prefix(Pred::AtConf, {robot})->args[1]));

  State after_pick = apply_abstract(after_move, s.steps[1], p.objects);
  ObjId item = *p.find_object("item0");
  CHECK(after_pick.find_prefix(Pred::Holding, {item}) != nullptr);
  CHECK(!after_pick.contains(Literal{Pred::HandEmpty, {}}));
  CHECK(after_pick.find_prefix(Pred::Supported, {item}) == nullptr);

  // Picking without being at the expected conf fails on the conf literal.
  try {
    apply_abstract(p.init, s.steps[1], p.objects);
    FAIL_CHECK("pick applied from the start conf");
  } catch (const PreconditionViolation& e) {
    CHECK(e.action() == "pick");
    CHECK(e.literal().find("atconf") != std::string::npos);
  }
  // Picking twice fails on the hand.
  try {
    apply_abstract(after_pick, s.steps[1], p.objects);
    FAIL_CHECK("second pick applied");
  } catch (const PreconditionViolation&) {
  }
}

TEST_CASE("stripping keeps visible objects only") {
  auto g = toys::make_toy({.name = "t", .tables = 1, .items = 1});
  Skeleton s = toy_pick_skeleton(g.problem);
  StrippedPlan sp = strip_continuous(s);
  REQUIRE(sp.size() == 2);
  CHECK(sp[0].name == "move");
  CHECK(sp[0].objects.empty());
  CHECK(sp[1].name == "pick");
  REQUIRE(sp[1].objects.size() == 1);
  CHECK(sp[1].objects[0] == *g.problem.find_object("item0"));
}

TEST_CASE("free parameters are distinct and in first-use order") {
  auto g = toys::make_toy({.name = "t", .tables = 1, .items = 1});
  Skeleton s = toy_pick_skeleton(g.problem);
  auto fp = s.free_params();
  REQUIRE(fp.size() == 3);
  CHECK(fp[0].id == 0);  // conf, first used by the move
  CHECK(fp[1].id == 1);  // move trajectory
  CHECK(fp[2].id == 2);  // grasp
  CHECK(Skeleton{}.free_params().empty());
}

TEST_CASE("goal satisfaction handles optional values and the on alias") {
  auto g = toys::make_toy({.name = "t", .tables = 2, .items = 1});
  const Problem& p = g.problem;
  ObjId item = *p.find_object("item0");

  CHECK(goal_satisfied(p.init, {toys::goal_on(p, "item0", "table0")}));
  CHECK(!goal_satisfied(p.init, {toys::goal_on(p, "item0", "table1")}));
  CHECK(!goal_satisfied(p.init, {toys::goal_holding(p, "item0")}));
  CHECK(goal_satisfied(p.init, {}));

  State held = p.init;
  held.remove(*p.init.find_prefix(Pred::Supported, {item}));
  held.remove(Literal{Pred::HandEmpty, {}});
  held.add(Literal{Pred::Holding, {item, Value::grasp(0.3, 0.1, 0.32)}});
  // One-arg goal matches any grasp; the full form compares within tolerance.
  CHECK(goal_satisfied(held, {toys::goal_holding(p, "item0")}));
  CHECK(goal_satisfied(
      held, {Literal{Pred::Holding, {item, Value::grasp(0.3, 0.1, 0.32)}}}));
  CHECK(!goal_satisfied(
      held, {Literal{Pred::Holding, {item, Value::grasp(0.3, 0.1, 1.0)}}}));
  CHECK(goal_satisfied(
      held,
      {Literal{Pred::Holding, {item, Value::grasp(0.3, 0.1 + 1e-11, 0.32)}}}));

  // Exact supported goal needs the pose to match.
  const Literal* sup = p.init.find_prefix(Pred::Supported, {item});
  CHECK(goal_satisfied(p.init, {*sup}));
  Literal off = *sup;
  off.args[2] = Value::pose(9, 9, 0);
  CHECK(!goal_satisfied(p.init, {off}));
}

TEST_CASE("instantiation fills parameters and constants") {
  auto g = toys::make_toy(
      {.name = "t", .tables = 1, .items = 0, .container = true,
       .door_angle = 0.8});
  const Problem& p = g.problem;
  ObjId door = *p.find_object("box:door");
  ObjId robot = p.robot();
  const ActionSchema& pc = builtin_schemas()[schema_index("pullclose")];
  const Literal* conf = p.init.find_prefix(Pred::AtConf, {robot});
  GroundAction ga;
  ga.schema = schema_index("pullclose");
  ga.args = {door, robot, Value::joint_angle(0.8), FreeRef{3}, conf->args[1],
             FreeRef{5}};
  // The close target is a constant in the schema, not a parameter.
  Literal added = instantiate(pc.add[0], ga);
  CHECK(added.pred == Pred::AtAngle);
  CHECK(std::get<Value>(added.args[1]) == Value::joint_angle(0.0));

  State after = apply_abstract(p.init, ga, p.objects);
  CHECK(after.contains(Literal{Pred::Closed, {door}}));
  CHECK(!after.contains(Literal{Pred::Open, {door}}));
  const Literal* ang = after.find_prefix(Pred::AtAngle, {door});
  REQUIRE(ang != nullptr);
  CHECK(std::get<Value>(ang->args[1]) == Value::joint_angle(0.0));
}

TEST_CASE("problem validation rejects structural faults") {
  auto good = toys::make_toy({.name = "t", .tables = 1, .items = 1});
  validate_problem(good.problem);  // baseline sanity

  {
    Problem p = good.problem;
    p.objects.push_back({"item0", ObjectCategory::Item, -1});
    CHECK_THROWS_AS(validate_problem(p), ValidationError);
  }
  {
    Problem p = good.problem;
    p.objects[0].category = ObjectCategory::Item;  // no robot left
    CHECK_THROWS_AS(validate_problem(p), ValidationError);
  }
  {
    Problem p = good.problem;
    p.objects.push_back({"robot2", ObjectCategory::Robot, -1});
    CHECK_THROWS_AS(validate_problem(p), ValidationError);
  }
  {
    // Literal whose argument category does not match the predicate.
    Problem p = good.problem;
    ObjId item = *p.find_object("item0");
    p.init.add(Literal{Pred::AtAngle, {item, Value::joint_angle(0)}});
    CHECK_THROWS_AS(validate_problem(p), ValidationError);
  }
  {
    // Second placement literal for the same item.
    Problem p = good.problem;
    ObjId item = *p.find_object("item0");
    ObjId table = *p.find_object("table0");
    p.init.add(
        Literal{Pred::Supported, {item, table, Value::pose(1.1, 1.1, 0)}});
    CHECK_THROWS_AS(validate_problem(p), ValidationError);
  }
  {
    // Goal-only predicate in the initial state.
    Problem p = good.problem;
    ObjId item = *p.find_object("item0");
    ObjId table = *p.find_object("table0");
    p.init.add(Literal{Pred::On, {item, table}});
    CHECK_THROWS_AS(validate_problem(p), ValidationError);
  }
  {
    // Arity mismatch in a goal literal.
    Problem p = good.problem;
    p.goal = {Literal{Pred::Graspable, {}}};
    CHECK_THROWS_AS(validate_problem(p), ValidationError);
  }
}
