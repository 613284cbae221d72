#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.h"
#include "pigi/geometry.h"
#include "pigi/rng.h"

using namespace pigi;

namespace {

int ri(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform_int(uint64_t(hi - lo + 1)));
}

// Distance from p to rect by dense boundary/interior sampling; upper bound
// within step of the true distance.
double rect_dist_brute(Vec2 p, const Rect& r, int n = 400) {
  if (r.contains(p)) return 0.0;
  double best = 1e300;
  for (int i = 0; i <= n; ++i) {
    double t = double(i) / n;
    Vec2 pts[4] = {{r.lo.x + t * r.width(), r.lo.y},
                   {r.lo.x + t * r.width(), r.hi.y},
                   {r.lo.x, r.lo.y + t * r.height()},
                   {r.hi.x, r.lo.y + t * r.height()}};
    for (Vec2 q : pts) best = std::min(best, (p - q).norm());
  }
  return best;
}

double seg_dist_brute(Vec2 a1, Vec2 b1, Vec2 a2, Vec2 b2, int n = 300) {
  double best = 1e300;
  for (int i = 0; i <= n; ++i) {
    Vec2 p = a1 + (b1 - a1) * (double(i) / n);
    for (int j = 0; j <= n; ++j) {
      Vec2 q = a2 + (b2 - a2) * (double(j) / n);
      best = std::min(best, (p - q).norm());
    }
  }
  return best;
}

SceneState empty_scene(const World2D& w) {
  SceneState sc;
  sc.door_angles.assign(w.containers.size(), 0.0);
  sc.item_pos.assign(w.items.size(), Vec2{0, 0});
  return sc;
}

}  // namespace

TEST_CASE("point and segment distances match a sampling bound") {
  Rng rng(Rng::stream(7, 1, 0, 0));
  for (int t = 0; t < 60; ++t) {
    Rect r{{rng.uniform(0, 4), rng.uniform(0, 4)}, {0, 0}};
    r.hi = {r.lo.x + rng.uniform(0.2, 2), r.lo.y + rng.uniform(0.2, 2)};
    Vec2 p{rng.uniform(-1, 6), rng.uniform(-1, 6)};
    double exact = dist_point_rect(p, r);
    double brute = rect_dist_brute(p, r);
    CHECK(exact <= brute + 1e-9);
    CHECK(exact >= brute - 0.02);  // sampling resolution
  }
  for (int t = 0; t < 40; ++t) {
    Vec2 a1{rng.uniform(0, 5), rng.uniform(0, 5)};
    Vec2 b1{rng.uniform(0, 5), rng.uniform(0, 5)};
    Vec2 a2{rng.uniform(0, 5), rng.uniform(0, 5)};
    Vec2 b2{rng.uniform(0, 5), rng.uniform(0, 5)};
    double exact = dist_seg_seg(a1, b1, a2, b2);
    double brute = seg_dist_brute(a1, b1, a2, b2);
    CHECK(exact <= brute + 1e-9);
    CHECK(exact >= brute - 0.05);
  }
  // Pinned values.
  Rect r{{0, 0}, {1, 1}};
  CHECK(dist_point_rect({2, 2}, r) == doctest::Approx(std::sqrt(2.0)));
  CHECK(dist_point_rect({0.5, 0.5}, r) == 0.0);
  CHECK(dist_point_seg({0, 1}, {-1, 0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(dist_seg_seg({0, -1}, {0, 1}, {-1, 0}, {1, 0}) == 0.0);
  CHECK(dist_seg_seg({0, 1}, {1, 1}, {0, 0}, {1, 0}) == doctest::Approx(1.0));
}

TEST_CASE("segment-rect intersection agrees with the distance test") {
  Rng rng(Rng::stream(7, 2, 0, 0));
  for (int t = 0; t < 300; ++t) {
    Rect r{{rng.uniform(0, 3), rng.uniform(0, 3)}, {0, 0}};
    r.hi = {r.lo.x + rng.uniform(0.3, 2), r.lo.y + rng.uniform(0.3, 2)};
    Vec2 a{rng.uniform(-1, 5), rng.uniform(-1, 5)};
    Vec2 b{rng.uniform(-1, 5), rng.uniform(-1, 5)};
    bool hit = seg_intersects_rect(a, b, r);
    // Intersection iff some sampled segment point lies inside (within
    // sampling slack).
    bool inside = false;
    for (int i = 0; i <= 500; ++i) {
      Vec2 p = a + (b - a) * (double(i) / 500);
      if (r.contains(p)) inside = true;
    }
    if (inside) CHECK(hit);
    if (!hit) CHECK(!inside);
  }
  CHECK(Rect{{0, 0}, {1, 1}}.contains({0, 0}));       // boundary inclusive
  CHECK(Rect{{0, 0}, {1, 1}}.contains({1, 0.5}));
  CHECK(!Rect{{0, 0}, {1, 1}}.contains({1.0001, 0.5}));
  Rect s = Rect{{0, 0}, {1, 1}}.shrunk(0.1);
  CHECK(s.lo.x == doctest::Approx(0.1));
  CHECK(s.hi.y == doctest::Approx(0.9));
}

TEST_CASE("container geometry is consistent on every side") {
  for (Side side : {Side::South, Side::East, Side::North, Side::West}) {
    ContainerGeom c;
    c.id = "c";
    c.body = {{1.0, 2.0}, {1.8, 2.6}};
    c.wall = 0.08;
    c.opening = side;
    c.door_id = "c:door";
    c.door_limit = 2.0;
    c.door_thickness = 0.02;
    c.space_id = "c:space";

    auto walls = c.wall_rects();
    CHECK(walls.size() == 3);
    Rect in = c.interior();
    CHECK(in.width() > 0);
    CHECK(in.height() > 0);
    for (const Rect& wr : walls) {
      // Walls stay inside the body and clear of the interior.
      CHECK(wr.lo.x >= c.body.lo.x - 1e-12);
      CHECK(wr.hi.x <= c.body.hi.x + 1e-12);
      CHECK(wr.lo.y >= c.body.lo.y - 1e-12);
      CHECK(wr.hi.y <= c.body.hi.y + 1e-12);
      bool overlap = wr.lo.x < in.hi.x - 1e-12 && in.lo.x < wr.hi.x - 1e-12 &&
                     wr.lo.y < in.hi.y - 1e-12 && in.lo.y < wr.hi.y - 1e-12;
      CHECK(!overlap);
    }

    // The closed door seals the opening: it spans the gap left by the walls.
    Segment d = door_fk(c, 0.0);
    CHECK((d.a - c.door_pivot()).norm() == 0.0);
    CHECK((d.b - d.a).norm() == doctest::Approx(c.door_length()));
    bool horizontal = side == Side::North || side == Side::South;
    if (horizontal)
      CHECK(c.door_length() == doctest::Approx(c.body.width() - c.wall));
    else
      CHECK(c.door_length() == doctest::Approx(c.body.height() - c.wall));
    // Both endpoints on the body boundary.
    for (Vec2 e : {d.a, d.b}) {
      CHECK(c.body.contains(e));
      bool on_edge = std::abs(e.x - c.body.lo.x) < 1e-9 ||
                     std::abs(e.x - c.body.hi.x) < 1e-9 ||
                     std::abs(e.y - c.body.lo.y) < 1e-9 ||
                     std::abs(e.y - c.body.hi.y) < 1e-9;
      CHECK(on_edge);
    }

    // Swing is continuous, length-preserving, and leaves the body.
    Vec2 prev = door_handle(c, 0.0);
    for (int i = 1; i <= 40; ++i) {
      double a = c.door_limit * i / 40;
      Vec2 h = door_handle(c, a);
      CHECK((h - prev).norm() < c.door_length() * (c.door_limit / 40) + 1e-9);
      CHECK((h - c.door_pivot()).norm() == doctest::Approx(c.door_length()));
      prev = h;
    }
    CHECK_THROWS_AS(door_fk(c, -0.1), GeometryError);
    CHECK_THROWS_AS(door_fk(c, c.door_limit + 0.1), GeometryError);
  }
}

TEST_CASE("world validation names the offending shape") {
  auto g = toys::make_toy(
      {.name = "t", .tables = 1, .items = 1, .container = true});
  World2D w = g.world;
  validate_world(w);

  World2D bad = w;
  bad.items[0].radius = -1;
  CHECK_THROWS_AS(validate_world(bad), GeometryError);
  bad = w;
  bad.items[0].color = 8;
  CHECK_THROWS_AS(validate_world(bad), GeometryError);
  bad = w;
  bad.surfaces.push_back({"table0", {{3, 3}, {4, 4}}});
  CHECK_THROWS_AS(validate_world(bad), GeometryError);
  bad = w;
  bad.containers[0].door_limit = 3.5;
  CHECK_THROWS_AS(validate_world(bad), GeometryError);
  bad = w;
  bad.containers[0].wall = 0.4;  // walls meet in the middle
  CHECK_THROWS_AS(validate_world(bad), GeometryError);
}

TEST_CASE("collision classes see the right obstacle sets") {
  auto g = toys::make_toy(
      {.name = "t", .tables = 1, .items = 1, .container = true});
  const World2D& w = g.world;
  SceneState sc = initial_scene(g.problem);

  auto collides = [&](CollisionQuery q) { return check_collision(w, sc, q); };
  Vec2 on_table{1.0, 1.0};
  Vec2 free_spot{3.8, 2.6};

  // Base: tables, container body, bounds all block; items never do.
  CHECK(collides({.body = CollisionQuery::Body::RobotBase, .a = on_table,
                  .radius = 0.18}));
  CHECK(collides({.body = CollisionQuery::Body::RobotBase, .a = {2.33, 3.5},
                  .radius = 0.18}));
  CHECK(collides({.body = CollisionQuery::Body::RobotBase, .a = {0.1, 2.5},
                  .radius = 0.18}));
  CHECK(!collides({.body = CollisionQuery::Body::RobotBase, .a = free_spot,
                   .radius = 0.18}));
  CHECK(!collides({.body = CollisionQuery::Body::RobotBase,
                   .a = {sc.item_pos[0].x, sc.item_pos[0].y - 0.3},
                   .radius = 0.18, .include_items = false}));

  // Held disc: clears tables, hits container walls and other items.
  CHECK(!collides({.body = CollisionQuery::Body::HeldItem, .a = on_table,
                   .radius = 0.07}));
  CHECK(collides({.body = CollisionQuery::Body::HeldItem, .a = {2.04, 3.5},
                  .radius = 0.07}));
  CHECK(collides({.body = CollisionQuery::Body::HeldItem,
                  .a = sc.item_pos[0], .radius = 0.07,
                  .include_items = true}));
  CHECK(!collides({.body = CollisionQuery::Body::HeldItem,
                   .a = sc.item_pos[0], .radius = 0.07, .ignore_item = 0,
                   .include_items = true}));

  // Arm segment: passes over tables, blocked by container walls and the
  // closed door, unblocked through an open doorway.
  CHECK(!collides({.body = CollisionQuery::Body::Arm, .a = {0.3, 0.9},
                   .b = {1.9, 1.0}}));
  CHECK(collides({.body = CollisionQuery::Body::Arm, .a = {2.33, 2.6},
                  .b = {2.33, 3.5}}));
  SceneState open_sc = sc;
  open_sc.door_angles[0] = 1.6;
  CHECK(!check_collision(w, open_sc,
                         {.body = CollisionQuery::Body::Arm, .a = {2.33, 2.6},
                          .b = {2.33, 3.5}}));
  // The swung door itself blocks.
  Segment d = door_fk(w.containers[0], 1.6);
  Vec2 mid = (d.a + d.b) * 0.5;
  CHECK(check_collision(w, open_sc,
                        {.body = CollisionQuery::Body::Arm,
                         .a = {mid.x - 0.3, mid.y}, .b = {mid.x + 0.3, mid.y}}));
  CHECK(!check_collision(w, open_sc,
                         {.body = CollisionQuery::Body::Arm,
                          .a = {mid.x - 0.3, mid.y}, .b = {mid.x + 0.3, mid.y},
                          .ignore_door = 0}));
}

TEST_CASE("arm endpoint contact on a wall corner counts as a grasp") {
  auto g = toys::make_toy(
      {.name = "t", .tables = 1, .items = 0, .container = true});
  const World2D& w = g.world;
  SceneState sc = empty_scene(w);
  const ContainerGeom& box = w.containers[0];

  // Closed-door handle sits exactly on the opening corner of the west wall.
  Vec2 handle = door_handle(box, 0.0);
  Vec2 outside{handle.x - 0.0, handle.y - 0.5};
  CollisionQuery arm{.body = CollisionQuery::Body::Arm, .a = outside,
                     .b = handle, .ignore_door = 0};
  CHECK(!check_collision(w, sc, arm));

  // Reaching past the corner into the wall is a collision again.
  CollisionQuery past = arm;
  past.b = {handle.x, handle.y + 1e-4};
  CHECK(check_collision(w, sc, past));
}

TEST_CASE("grasp samples sit on the standoff circle uniformly") {
  auto g = toys::make_toy({.name = "t", .tables = 1, .items = 1});
  const World2D& w = g.world;
  Rng rng(Rng::stream(11, 3, 0, 0));
  const int kBins = 16, kDraws = 4800;
  std::vector<int> bins(kBins, 0);
  for (int i = 0; i < kDraws; ++i) {
    Value v = sample_grasp(w, 0, rng);
    REQUIRE(v.kind == ValueKind::Grasp);
    double mag = std::hypot(v.data[0], v.data[1]);
    CHECK(mag == doctest::Approx(w.items[0].radius + kGripperOffset)
                     .epsilon(1e-12));
    CHECK(std::atan2(v.data[1], v.data[0]) ==
          doctest::Approx(v.data[2]).epsilon(1e-9));
    double phi = v.data[2] + kPi;  // (0, 2pi]
    int b = std::min(kBins - 1, int(phi / (2 * kPi) * kBins));
    bins[b]++;
  }
  double chi2 = 0, expect = double(kDraws) / kBins;
  for (int b : bins) chi2 += (b - expect) * (b - expect) / expect;
  CHECK(chi2 < 37.7);  // p ~ 0.001 at 15 dof
}

TEST_CASE("placements are uniform over the shrunk region") {
  auto g = toys::make_toy(
      {.name = "t", .tables = 1, .items = 1, .container = true});
  const World2D& w = g.world;
  Rng rng(Rng::stream(11, 4, 0, 0));
  Rect table = w.surfaces[0].rect.shrunk(w.items[0].radius);

  const int kDraws = 2000;
  std::vector<double> xs, ys;
  for (int i = 0; i < kDraws; ++i) {
    Value v = sample_placement(w, 0, {.is_surface = true, .index = 0}, rng);
    REQUIRE(v.kind == ValueKind::Pose);
    CHECK(v.data[2] == 0.0);
    CHECK(table.contains({v.data[0], v.data[1]}));
    xs.push_back((v.data[0] - table.lo.x) / table.width());
    ys.push_back((v.data[1] - table.lo.y) / table.height());
  }
  auto ks = [](std::vector<double> u) {
    std::sort(u.begin(), u.end());
    double d = 0;
    for (size_t i = 0; i < u.size(); ++i) {
      double f = double(i + 1) / u.size();
      d = std::max(d, std::abs(f - u[i]));
      d = std::max(d, std::abs(u[i] - double(i) / u.size()));
    }
    return d;
  };
  CHECK(ks(xs) < 0.0437);  // p ~ 0.001 at n = 2000
  CHECK(ks(ys) < 0.0437);

  // Space placements land in the interior.
  Rect in = w.containers[0].interior().shrunk(w.items[0].radius);
  for (int i = 0; i < 100; ++i) {
    Value v = sample_placement(w, 0, {.is_surface = false, .index = 0}, rng);
    CHECK(in.contains({v.data[0], v.data[1]}));
  }

  // A region narrower than the item is rejected.
  World2D tiny = w;
  tiny.surfaces[0].rect = {{1.0, 1.0}, {1.1, 1.1}};
  tiny.items[0].radius = 0.2;
  CHECK_THROWS_AS(
      sample_placement(tiny, 0, {.is_surface = true, .index = 0}, rng),
      RegionTooSmall);
}

TEST_CASE("base sampling reaches open targets and refuses sealed ones") {
  auto g = toys::make_toy(
      {.name = "t", .tables = 1, .items = 1, .container = true,
       .item0_in_container = true});
  const World2D& w = g.world;
  SceneState closed = initial_scene(g.problem);
  Rng rng(Rng::stream(11, 5, 0, 0));

  // Item on open ground near the table: reachable.
  Vec2 target = {1.0, 2.2};
  auto q = sample_base_conf(w, closed, {.point = target}, rng);
  REQUIRE(q.has_value());
  Vec2 base{q->data[0], q->data[1]};
  CHECK((base - target).norm() <= w.robot.reach + 1e-9);
  CHECK(std::atan2(target.y - base.y, target.x - base.x) ==
        doctest::Approx(q->data[2]).epsilon(1e-9));
  CHECK(!check_collision(w, closed,
                         {.body = CollisionQuery::Body::RobotBase, .a = base,
                          .radius = w.robot.radius}));
  CHECK(!check_collision(
      w, closed,
      {.body = CollisionQuery::Body::Arm, .a = base, .b = target}));

  // The item inside the closed box is not reachable from any base.
  Vec2 sealed = closed.item_pos[0];
  for (int rep = 0; rep < 5; ++rep)
    CHECK(!sample_base_conf(w, closed, {.point = sealed}, rng).has_value());

  // Open the door and the same target becomes reachable.
  SceneState open_sc = closed;
  open_sc.door_angles[0] = 1.8;
  bool found = false;
  for (int rep = 0; rep < 5 && !found; ++rep)
    found = sample_base_conf(w, open_sc, {.point = sealed}, rng).has_value();
  CHECK(found);
}

TEST_CASE("occupancy kernels agree bit for bit") {
  Rng rng(Rng::stream(11, 6, 0, 0));
  for (int t = 0; t < 12; ++t) {
    toys::ToyOpts o;
    o.name = "t";
    o.tables = 1 + ri(rng, 0, 1);
    o.items = ri(rng, 0, 2);
    o.container = ri(rng, 0, 1) == 1;
    if (o.container) o.door_angle = ri(rng, 0, 1) ? 0.0 : 1.3;
    auto g = toys::make_toy(o);
    SceneState sc = initial_scene(g.problem);
    std::optional<HeldSpec> held;
    if (t % 3 == 1) held = HeldSpec{{0.2, 0.1}, 0.07};
    double res = t % 2 == 0 ? kGridRes : 0.05;
    OccupancyGrid a = build_occupancy_serial(g.world, sc, held, res);
    OccupancyGrid b = build_occupancy(g.world, sc, held, res);
    CHECK(a.nx == b.nx);
    CHECK(a.ny == b.ny);
    CHECK(a.origin.x == b.origin.x);
    CHECK(a.origin.y == b.origin.y);
    CHECK(a.blocked == b.blocked);
    CHECK(a.nx * a.ny == int(a.blocked.size()));
  }
}

TEST_CASE("motion planning threads gaps the body fits through") {
  World2D w;
  w.bounds = {{0, 0}, {5, 5}};
  double r = w.robot.radius;
  // Horizontal barrier with a gap at x in [2.2, 2.2 + gap].
  double gap = 2 * r + 0.12;
  w.walls.push_back({{0.0, 2.4}, {2.2, 2.6}});
  w.walls.push_back({{2.2 + gap, 2.4}, {5.0, 2.6}});
  validate_world(w);
  SceneState sc = empty_scene(w);

  Vec2 start{1.0, 1.0}, goal{4.0, 4.0};
  auto traj = plan_motion(w, sc, start, goal, std::nullopt);
  REQUIRE(traj.has_value());
  REQUIRE(traj->kind == ValueKind::Trajectory);
  REQUIRE(traj->data.size() >= 6);
  CHECK(traj->data[0] == start.x);
  CHECK(traj->data[1] == start.y);
  CHECK(traj->data[traj->data.size() - 3] == goal.x);
  CHECK(traj->data[traj->data.size() - 2] == goal.y);
  CHECK(trajectory_clear(w, sc, *traj, std::nullopt));

  // Same barrier with a gap the body cannot fit through.
  World2D narrow = w;
  narrow.walls[1].lo.x = 2.2 + 2 * r - 0.04;
  auto blocked = plan_motion(narrow, sc, start, goal, std::nullopt);
  CHECK(!blocked.has_value());

  // A straight shot through the wall is flagged by the sweep check.
  Value bad = Value::trajectory({1.0, 1.0, 0.0, 1.0, 4.0, 0.0});
  CHECK(!trajectory_clear(narrow, sc, bad, std::nullopt));

  // Prebuilt grid gives the same answer.
  OccupancyGrid grid = build_occupancy(w, sc, std::nullopt);
  auto traj2 = plan_motion(w, sc, start, goal, std::nullopt, &grid);
  REQUIRE(traj2.has_value());
  CHECK(traj2->data == traj->data);
}

TEST_CASE("held discs constrain motion planning") {
  World2D w;
  w.bounds = {{0, 0}, {5, 5}};
  double r = w.robot.radius;
  // Gap fits the bare body but not body plus a held item in front.
  double gap = 2 * r + 0.08;
  w.walls.push_back({{0.0, 2.4}, {2.3, 2.6}});
  w.walls.push_back({{2.3 + gap, 2.4}, {5.0, 2.6}});
  SceneState sc = empty_scene(w);
  Vec2 start{1.0, 1.0}, goal{4.0, 4.0};
  CHECK(plan_motion(w, sc, start, goal, std::nullopt).has_value());
  HeldSpec held{{0.3, 0.0}, 0.2};
  CHECK(!plan_motion(w, sc, start, goal, held).has_value());
}

TEST_CASE("scene rendering emits well-formed svg") {
  auto g = toys::make_toy(
      {.name = "t", .tables = 2, .items = 2, .container = true,
       .door_angle = 1.0});
  SceneState sc = initial_scene(g.problem);
  std::string svg = scene_to_svg(g.world, sc);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  size_t circles = 0;
  for (size_t pos = 0; (pos = svg.find("<circle", pos)) != std::string::npos;
       ++pos)
    ++circles;
  CHECK(circles >= g.world.items.size());

  std::vector<Vec2> path{{1, 1}, {2, 2}, {3, 1}};
  std::string with_path = scene_to_svg(g.world, sc, &path);
  CHECK(with_path.find("polyline") != std::string::npos);
}
