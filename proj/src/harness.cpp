#include "pigi/harness.h"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pigi/problem_io.h"

namespace pigi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kWorldSize = 5.0;
constexpr double kEdgeMargin = 0.7;   // keeps door sweeps inside bounds
constexpr double kBodySize = 0.66;
constexpr double kWallThickness = 0.08;
constexpr double kDoorLimit = 2.0;
constexpr double kDoorThickness = 0.02;
constexpr double kStaticGap = 0.25;   // between static shapes
constexpr double kSwingMargin = 0.12; // door sweep disc padding
constexpr double kItemGap = 0.03;
constexpr int kMaxRejections = 1000;
constexpr int kMaxProblemTries = 200;

struct RejectBudget {
  int left = kMaxRejections;
  void spend(const char* what) {
    if (--left < 0)
      throw GenerationError(std::string("rejection budget exhausted while "
                                        "sampling ") +
                            what);
  }
};

std::string zero_pad(int v, int width = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*d", width, v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double dist_rect_rect(const Rect& a, const Rect& b) {
  double dx = std::max({a.lo.x - b.hi.x, b.lo.x - a.hi.x, 0.0});
  double dy = std::max({a.lo.y - b.hi.y, b.lo.y - a.hi.y, 0.0});
  return std::hypot(dx, dy);
}

// Disc every door position sweeps through, padded.
struct SwingDisc {
  Vec2 center;
  double radius;
};

SwingDisc swing_disc(const ContainerGeom& c) {
  return {c.door_pivot(), c.door_length() + kSwingMargin};
}

bool clears_statics(const World2D& w, const Rect& r, double gap) {
  for (const auto& c : w.containers) {
    if (dist_rect_rect(r, c.body) < gap) return false;
    SwingDisc d = swing_disc(c);
    if (dist_point_rect(d.center, r) < d.radius + 0.02) return false;
  }
  for (const auto& s : w.surfaces)
    if (dist_rect_rect(r, s.rect) < gap) return false;
  return true;
}

bool disc_in_bounds(const Rect& bounds, const SwingDisc& d) {
  return d.center.x - d.radius >= bounds.lo.x &&
         d.center.x + d.radius <= bounds.hi.x &&
         d.center.y - d.radius >= bounds.lo.y &&
         d.center.y + d.radius <= bounds.hi.y;
}

int draw_variant(Rng& rng, bool stapler, const GenerationOptions& gopt) {
  int base = stapler ? static_cast<int>(food_variants().size()) : 0;
  int n = stapler ? static_cast<int>(stapler_variants().size())
                  : static_cast<int>(food_variants().size());
  std::vector<int> allowed;
  for (int i = 0; i < n; ++i)
    if (base + i != gopt.exclude_variant) allowed.push_back(base + i);
  if (allowed.empty())
    throw std::invalid_argument("variant exclusion empties the item family");
  return allowed[rng.uniform_int(static_cast<int>(allowed.size()))];
}

const ItemVariant& variant_info(int global) {
  int nf = static_cast<int>(food_variants().size());
  if (global < 0 || global >= variant_count())
    throw std::invalid_argument("unknown item variant");
  return global < nf ? food_variants()[global]
                     : stapler_variants()[global - nf];
}

Term obj(ObjId o) { return Term{o}; }

void write_lines(const std::string& path, const std::vector<std::string>& ls) {
  std::string text;
  for (const auto& l : ls) {
    text += l;
    text += '\n';
  }
  save_text_file(path, text);
}

// Runs `fn(i)` for i in [0, n), fanning across problems. Exceptions are
// collected and the first one is rethrown after the loop.
template <typename F>
void parallel_over(int n, int jobs, F fn) {
  std::vector<std::string> errors(static_cast<size_t>(n));
  bool failed = false;
  if (jobs < 1) jobs = 1;
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = e.what();
      failed = true;
    }
  }
  if (failed)
    for (const auto& e : errors)
      if (!e.empty()) throw std::runtime_error(e);
}

std::string problem_rel_path(const std::string& task, const std::string& label) {
  return "problems/" + task + "/" + label + ".prob";
}

std::string split_label(bool is_test, int local) {
  return (is_test ? std::string("test_") : std::string("train_")) +
         zero_pad(local);
}

struct DataRecord {
  std::string problem;  // relative path
  std::string name;
  std::string skeleton;
  int label = 0;
};

std::string record_line(const DataRecord& r) {
  json j;
  j["problem"] = r.problem;
  j["name"] = r.name;
  j["skeleton"] = r.skeleton;
  j["label"] = r.label;
  return j.dump();
}

}  // namespace

uint64_t hash_str(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

const std::vector<ItemVariant>& food_variants() {
  static const std::vector<ItemVariant> v = {
      {0.055, 0}, {0.070, 1}, {0.085, 2}, {0.065, 3}};
  return v;
}

const std::vector<ItemVariant>& stapler_variants() {
  static const std::vector<ItemVariant> v = {{0.11, 6}, {0.13, 7}};
  return v;
}

int variant_count() {
  return static_cast<int>(food_variants().size() + stapler_variants().size());
}

const std::vector<TaskSpec>& task_specs() {
  static const std::vector<TaskSpec> specs = [] {
    std::vector<TaskSpec> v;
    TaskSpec t;

    t = TaskSpec{};
    t.name = "one_container_pick";
    t.containers = 1;
    t.goal = GoalKind::Holding;
    t.target_in_container = true;
    v.push_back(t);

    t = TaskSpec{};
    t.name = "two_container_pick";
    t.containers = 2;
    t.goal = GoalKind::Holding;
    t.target_in_container = true;
    v.push_back(t);

    t = TaskSpec{};
    t.name = "one_container_table_in";
    t.containers = 1;
    t.goal = GoalKind::InSpace;
    v.push_back(t);

    t = TaskSpec{};
    t.name = "two_container_in";
    t.containers = 2;
    t.goal = GoalKind::InSpace;
    t.cross_container = true;
    v.push_back(t);

    t = TaskSpec{};
    t.name = "stapler_in";
    t.containers = 1;
    t.stapler_items = true;
    t.goal = GoalKind::InSpace;
    v.push_back(t);

    return v;
  }();
  return specs;
}

const TaskSpec& task_by_name(const std::string& name) {
  for (const auto& t : task_specs())
    if (t.name == name) return t;
  throw std::invalid_argument("unknown task: " + name);
}

void validate_task_spec(const TaskSpec& spec) {
  if (spec.name.empty()) throw std::invalid_argument("task needs a name");
  if (spec.containers < 1 || spec.min_tables < 1 || spec.min_items < 1)
    throw std::invalid_argument("task counts must be >= 1");
  if (spec.max_tables < spec.min_tables || spec.max_items < spec.min_items)
    throw std::invalid_argument("task count ranges are inverted");
  if (spec.cross_container && spec.containers < 2)
    throw std::invalid_argument("cross-container tasks need >= 2 containers");
  if (spec.cross_container && spec.target_in_container)
    throw std::invalid_argument("pick one start rule for the target");
  if (spec.goal == GoalKind::OnSurface && !spec.target_in_container)
    throw std::invalid_argument(
        "surface goals need the target to start in a container");
}

GeneratedProblem generate_problem(const TaskSpec& spec, Rng& rng,
                                  const GenerationOptions& gopt) {
  validate_task_spec(spec);
  if (gopt.force_target_variant >= 0 &&
      gopt.force_target_variant == gopt.exclude_variant)
    throw std::invalid_argument("cannot force an excluded variant");
  RejectBudget budget;

  World2D w;
  w.bounds = Rect{{0.0, 0.0}, {kWorldSize, kWorldSize}};

  for (int ci = 0; ci < spec.containers; ++ci) {
    while (true) {
      budget.spend("container placement");
      ContainerGeom c;
      c.id = "cont" + std::to_string(ci);
      c.door_id = c.id + ":door";
      c.space_id = c.id + ":space";
      c.wall = kWallThickness;
      c.door_limit = kDoorLimit;
      c.door_thickness = kDoorThickness;
      c.opening = static_cast<Side>(rng.uniform_int(4));
      double x = rng.uniform(kEdgeMargin, kWorldSize - kEdgeMargin - kBodySize);
      double y = rng.uniform(kEdgeMargin, kWorldSize - kEdgeMargin - kBodySize);
      c.body = Rect{{x, y}, {x + kBodySize, y + kBodySize}};
      if (!disc_in_bounds(w.bounds, swing_disc(c))) continue;
      if (!clears_statics(w, c.body, kStaticGap)) continue;
      bool sweep_clear = true;
      SwingDisc d = swing_disc(c);
      for (const auto& other : w.containers) {
        if (dist_point_rect(d.center, other.body) < d.radius + 0.02)
          sweep_clear = false;
        SwingDisc od = swing_disc(other);
        if ((d.center - od.center).norm() < d.radius + od.radius)
          sweep_clear = false;
      }
      if (!sweep_clear) continue;
      w.containers.push_back(c);
      break;
    }
  }

  int n_tables =
      spec.min_tables + rng.uniform_int(spec.max_tables - spec.min_tables + 1);
  for (int ti = 0; ti < n_tables; ++ti) {
    while (true) {
      budget.spend("table placement");
      double tw = rng.uniform(0.8, 1.2);
      double th = rng.uniform(0.6, 0.9);
      double x = rng.uniform(0.12, kWorldSize - 0.12 - tw);
      double y = rng.uniform(0.12, kWorldSize - 0.12 - th);
      Rect r{{x, y}, {x + tw, y + th}};
      if (!clears_statics(w, r, kStaticGap)) continue;
      w.surfaces.push_back(SurfaceGeom{"table" + std::to_string(ti), r});
      break;
    }
  }

  int n_items =
      spec.min_items + rng.uniform_int(spec.max_items - spec.min_items + 1);
  for (int ii = 0; ii < n_items; ++ii) {
    int variant = (ii == 0 && gopt.force_target_variant >= 0)
                      ? gopt.force_target_variant
                      : draw_variant(rng, spec.stapler_items, gopt);
    const ItemVariant& info = variant_info(variant);
    ItemGeom g;
    g.id = (spec.stapler_items ? "stapler" : "item") + std::to_string(ii);
    g.radius = info.radius;
    g.color = info.color;
    g.shape_category = variant;
    w.items.push_back(g);
  }
  validate_world(w);

  // Start and goal regions for the target (item 0); the draws happen in a
  // fixed order so the stream stays aligned across code paths.
  int goal_container = 0;
  PlaceRegion target_region{true, 0};
  if (spec.target_in_container) {
    target_region = PlaceRegion{
        false, static_cast<int>(rng.uniform_int(spec.containers))};
  } else if (spec.cross_container) {
    goal_container = static_cast<int>(rng.uniform_int(spec.containers));
    bool on_table = rng.bernoulli(0.5);
    if (on_table)
      target_region =
          PlaceRegion{true, static_cast<int>(rng.uniform_int(n_tables))};
    else
      target_region =
          PlaceRegion{false, goal_container == 0 ? 1 : 0};
  } else {
    target_region =
        PlaceRegion{true, static_cast<int>(rng.uniform_int(n_tables))};
  }
  int goal_table =
      spec.goal == GoalKind::OnSurface
          ? static_cast<int>(rng.uniform_int(n_tables))
          : 0;

  SceneState sc;
  sc.item_pos.resize(w.items.size());
  std::vector<PlaceRegion> regions(w.items.size());
  for (size_t ii = 0; ii < w.items.size(); ++ii)
    regions[ii] = (ii == 0) ? target_region
                            : PlaceRegion{true, static_cast<int>(
                                                    rng.uniform_int(n_tables))};
  for (size_t ii = 0; ii < w.items.size(); ++ii) {
    while (true) {
      budget.spend("item pose");
      Value pose = sample_placement(w, static_cast<int>(ii), regions[ii], rng);
      Vec2 at{pose.data[0], pose.data[1]};
      bool clear = true;
      for (size_t jj = 0; jj < ii; ++jj)
        if ((at - sc.item_pos[jj]).norm() <
            w.items[ii].radius + w.items[jj].radius + kItemGap)
          clear = false;
      if (!clear) continue;
      sc.item_pos[ii] = at;
      break;
    }
  }

  for (size_t ci = 0; ci < w.containers.size(); ++ci) {
    bool closed = rng.bernoulli(0.5);
    sc.door_angles.push_back(closed ? 0.0
                                    : kDoorLimit * (1.0 - rng.uniform()));
  }

  Value robot_conf = Value::base_conf(0, 0, 0);
  while (true) {
    budget.spend("base conf");
    double r = w.robot.radius;
    double x = rng.uniform(r, kWorldSize - r);
    double y = rng.uniform(r, kWorldSize - r);
    double th = rng.uniform(-kPi, kPi);
    CollisionQuery q;
    q.body = CollisionQuery::Body::RobotBase;
    q.a = {x, y};
    q.radius = r;
    q.include_items = true;
    if (check_collision(w, sc, q)) continue;
    robot_conf = Value::base_conf(x, y, th);
    break;
  }

  Problem p;
  p.world = std::make_shared<World2D>(w);
  p.objects.push_back(ObjectInfo{"robot", ObjectCategory::Robot, -1});
  const ObjId robot_id = 0;
  std::vector<ObjId> item_ids, table_ids, cont_ids, door_ids, space_ids;
  for (const auto& it : w.items) {
    item_ids.push_back(static_cast<ObjId>(p.objects.size()));
    p.objects.push_back(ObjectInfo{it.id, ObjectCategory::Item, -1});
  }
  for (const auto& s : w.surfaces) {
    table_ids.push_back(static_cast<ObjId>(p.objects.size()));
    p.objects.push_back(ObjectInfo{s.id, ObjectCategory::Surface, -1});
  }
  for (const auto& c : w.containers) {
    ObjId cid = static_cast<ObjId>(p.objects.size());
    cont_ids.push_back(cid);
    p.objects.push_back(ObjectInfo{c.id, ObjectCategory::Container, -1});
    door_ids.push_back(static_cast<ObjId>(p.objects.size()));
    p.objects.push_back(ObjectInfo{c.door_id, ObjectCategory::Door, cid});
    space_ids.push_back(static_cast<ObjId>(p.objects.size()));
    p.objects.push_back(ObjectInfo{c.space_id, ObjectCategory::Space, cid});
  }

  std::vector<Literal> init;
  for (size_t ii = 0; ii < w.items.size(); ++ii) {
    init.push_back(Literal{Pred::Graspable, {obj(item_ids[ii])}});
    for (ObjId s : space_ids)
      init.push_back(Literal{Pred::Containable, {obj(item_ids[ii]), obj(s)}});
    Value pose =
        Value::pose(sc.item_pos[ii].x, sc.item_pos[ii].y, 0.0);
    if (regions[ii].is_surface)
      init.push_back(Literal{Pred::Supported,
                             {obj(item_ids[ii]),
                              obj(table_ids[static_cast<size_t>(
                                  regions[ii].index)]),
                              Term{pose}}});
    else
      init.push_back(Literal{
          Pred::In,
          {obj(item_ids[ii]),
           obj(space_ids[static_cast<size_t>(regions[ii].index)]),
           Term{pose}}});
  }
  for (size_t ci = 0; ci < w.containers.size(); ++ci) {
    init.push_back(Literal{Pred::IsJoint, {obj(door_ids[ci]), obj(cont_ids[ci])}});
    init.push_back(Literal{Pred::AtAngle,
                           {obj(door_ids[ci]),
                            Term{Value::joint_angle(sc.door_angles[ci])}}});
    init.push_back(Literal{sc.door_angles[ci] > 0.0 ? Pred::Open : Pred::Closed,
                           {obj(door_ids[ci])}});
  }
  init.push_back(Literal{Pred::HandEmpty, {}});
  init.push_back(Literal{Pred::AtConf, {obj(robot_id), Term{robot_conf}}});
  p.init = State::make(std::move(init));

  switch (spec.goal) {
    case GoalKind::Holding:
      p.goal = {Literal{Pred::Holding, {obj(item_ids[0])}}};
      break;
    case GoalKind::InSpace:
      p.goal = {Literal{
          Pred::In,
          {obj(item_ids[0]), obj(space_ids[static_cast<size_t>(goal_container)])}}};
      break;
    case GoalKind::OnSurface:
      p.goal = {Literal{Pred::On,
                        {obj(item_ids[0]),
                         obj(table_ids[static_cast<size_t>(goal_table)])}}};
      break;
  }

  validate_problem(p);
  validate_scene(w, initial_scene(p));
  return GeneratedProblem{w, p};
}

void validate_manifest(const DatasetManifest& m) {
  if (m.tasks.empty()) throw std::invalid_argument("manifest needs tasks");
  for (const auto& t : m.tasks) task_by_name(t);
  if (m.train_problems < 1 || m.test_problems < 0)
    throw std::invalid_argument("bad problem counts");
  if (m.skeletons_per_problem < 1)
    throw std::invalid_argument("skeletons per problem must be >= 1");
  if (!(m.split > 0.0 && m.split < 1.0))
    throw std::invalid_argument("split ratio must lie in (0,1)");
  if (m.out_dir.empty()) throw std::invalid_argument("out_dir is empty");
}

std::string manifest_json(const DatasetManifest& m) {
  json j;
  j["seed"] = m.seed;
  j["tasks"] = m.tasks;
  j["train_problems"] = m.train_problems;
  j["test_problems"] = m.test_problems;
  j["skeletons_per_problem"] = m.skeletons_per_problem;
  j["label_budget"] = {{"samples_per_var", m.label_budget.samples_per_var},
                       {"restarts", m.label_budget.restarts},
                       {"wall_clock", m.label_budget.wall_clock}};
  j["split"] = m.split;
  j["search"] = {{"depth_bound", m.search.depth_bound},
                 {"node_limit", m.search.node_limit}};
  j["out_dir"] = m.out_dir;
  return j.dump(2);
}

LabeledSkeletons label_problem(const Problem& p, int k,
                               const RefinementBudget& budget,
                               const SearchOptions& search, uint64_t seed,
                               bool stop_at_first_positive) {
  BatchSession session;
  session.options = search;
  LabeledSkeletons out;
  out.skeletons = batch_skeletons(session, p, k);
  for (size_t i = 0; i < out.skeletons.size(); ++i) {
    RefinementResult rr =
        sample_plan(out.skeletons[i], p, budget,
                    refinement_seed(seed, p, out.skeletons[i]));
    out.labels.push_back(rr.bound ? 1 : 0);
    if (rr.bound && out.first_positive < 0) {
      out.first_positive = static_cast<int>(i);
      if (stop_at_first_positive) {
        out.skeletons.resize(i + 1);
        break;
      }
    }
  }
  return out;
}

void run_gen(const DatasetManifest& m, const TaskSpec& spec) {
  validate_manifest(m);
  validate_task_spec(spec);
  fs::create_directories(fs::path(m.out_dir) / "problems" / spec.name);
  fs::create_directories(fs::path(m.out_dir) / "oracle");

  int total = m.train_problems + m.test_problems;
  std::vector<std::string> world_text(static_cast<size_t>(total));
  std::vector<std::string> problem_text(static_cast<size_t>(total));
  std::vector<std::string> oracle_line(static_cast<size_t>(total));
  std::vector<std::string> labels(static_cast<size_t>(total));

  parallel_over(total, m.jobs, [&](int idx) {
    bool is_test = idx >= m.train_problems;
    int local = is_test ? idx - m.train_problems : idx;
    std::string label = split_label(is_test, local);
    std::string name = spec.name + "_" + label;
    const GenerationOptions& gopt = is_test ? m.gen_test : m.gen_train;

    for (int attempt = 0; attempt < kMaxProblemTries; ++attempt) {
      Rng rng = Rng::stream(m.seed, hash_str(spec.name),
                            static_cast<uint64_t>(idx),
                            static_cast<uint64_t>(attempt));
      GeneratedProblem gp;
      try {
        gp = generate_problem(spec, rng, gopt);
      } catch (const GenerationError&) {
        continue;
      }
      gp.problem.name = name;
      gp.problem.world_path = label + ".world";
      LabeledSkeletons lab =
          label_problem(gp.problem, m.skeletons_per_problem, m.label_budget,
                        m.search, m.seed, /*stop_at_first_positive=*/true);
      if (lab.first_positive < 0) continue;  // no feasible skeleton, redraw
      size_t u = static_cast<size_t>(idx);
      world_text[u] = serialize_world(gp.world);
      problem_text[u] = serialize_problem(gp.problem);
      json j;
      j["name"] = name;
      j["problem"] = problem_rel_path(spec.name, label);
      j["skeleton"] = serialize_skeleton(
          lab.skeletons[static_cast<size_t>(lab.first_positive)],
          gp.problem.objects);
      oracle_line[u] = j.dump();
      labels[u] = label;
      return;
    }
    throw GenerationError("no feasible problem for " + name + " after " +
                          std::to_string(kMaxProblemTries) + " draws");
  });

  for (int idx = 0; idx < total; ++idx) {
    size_t u = static_cast<size_t>(idx);
    fs::path dir = fs::path(m.out_dir) / "problems" / spec.name;
    save_text_file((dir / (labels[u] + ".world")).string(), world_text[u]);
    save_text_file((dir / (labels[u] + ".prob")).string(), problem_text[u]);
  }
  write_lines((fs::path(m.out_dir) / "oracle" / (spec.name + ".jsonl")).string(),
              oracle_line);
  save_text_file((fs::path(m.out_dir) / "manifest.json").string(),
                 manifest_json(m));
}

void run_skeletons(const DatasetManifest& m, const TaskSpec& spec) {
  validate_manifest(m);
  fs::create_directories(fs::path(m.out_dir) / "data");

  int total = m.train_problems + m.test_problems;
  std::vector<std::vector<DataRecord>> recs(static_cast<size_t>(total));

  parallel_over(total, m.jobs, [&](int idx) {
    bool is_test = idx >= m.train_problems;
    int local = is_test ? idx - m.train_problems : idx;
    std::string label = split_label(is_test, local);
    std::string rel = problem_rel_path(spec.name, label);
    Problem p = load_problem((fs::path(m.out_dir) / rel).string());
    LabeledSkeletons lab = label_problem(
        p, m.skeletons_per_problem, m.label_budget, m.search, m.seed, false);
    if (lab.first_positive < 0)
      throw std::runtime_error("no positive skeleton for " + p.name);
    auto& out = recs[static_cast<size_t>(idx)];
    for (size_t i = 0; i < lab.skeletons.size(); ++i)
      out.push_back(DataRecord{rel, p.name,
                               serialize_skeleton(lab.skeletons[i], p.objects),
                               lab.labels[i]});
  });

  // Train/val split by problem, never by skeleton.
  std::vector<int> order(static_cast<size_t>(m.train_problems));
  for (int i = 0; i < m.train_problems; ++i) order[static_cast<size_t>(i)] = i;
  Rng split_rng = Rng::stream(m.seed, 0x73706c6974ull, hash_str(spec.name));
  split_rng.shuffle(order);
  int n_val = std::max(
      1, static_cast<int>(std::llround((1.0 - m.split) * m.train_problems)));
  if (n_val >= m.train_problems) n_val = m.train_problems - 1;
  std::set<int> val_set(order.begin(), order.begin() + n_val);

  std::vector<std::string> train_lines, val_lines, test_lines;
  long pos[3] = {0, 0, 0}, neg[3] = {0, 0, 0};
  long nprob[3] = {0, 0, 0};
  for (int idx = 0; idx < total; ++idx) {
    int split = idx >= m.train_problems ? 2 : (val_set.count(idx) ? 1 : 0);
    ++nprob[split];
    for (const auto& r : recs[static_cast<size_t>(idx)]) {
      (split == 0 ? train_lines : split == 1 ? val_lines : test_lines)
          .push_back(record_line(r));
      (r.label ? pos : neg)[split] += 1;
    }
  }

  // Leak audit: a test problem id in a training split is a hard error.
  std::set<std::string> train_names;
  for (int idx = 0; idx < m.train_problems; ++idx)
    train_names.insert(spec.name + "_" + split_label(false, idx));
  for (int t = 0; t < m.test_problems; ++t)
    if (train_names.count(spec.name + "_" + split_label(true, t)))
      throw std::runtime_error("test problem id found in training set");

  fs::path data = fs::path(m.out_dir) / "data";
  write_lines((data / (spec.name + "_train.jsonl")).string(), train_lines);
  write_lines((data / (spec.name + "_val.jsonl")).string(), val_lines);
  write_lines((data / (spec.name + "_test.jsonl")).string(), test_lines);

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"split", "problems", "records", "positives", "negatives"});
  const char* names[3] = {"train", "val", "test"};
  for (int s = 0; s < 3; ++s)
    rows.push_back({names[s], std::to_string(nprob[s]),
                    std::to_string(pos[s] + neg[s]), std::to_string(pos[s]),
                    std::to_string(neg[s])});
  save_text_file((data / (spec.name + "_classes.csv")).string(), to_csv(rows));
}

std::vector<Example> load_examples(const std::string& jsonl_path,
                                   const std::string& out_dir,
                                   const PredictorConfig& cfg, uint64_t seed) {
  std::string text = read_text_file(jsonl_path);
  std::istringstream in(text);
  std::map<std::string, std::shared_ptr<Problem>> cache;
  std::vector<Example> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    std::string rel = j.at("problem").get<std::string>();
    auto it = cache.find(rel);
    if (it == cache.end()) {
      auto p = std::make_shared<Problem>(
          load_problem((fs::path(out_dir) / rel).string()));
      it = cache.emplace(rel, std::move(p)).first;
    }
    const Problem& p = *it->second;
    std::string skel_line = j.at("skeleton").get<std::string>();
    Skeleton skel = parse_skeleton(skel_line, p);
    Rng rng = Rng::stream(seed, 0x6578616d706cull, hash_str(p.name),
                          hash_str(skel_line));
    Example ex;
    ex.seq = tokenize(p, strip_continuous(skel), cfg, rng);
    ex.label = j.at("label").get<int>() ? 1.0 : 0.0;
    out.push_back(std::move(ex));
  }
  return out;
}

double model_accuracy(const Model& m, const std::vector<Example>& examples) {
  if (examples.empty()) return 0.0;
  std::vector<TokenSeq> seqs;
  seqs.reserve(examples.size());
  for (const auto& e : examples) seqs.push_back(e.seq);
  std::vector<double> probs = forward_batch_serial(m, seqs);
  long hits = 0;
  for (size_t i = 0; i < examples.size(); ++i)
    if ((probs[i] >= 0.5) == (examples[i].label >= 0.5)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

TrainReport run_train(const DatasetManifest& m, const std::string& task,
                      const TrainSpec& ts, const std::string& model_name) {
  fs::path data = fs::path(m.out_dir) / "data";
  std::vector<Example> train_ex = load_examples(
      (data / (task + "_train.jsonl")).string(), m.out_dir, ts.cfg, m.seed);
  std::vector<Example> val_ex = load_examples(
      (data / (task + "_val.jsonl")).string(), m.out_dir, ts.cfg, m.seed);

  Model model = make_model(ts.cfg);
  init_params(model, ts.init_seed);
  TrainReport report = train(model, train_ex, val_ex, ts.opt, m.seed);

  fs::create_directories(fs::path(m.out_dir) / "models");
  fs::path base = fs::path(m.out_dir) / "models";
  save_model(model, (base / (model_name + ".pigi")).string());

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"epoch", "train_loss", "train_acc", "val_loss", "val_acc"});
  for (size_t e = 0; e < report.epochs.size(); ++e) {
    const EpochRecord& r = report.epochs[e];
    rows.push_back({std::to_string(e + 1), fmt_g(r.train_loss),
                    fmt_g(r.train_acc), fmt_g(r.val_loss), fmt_g(r.val_acc)});
  }
  save_text_file((base / (model_name + "_curve.csv")).string(), to_csv(rows));
  return report;
}

std::vector<EvalSummaryRow> run_eval(const DatasetManifest& m,
                                     const TaskSpec& spec,
                                     const EvalSpec& es) {
  validate_manifest(m);
  if (es.scorers.empty()) throw std::invalid_argument("no scorers given");
  fs::create_directories(fs::path(m.out_dir) / "runs");

  int n = m.test_problems;
  if (es.n_problems >= 0) n = std::min(n, es.n_problems);
  if (n <= 0) throw std::invalid_argument("no test problems to evaluate");

  bool needs_model = false, needs_oracle = false;
  for (const auto& s : es.scorers) {
    if (s == "pigi" || s == "pigi01") needs_model = true;
    else if (s == "oracle") needs_oracle = true;
    else if (s != "baseline" && s != "length")
      throw std::invalid_argument("unknown scorer: " + s);
  }

  std::shared_ptr<const Model> model;
  if (needs_model) {
    std::string path = es.model_path.empty()
                           ? (fs::path(m.out_dir) / "models" /
                              (spec.name + ".pigi")).string()
                           : es.model_path;
    if (!fs::exists(path))
      throw std::runtime_error("missing model: " + path);
    model = std::make_shared<Model>(load_model(path));
  }

  std::map<std::string, std::string> oracle_lines;
  if (needs_oracle) {
    std::string text = read_text_file(
        (fs::path(m.out_dir) / "oracle" / (spec.name + ".jsonl")).string());
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      oracle_lines[j.at("name").get<std::string>()] =
          j.at("skeleton").get<std::string>();
    }
  }

  // Problems load once; runs fan out per (scorer, problem).
  std::vector<std::shared_ptr<const Problem>> problems(
      static_cast<size_t>(n));
  parallel_over(n, m.jobs, [&](int i) {
    std::string rel = problem_rel_path(spec.name, split_label(true, i));
    problems[static_cast<size_t>(i)] = std::make_shared<const Problem>(
        load_problem((fs::path(m.out_dir) / rel).string()));
  });

  struct Run {
    PlannerRunRecord rec;
    PlannerFailure failure = PlannerFailure::None;
    std::string solution;  // bound skeleton line; empty when unsolved
  };
  std::vector<std::vector<Run>> runs(es.scorers.size(),
                                     std::vector<Run>(static_cast<size_t>(n)));

  for (size_t si = 0; si < es.scorers.size(); ++si) {
    const std::string& sname = es.scorers[si];
    parallel_over(n, m.jobs, [&](int i) {
      const Problem& p = *problems[static_cast<size_t>(i)];
      Scorer scorer;
      if (sname == "baseline") scorer = Scorer::constant1();
      else if (sname == "length") scorer = Scorer::length_ascending();
      else if (sname == "pigi") scorer = Scorer::learned(model);
      else if (sname == "pigi01") scorer = Scorer::learned_binary(model);
      else {
        auto it = oracle_lines.find(p.name);
        if (it == oracle_lines.end())
          throw std::runtime_error("no logged skeleton for " + p.name);
        scorer = Scorer::oracle(parse_skeleton(it->second, p));
      }
      PlannerResult res = batch_sorted_tamp(p, scorer, es.planner, m.seed);
      Run& r = runs[si][static_cast<size_t>(i)];
      r.rec = res.record;
      r.failure = res.failure;
      if (res.solution)
        r.solution = serialize_skeleton(*res.solution, p.objects);
    });
  }

  fs::path soldir = fs::path(m.out_dir) / "solutions" / spec.name;
  fs::create_directories(soldir);
  for (size_t si = 0; si < es.scorers.size(); ++si)
    for (int i = 0; i < n; ++i) {
      const Run& r = runs[si][static_cast<size_t>(i)];
      if (r.solution.empty()) continue;
      save_text_file((soldir / (split_label(true, i) + "_" + es.scorers[si] +
                                ".skel")).string(),
                     r.solution + "\n");
    }

  std::vector<std::string> jsonl;
  std::vector<std::vector<std::string>> metrics, timings;
  metrics.push_back({"task", "problem", "scorer", "solved", "failure",
                     "batches", "attempts", "false_positives"});
  timings.push_back({"task", "problem", "scorer", "seconds"});
  std::vector<EvalSummaryRow> summary;
  for (size_t si = 0; si < es.scorers.size(); ++si) {
    EvalSummaryRow row;
    row.task = spec.name;
    row.scorer = es.scorers[si];
    std::vector<double> secs;
    for (int i = 0; i < n; ++i) {
      const Run& r = runs[si][static_cast<size_t>(i)];
      jsonl.push_back(planner_record_json(r.rec));
      const char* failure = r.failure == PlannerFailure::None ? "none"
                            : r.failure == PlannerFailure::Timeout
                                ? "timeout"
                                : "no_skeletons";
      metrics.push_back({spec.name, r.rec.problem, r.rec.scorer,
                         r.rec.solved ? "1" : "0", failure,
                         std::to_string(r.rec.batches),
                         std::to_string(r.rec.attempts),
                         std::to_string(r.rec.false_positives)});
      timings.push_back(
          {spec.name, r.rec.problem, r.rec.scorer, fmt_g(r.rec.seconds)});
      ++row.runs;
      if (r.rec.solved) ++row.solved;
      if (r.failure == PlannerFailure::Timeout) ++row.timeouts;
      row.attempts += r.rec.attempts;
      row.false_positives += r.rec.false_positives;
      secs.push_back(r.rec.seconds);
    }
    row.mean_fp =
        static_cast<double>(row.false_positives) / static_cast<double>(n);
    summary.push_back(row);
  }

  fs::path out = fs::path(m.out_dir) / "runs";
  write_lines((out / (spec.name + "_runs.jsonl")).string(), jsonl);
  save_text_file((out / (spec.name + "_metrics.csv")).string(),
                 to_csv(metrics));
  save_text_file((out / (spec.name + "_timings.csv")).string(),
                 to_csv(timings));

  std::vector<std::vector<std::string>> srows, trows;
  srows.push_back({"task", "scorer", "runs", "solved", "timeouts", "attempts",
                   "false_positives", "mean_fp"});
  trows.push_back({"task", "scorer", "mean_seconds", "median_seconds"});
  for (size_t si = 0; si < es.scorers.size(); ++si) {
    const EvalSummaryRow& row = summary[si];
    srows.push_back({row.task, row.scorer, std::to_string(row.runs),
                     std::to_string(row.solved), std::to_string(row.timeouts),
                     std::to_string(row.attempts),
                     std::to_string(row.false_positives), fmt_g(row.mean_fp)});
    std::vector<double> secs;
    for (int i = 0; i < n; ++i)
      secs.push_back(runs[si][static_cast<size_t>(i)].rec.seconds);
    std::sort(secs.begin(), secs.end());
    double mean = 0;
    for (double s : secs) mean += s;
    mean /= static_cast<double>(secs.size());
    double median = secs.size() % 2 ? secs[secs.size() / 2]
                                    : 0.5 * (secs[secs.size() / 2 - 1] +
                                             secs[secs.size() / 2]);
    trows.push_back({row.task, row.scorer, fmt_g(mean), fmt_g(median)});
  }
  save_text_file((out / (spec.name + "_summary.csv")).string(), to_csv(srows));
  save_text_file((out / (spec.name + "_timing_summary.csv")).string(),
                 to_csv(trows));

  if (es.svg) {
    std::vector<std::string> labels;
    std::vector<double> values;
    for (const auto& row : summary) {
      labels.push_back(row.scorer);
      values.push_back(row.mean_fp);
    }
    save_text_file((out / (spec.name + "_summary.svg")).string(),
                   svg_bar_chart(spec.name + ": mean false positives",
                                 labels, values));
  }
  return summary;
}

LooReport run_loo(const DatasetManifest& m, const TaskSpec& spec, int variant,
                  const TrainSpec& ts) {
  int nf = static_cast<int>(food_variants().size());
  int base = spec.stapler_items ? nf : 0;
  int family = spec.stapler_items ? static_cast<int>(stapler_variants().size())
                                  : nf;
  if (family < 3)
    throw std::invalid_argument(
        "insufficient instances: leave-one-out needs >= 3 variants, the " +
        std::string(spec.stapler_items ? "stapler" : "food") + " family has " +
        std::to_string(family));
  if (variant < base || variant >= base + family)
    throw std::invalid_argument("variant outside the task's item family");

  DatasetManifest m2 = m;
  m2.out_dir = (fs::path(m.out_dir) /
                ("loo_" + spec.name + "_v" + std::to_string(variant)))
                   .string();
  m2.gen_train.exclude_variant = variant;
  m2.gen_test = GenerationOptions{};
  m2.gen_test.force_target_variant = variant;

  run_gen(m2, spec);
  run_skeletons(m2, spec);
  run_train(m2, spec.name, ts, spec.name);

  Model model = load_model(
      (fs::path(m2.out_dir) / "models" / (spec.name + ".pigi")).string());
  fs::path data = fs::path(m2.out_dir) / "data";
  std::vector<Example> seen = load_examples(
      (data / (spec.name + "_val.jsonl")).string(), m2.out_dir, ts.cfg,
      m2.seed);
  std::vector<Example> unseen = load_examples(
      (data / (spec.name + "_test.jsonl")).string(), m2.out_dir, ts.cfg,
      m2.seed);

  LooReport rep;
  rep.variant = variant;
  rep.seen_count = static_cast<int>(seen.size());
  rep.unseen_count = static_cast<int>(unseen.size());
  rep.seen_accuracy = model_accuracy(model, seen);
  rep.unseen_accuracy = model_accuracy(model, unseen);

  rep.audit_clean = true;
  for (int i = 0; i < m2.train_problems; ++i) {
    fs::path wpath = fs::path(m2.out_dir) / "problems" / spec.name /
                     (split_label(false, i) + ".world");
    World2D w = load_world(wpath.string());
    for (const auto& it : w.items)
      if (it.shape_category == variant) rep.audit_clean = false;
  }

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"variant", "seen_count", "seen_accuracy", "unseen_count",
                  "unseen_accuracy", "audit_clean"});
  rows.push_back({std::to_string(rep.variant), std::to_string(rep.seen_count),
                  fmt_g(rep.seen_accuracy), std::to_string(rep.unseen_count),
                  fmt_g(rep.unseen_accuracy), rep.audit_clean ? "1" : "0"});
  save_text_file((fs::path(m2.out_dir) / "loo_report.csv").string(),
                 to_csv(rows));
  return rep;
}

ValidationReport validate_solution_file(const std::string& problem_path,
                                        const std::string& skel_path) {
  Problem p = load_problem(problem_path);
  std::string text = read_text_file(skel_path);
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) break;
  if (line.empty()) throw std::invalid_argument("empty solution file");
  Skeleton s = parse_skeleton(line, p, skel_path);
  return validate_solution(s, p);
}

std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
  if (labels.size() != values.size())
    throw std::invalid_argument("labels/values size mismatch");
  int n = static_cast<int>(values.size());
  int bar_w = 70, gap = 30, left = 50, top = 40, plot_h = 160, bottom = 40;
  int width = left + n * (bar_w + gap) + gap;
  int height = top + plot_h + bottom;
  double vmax = 1e-9;
  for (double v : values) vmax = std::max(vmax, v);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" "
         "font-size=\"15\">"
      << title << "</text>\n";
  for (int i = 0; i < n; ++i) {
    double h = plot_h * (values[static_cast<size_t>(i)] / vmax);
    int x = left + gap + i * (bar_w + gap);
    double y = top + plot_h - h;
    out << "<rect x=\"" << x << "\" y=\"" << fmt_g(y) << "\" width=\"" << bar_w
        << "\" height=\"" << fmt_g(h) << "\" fill=\"#4477aa\"/>\n";
    out << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\">"
        << labels[static_cast<size_t>(i)] << "</text>\n";
    out << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << fmt_g(y - 4)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << fmt_g(values[static_cast<size_t>(i)]) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace pigi
