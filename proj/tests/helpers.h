#pragma once

// Hand-built scenes shared by the test binaries. Layout constants leave
// generous clearance so refinement feasibility in a toy is decided by the
// feature under test (a closed door, a missing literal), not by margins.

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pigi/harness.h"
#include "pigi/model.h"
#include "pigi/problem_io.h"

namespace toys {

struct ToyOpts {
  std::string name = "toy";
  int tables = 1;           // 1 or 2
  int items = 1;            // 0..2; item0 may sit in the container instead
  bool container = false;
  double door_angle = 0.0;  // init angle, 0 = closed
  bool item0_in_container = false;
};

inline pigi::GeneratedProblem make_toy(const ToyOpts& o) {
  using namespace pigi;
  if (o.tables < 1 || o.tables > 2 || o.items < 0 || o.items > 2)
    throw std::invalid_argument("toy layout out of range");
  if (o.item0_in_container && (!o.container || o.items < 1))
    throw std::invalid_argument("toy needs a container holding item0");

  World2D w;
  w.bounds = {{0, 0}, {5, 5}};
  w.surfaces.push_back({"table0", {{0.5, 0.5}, {1.7, 1.4}}});
  if (o.tables == 2) w.surfaces.push_back({"table1", {{3.3, 0.5}, {4.5, 1.4}}});
  if (o.container) {
    ContainerGeom c;
    c.id = "box";
    c.body = {{2.0, 3.2}, {2.66, 3.86}};
    c.wall = 0.08;
    c.opening = Side::South;
    c.door_id = "box:door";
    c.door_limit = 2.0;
    c.door_thickness = 0.02;
    c.space_id = "box:space";
    w.containers.push_back(c);
  }
  // Variant 1 and variant 3 of the food table.
  if (o.items >= 1) w.items.push_back({"item0", 0.070, 1, 1});
  if (o.items >= 2) w.items.push_back({"item1", 0.065, 3, 3});

  Problem p;
  p.name = o.name;
  p.world_path = o.name + ".world";
  auto add_obj = [&](const std::string& id, ObjectCategory cat,
                     ObjId parent = -1) {
    p.objects.push_back({id, cat, parent});
    return static_cast<ObjId>(p.objects.size() - 1);
  };
  add_obj("robot", ObjectCategory::Robot);
  for (const auto& s : w.surfaces) add_obj(s.id, ObjectCategory::Surface);
  for (const auto& c : w.containers) {
    ObjId cid = add_obj(c.id, ObjectCategory::Container);
    add_obj(c.door_id, ObjectCategory::Door, cid);
    add_obj(c.space_id, ObjectCategory::Space, cid);
  }
  for (const auto& it : w.items) add_obj(it.id, ObjectCategory::Item);

  auto oid = [&](const std::string& id) {
    auto r = p.find_object(id);
    if (!r) throw std::logic_error("toy object missing: " + id);
    return *r;
  };

  std::vector<Literal> init;
  for (const auto& it : w.items)
    init.push_back({Pred::Graspable, {oid(it.id)}});
  for (const auto& it : w.items)
    for (const auto& c : w.containers)
      init.push_back({Pred::Containable, {oid(it.id), oid(c.space_id)}});
  // item0 in the box or on table0; item1 always on table0.
  if (o.items >= 1) {
    if (o.item0_in_container)
      init.push_back({Pred::In,
                      {oid("item0"), oid("box:space"),
                       Value::pose(2.33, 3.55, 0)}});
    else
      init.push_back({Pred::Supported,
                      {oid("item0"), oid("table0"),
                       Value::pose(0.85, 0.95, 0)}});
  }
  if (o.items >= 2)
    init.push_back({Pred::Supported,
                    {oid("item1"), oid("table0"), Value::pose(1.35, 1.05, 0)}});
  for (const auto& c : w.containers) {
    init.push_back({Pred::IsJoint, {oid(c.door_id), oid(c.id)}});
    init.push_back(
        {Pred::AtAngle, {oid(c.door_id), Value::joint_angle(o.door_angle)}});
    if (o.door_angle > 0)
      init.push_back({Pred::Open, {oid(c.door_id)}});
    else
      init.push_back({Pred::Closed, {oid(c.door_id)}});
  }
  init.push_back({Pred::HandEmpty, {}});
  init.push_back(
      {Pred::AtConf, {oid("robot"), Value::base_conf(2.5, 1.9, 0)}});
  p.init = State::make(std::move(init));

  GeneratedProblem g;
  g.world = w;
  p.world = std::make_shared<World2D>(w);
  g.problem = std::move(p);
  validate_problem(g.problem);
  validate_scene(*g.problem.world, initial_scene(g.problem));
  return g;
}

inline pigi::ObjId obj(const pigi::Problem& p, const std::string& id) {
  auto r = p.find_object(id);
  if (!r) throw std::logic_error("no such object: " + id);
  return *r;
}

inline pigi::Literal goal_holding(const pigi::Problem& p,
                                  const std::string& item) {
  return {pigi::Pred::Holding, {obj(p, item)}};
}
inline pigi::Literal goal_on(const pigi::Problem& p, const std::string& item,
                             const std::string& surface) {
  return {pigi::Pred::On, {obj(p, item), obj(p, surface)}};
}
inline pigi::Literal goal_in(const pigi::Problem& p, const std::string& item,
                             const std::string& space) {
  return {pigi::Pred::In, {obj(p, item), obj(p, space)}};
}
inline pigi::Literal goal_open(const pigi::Problem& p,
                               const std::string& door) {
  return {pigi::Pred::Open, {obj(p, door)}};
}
inline pigi::Literal goal_closed(const pigi::Problem& p,
                                 const std::string& door) {
  return {pigi::Pred::Closed, {obj(p, door)}};
}

// Problem plus its world saved under a fresh directory, for the loaders.
inline std::string save_toy(const pigi::GeneratedProblem& g,
                            const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  pigi::save_text_file((dir / g.problem.world_path).string(),
                       pigi::serialize_world(g.world));
  std::string prob_path = (dir / (g.problem.name + ".prob")).string();
  pigi::save_text_file(prob_path, pigi::serialize_problem(g.problem));
  return prob_path;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto cand = base / (tag + "_" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directories(cand, ec)) {
        path_ = cand;
        return;
      }
    }
    throw std::runtime_error("cannot allocate temp dir for " + tag);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace toys
