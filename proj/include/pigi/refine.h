#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pigi/geometry.h"
#include "pigi/model.h"

namespace pigi {

// How a free parameter gets a candidate value. Derived bindings (handle
// grasps) have a single candidate computed from earlier bindings.
enum class SamplerKind {
  ItemGrasp,    // grasp offset around an item
  Placement,    // pose inside a surface or space
  DoorAngle,    // uniform over (0, limit]
  HandleGrasp,  // derived: handle point minus the pull conf
  ManipConf,    // base conf reaching a pick/place pose
  PullConf,     // base conf parked near a door handle
  FreeConf,     // conf used only by moves; uniform collision-free
  Output        // trajectory produced while checking, never sampled
};

struct SamplerBinding {
  SamplerKind kind = SamplerKind::Output;
  int item = -1;       // world item index
  int container = -1;  // world container index (doors)
  PlaceRegion region;  // Placement only
  int step = -1;       // anchor action step
  int slot = -1;       // param slot at the anchor
};

std::string sampler_to_string(const SamplerBinding& b,
                              const World2D& w);

struct ConstraintVar {
  int id = -1;  // Free id
  ValueKind kind = ValueKind::Pose;
  int first_step = -1;  // step of first occurrence in the skeleton
  SamplerBinding sampler;
};

// One typed constraint edge, anchored at a step; args are the resolved
// schema terms in tag order.
struct Constraint {
  std::string tag;  // motion | kin | approach | placement | pull |
                    // jointlimit | pullclose
  int step = -1;
  std::vector<Term> args;
};

struct ConstraintGraph {
  std::vector<ConstraintVar> variables;  // binding order (see below)
  std::vector<Constraint> constraints;   // skeleton order

  int var_position(int free_id) const;  // -1 when absent
};

class ConstraintError : public std::runtime_error {
 public:
  explicit ConstraintError(const std::string& m) : std::runtime_error(m) {}
};

// Variables appear once each, ordered by the step that anchors their
// sampler (confs bind at the pick/place/pull they serve, not at the move
// that first mentions them), then by slot; derived handle grasps sort
// after the conf they depend on. Throws ConstraintError on a schema
// constraint tag the refiner does not know.
ConstraintGraph extract_constraints(const Skeleton& skel, const Problem& p);

struct RefinementBudget {
  int samples_per_var = 30;
  int restarts = 10;
  double wall_clock = 20.0;  // seconds
};

struct RefinementStats {
  long samples = 0;  // total sampler invocations
  long checks = 0;   // total constraint evaluations
  double seconds = 0.0;
  int restarts_used = 0;
  std::map<std::string, long> failures;  // kinematics | collision |
                                         // placement | joint-limit | motion
  std::map<int, long> per_var_samples;   // free id -> draws
};

struct RefinementResult {
  bool bound = false;
  std::optional<Skeleton> solution;  // no Free slots when bound
  RefinementStats stats;
};

// Depth-first binding over the constraint graph with chronological
// backtracking. Candidate j of a variable in restart r is produced by an
// rng stream keyed (seed, id, r, j), so enlarging the budget only appends
// candidates and a Bound result stays Bound. Exhaustion is a result.
RefinementResult sample_plan(const Skeleton& skel, const Problem& p,
                             const RefinementBudget& budget, uint64_t seed);

struct ValidationReport {
  bool ok = true;
  int step = -1;            // first violating step, -1 for structural
  std::string constraint;   // what failed, empty when ok
};

// Independent re-simulation of a fully bound solution: abstract effects,
// reach and clearance at every step, trajectory sweeps, goal at the end.
// Deliberately rebuilt from geometric primitives rather than the
// incremental checks used by sample_plan.
ValidationReport validate_solution(const Skeleton& solution,
                                   const Problem& p);

// One JSON object (single line) describing a refinement attempt.
std::string refinement_record_json(const Problem& p, const StrippedPlan& plan,
                                   const RefinementResult& r);

}  // namespace pigi
