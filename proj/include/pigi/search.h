#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pigi/model.h"

namespace pigi {

// Pose context of a conf parameter when it reaches an item's initial pose
// (as opposed to a placement parameter's id).
constexpr int kInitPoseCtx = -2;

// One placeholder continuous parameter: what kind of value it stands for
// and which sampler context would produce it during refinement.
struct OptimisticParam {
  int id = -1;
  ValueKind kind = ValueKind::Pose;
  int level = 0;          // instantiation depth that created it
  std::string family;     // grasp | place | angle | hgrasp | conf | traj
  ObjId obj = -1;         // item or door the sampler is about
  ObjId region = -1;      // surface/space for placements
  int pose_param = -1;    // confs: placement param id, or kInitPoseCtx
  int grasp_param = -1;   // confs: grasp / handle-grasp param id
  int dir = 0;            // door confs: +1 opening, -1 closing
  bool canonical = false; // first param created for its context
};

// Pool of optimistic parameters. Grounding only ever instantiates the
// canonical (first-per-context) entries, which keeps the reachable action
// space finite at every level; later generations exist so that fresh ids
// keep appearing as levels grow.
struct OptimisticParameterSet {
  std::vector<OptimisticParam> params;  // params[i].id == i
  int level = 0;
  std::map<std::string, int> canon;     // context key -> canonical param id
  std::map<std::string, int> outputs;   // action signature -> trajectory id

  int add(OptimisticParam p, const std::string& context);
  // Trajectory placeholder for one ground action, memoized by signature.
  int output_param(const std::string& signature);
  const OptimisticParam* find(int id) const;
  int canonical_count() const { return static_cast<int>(canon.size()); }
};

// One level of fresh parameters: grasps and pick confs per graspable item,
// placements per (item, surface) and containable (item, space) pair, an
// opening angle, handle grasp and two pull confs per door; from level two
// on, confs reaching the canonical placement poses.
void new_parameters(OptimisticParameterSet& X, const Problem& p);

// Trie over stripped plans returned so far.
class ForbiddenSet {
 public:
  bool insert(const StrippedPlan& plan);  // false when already present
  bool contains(const StrippedPlan& plan) const;
  size_t size() const { return count_; }

  // Incremental walk used by the search; -1 once diverged.
  int root() const { return 0; }
  int step(int node, const StrippedAction& a) const;
  bool terminal(int node) const { return nodes_[node].term; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    std::map<StrippedAction, int> next;
    bool term = false;
  };
  std::vector<Node> nodes_{1};
  size_t count_ = 0;
};

struct SearchOptions {
  int depth_bound = 14;
  long node_limit = 2000000;  // safety valve; hitting it reports failure
};

struct SearchStats {
  long nodes_expanded = 0;
  int max_depth = 0;
  bool hit_node_limit = false;
};

// Successor cache over abstract states; owned by a BatchSession so repeat
// searches share grounding work. Opaque outside the implementation.
class StateGraph;

// Shortest goal-achieving skeleton whose stripped sequence is not in
// `forbidden`; ties break lexicographically on (action name, object ids).
// none when nothing exists within the depth bound at the current X.
std::optional<Skeleton> forbid_search(const Problem& p,
                                      OptimisticParameterSet& X,
                                      const ForbiddenSet& forbidden,
                                      const SearchOptions& opt = {},
                                      SearchStats* stats = nullptr,
                                      StateGraph* cache = nullptr);

// X and the forbidden trie persist across batches within one planner run.
struct BatchSession {
  SearchOptions options;
  OptimisticParameterSet X;
  ForbiddenSet forbidden;
  SearchStats last_stats;
  int new_parameter_calls = 0;
  std::shared_ptr<StateGraph> graph;
};

// Up to k further skeletons, pairwise distinct as stripped sequences and
// in discovery order. Grows X by one level per shortfall and stops early
// only once growth provably cannot add plans.
std::vector<Skeleton> batch_skeletons(BatchSession& s, const Problem& p,
                                      int k);

}  // namespace pigi
