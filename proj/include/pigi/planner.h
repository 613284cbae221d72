#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pigi/model.h"
#include "pigi/predictor.h"
#include "pigi/refine.h"
#include "pigi/search.h"

namespace pigi {

enum class ScorerKind { Constant1, LengthAscending, Learned, LearnedBinary,
                        Oracle };

// Skeleton scorers. Constant1 makes the tie-break (shorter first) the
// whole policy; LengthAscending maps length l to 1/(1+l) so the same
// descending sort yields ascending length; Learned runs the predictor;
// LearnedBinary rounds it at the threshold; Oracle scores 1 only for a
// skeleton already logged as feasible for this problem.
struct Scorer {
  ScorerKind kind = ScorerKind::Constant1;
  std::shared_ptr<const Model> model;   // Learned, LearnedBinary
  double threshold = 0.5;               // LearnedBinary
  std::optional<Skeleton> oracle_plan;  // Oracle

  std::string name() const;

  static Scorer constant1();
  static Scorer length_ascending();
  static Scorer learned(std::shared_ptr<const Model> m);
  static Scorer learned_binary(std::shared_ptr<const Model> m,
                               double threshold = 0.5);
  static Scorer oracle(Skeleton logged_feasible);
};

// One score in [0,1] per skeleton. `seed` keys the tokenizer streams of
// learned scorers; other scorers ignore it. `parallel` may fan the
// predictor across skeletons (bitwise identical to serial).
std::vector<double> score_batch(const Scorer& s, const Problem& p,
                                const std::vector<Skeleton>& skeletons,
                                uint64_t seed, bool parallel = false);

struct PlannerOptions {
  int k = 50;              // skeletons per batch
  double timeout = 60.0;   // seconds, whole run
  // Keep scores > 0 instead of the 0.5-discard rule (the pseudocode
  // reading; default is the prose reading with the all-below exception).
  bool pseudocode_rule = false;
  RefinementBudget budget;
  SearchOptions search;
  bool parallel_scoring = false;
};

struct PlannerRunRecord {
  std::string problem;
  std::string scorer;
  bool solved = false;
  double seconds = 0.0;  // wall clock; everything else is deterministic
  int batches = 0;
  long attempts = 0;         // refinement attempts
  long false_positives = 0;  // attempts that exhausted their budget
  std::vector<std::vector<double>> scores;  // per batch, discovery order
};

enum class PlannerFailure { None, Timeout, NoSkeletons };

struct PlannerResult {
  std::optional<Skeleton> solution;  // fully bound when set
  PlannerFailure failure = PlannerFailure::None;
  PlannerRunRecord record;
};

// The refinement seed for one (run, problem, skeleton) triple. Shared by
// the planner and the dataset labeler so a skeleton logged feasible under
// a seed refines identically when the planner meets it again.
uint64_t refinement_seed(uint64_t run_seed, const Problem& p,
                         const Skeleton& skel);

// Batch-sorted planning: gather up to k skeletons, score, drop scores
// below 0.5 unless the whole batch is below (then keep it all), sort by
// score descending with shorter-then-discovery tie-breaks, refine in
// order, return the first bound solution; repeat with fresh batches until
// the timeout. The Oracle scorer attempts only its logged skeleton.
PlannerResult batch_sorted_tamp(const Problem& p, const Scorer& scorer,
                                const PlannerOptions& opt, uint64_t seed);

// One JSON object (single line) per run.
std::string planner_record_json(const PlannerRunRecord& r);

}  // namespace pigi
