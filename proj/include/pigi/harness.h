#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pigi/model.h"
#include "pigi/planner.h"
#include "pigi/predictor.h"
#include "pigi/refine.h"
#include "pigi/rng.h"
#include "pigi/search.h"

namespace pigi {

enum class GoalKind { Holding, OnSurface, InSpace };

// Item variant table: a (radius, color) family per entry. Food-analog
// variants come first, stapler-analog variants after. An item's
// shape_category stores its variant index, which is what leave-one-out
// holds out; the predictor only ever sees radius and color.
struct ItemVariant {
  double radius;
  int color;
};
const std::vector<ItemVariant>& food_variants();     // 4 entries
const std::vector<ItemVariant>& stapler_variants();  // 2 entries
int variant_count();                                 // both tables

struct TaskSpec {
  std::string name;
  int containers = 1;
  int min_tables = 1, max_tables = 2;
  int min_items = 1, max_items = 2;
  bool stapler_items = false;  // items drawn from the stapler table
  GoalKind goal = GoalKind::Holding;
  bool target_in_container = false;  // target starts inside a container
  // Target may start inside the non-goal container instead of on a table
  // (two-container restocking); needs containers >= 2.
  bool cross_container = false;
};

const std::vector<TaskSpec>& task_specs();
const TaskSpec& task_by_name(const std::string& name);  // invalid_argument
void validate_task_spec(const TaskSpec& spec);          // invalid_argument

class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& m) : std::runtime_error(m) {}
};

struct GenerationOptions {
  int exclude_variant = -1;       // never generate this variant
  int force_target_variant = -1;  // pin the target item's variant
};

struct GeneratedProblem {
  World2D world;    // also owned by problem.world
  Problem problem;  // name and world_path left for the caller
};

// One scene + problem draw. Door angles are 0 with probability 0.5, else
// uniform on (0, limit]. All placement loops share one rejection counter;
// past 1000 rejections the draw fails.
GeneratedProblem generate_problem(const TaskSpec& spec, Rng& rng,
                                  const GenerationOptions& gopt = {});

struct DatasetManifest {
  uint64_t seed = 0;
  std::vector<std::string> tasks;
  int train_problems = 500;
  int test_problems = 30;
  int skeletons_per_problem = 50;
  RefinementBudget label_budget;
  double split = 0.9;  // train fraction of the train problems, in (0,1)
  SearchOptions search;
  std::string out_dir = "out";
  int jobs = 1;
  GenerationOptions gen_train;
  GenerationOptions gen_test;
};

void validate_manifest(const DatasetManifest& m);  // invalid_argument
std::string manifest_json(const DatasetManifest& m);

// Skeletons for one problem in discovery order, each labeled by running
// refinement under `budget` with the shared refinement_seed keying, so
// labels reproduce wherever the same (seed, problem, skeleton) meet.
struct LabeledSkeletons {
  std::vector<Skeleton> skeletons;
  std::vector<int> labels;  // 1 = refinement bound it
  int first_positive = -1;
};
LabeledSkeletons label_problem(const Problem& p, int k,
                               const RefinementBudget& budget,
                               const SearchOptions& search, uint64_t seed,
                               bool stop_at_first_positive = false);

// gen: draw and screen train/test problems for one task. Every kept
// problem has a logged feasible skeleton. Writes
//   problems/<task>/{train,test}_NNNN.{world,prob}
//   oracle/<task>.jsonl    (problem name -> feasible skeleton line)
void run_gen(const DatasetManifest& m, const TaskSpec& spec);

// skeletons: label up to k skeletons per problem. Writes
//   data/<task>_{train,val,test}.jsonl   (records: problem, skeleton, label)
//   data/<task>_classes.csv              (class balance per split)
// Train/val split is by problem. Raises if a problem yields no positive
// or a test problem leaks into a training split.
void run_skeletons(const DatasetManifest& m, const TaskSpec& spec);

struct TrainSpec {
  PredictorConfig cfg;
  TrainOptions opt;
  uint64_t init_seed = 1;
};

// train: examples from the dataset files -> models/<name>.pigi plus
// models/<name>_curve.csv (per-epoch losses and accuracies).
TrainReport run_train(const DatasetManifest& m, const std::string& task,
                      const TrainSpec& ts, const std::string& model_name);

struct EvalSpec {
  std::vector<std::string> scorers;  // of baseline,length,pigi,pigi01,oracle
  std::string model_path;            // default models/<task>.pigi
  PlannerOptions planner;
  int n_problems = -1;  // cap, -1 = every test problem
  bool svg = false;
};

struct EvalSummaryRow {
  std::string task, scorer;
  int runs = 0;
  int solved = 0;
  int timeouts = 0;
  long attempts = 0;
  long false_positives = 0;
  double mean_fp = 0.0;
};

// eval: run the planner per (scorer, test problem). Writes
//   runs/<task>_runs.jsonl      (full records, includes wall time)
//   runs/<task>_metrics.csv     (deterministic per-run fields)
//   runs/<task>_summary.csv     (deterministic per-scorer aggregates)
//   runs/<task>_timings.csv     (wall-clock fields, kept separate)
//   runs/<task>_summary.svg     (optional mean-FP bar chart)
std::vector<EvalSummaryRow> run_eval(const DatasetManifest& m,
                                     const TaskSpec& spec, const EvalSpec& es);

struct LooReport {
  int variant = -1;
  double seen_accuracy = 0.0;    // held-out split, variant excluded
  double unseen_accuracy = 0.0;  // test problems forced to the variant
  int seen_count = 0, unseen_count = 0;
  bool audit_clean = false;  // variant absent from every training file
};

// loo: regenerate the task with one item variant excluded from training
// and forced as the test target, train, report seen/unseen accuracy.
// Requires >= 3 variants in the item family used by the task.
LooReport run_loo(const DatasetManifest& m, const TaskSpec& spec, int variant,
                  const TrainSpec& ts);

// Examples from a dataset JSONL file. Problem paths resolve against
// out_dir; tokenizer streams are keyed by (seed, problem, skeleton).
std::vector<Example> load_examples(const std::string& jsonl_path,
                                   const std::string& out_dir,
                                   const PredictorConfig& cfg, uint64_t seed);

// Fraction of examples the model classifies correctly at 0.5.
double model_accuracy(const Model& m, const std::vector<Example>& examples);

// validate: re-check a one-line .skel solution against its problem.
ValidationReport validate_solution_file(const std::string& problem_path,
                                        const std::string& skel_path);

std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::string>& labels,
                          const std::vector<double>& values);

uint64_t hash_str(const std::string& s);  // FNV-1a, stream keying

}  // namespace pigi
