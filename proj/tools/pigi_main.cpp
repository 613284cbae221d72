#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pigi/harness.h"
#include "pigi/problem_io.h"

namespace {

using namespace pigi;

struct CommonArgs {
  uint64_t seed = 0;
  std::string out_dir = "out";
  int jobs = 1;
  std::string task;
  int train = 500, test = 30, k = 50;
  double split = 0.9;
  int samples = 30, restarts = 10;
  double refine_wall = 20.0;
  int depth = 14;
  long node_limit = 2000000;
};

DatasetManifest make_manifest(const CommonArgs& a) {
  DatasetManifest m;
  m.seed = a.seed;
  m.tasks = {a.task};
  m.train_problems = a.train;
  m.test_problems = a.test;
  m.skeletons_per_problem = a.k;
  m.split = a.split;
  m.label_budget.samples_per_var = a.samples;
  m.label_budget.restarts = a.restarts;
  m.label_budget.wall_clock = a.refine_wall;
  m.search.depth_bound = a.depth;
  m.search.node_limit = a.node_limit;
  m.out_dir = a.out_dir;
  m.jobs = a.jobs;
  return m;
}

void add_manifest_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--task", a.task, "task name")->required();
  cmd->add_option("--train", a.train, "training problems");
  cmd->add_option("--test", a.test, "test problems");
  cmd->add_option("--k", a.k, "skeletons per problem");
  cmd->add_option("--split", a.split, "train fraction of the train problems");
  cmd->add_option("--samples", a.samples, "refinement samples per variable");
  cmd->add_option("--restarts", a.restarts, "refinement restarts");
  cmd->add_option("--refine-wall", a.refine_wall,
                  "refinement wall clock seconds");
  cmd->add_option("--depth", a.depth, "search depth bound");
  cmd->add_option("--node-limit", a.node_limit, "search node limit");
}

struct TrainArgs {
  std::string model_name;
  uint64_t init_seed = 1;
  int epochs = 100, batch = 32;
  double lr = 1e-3;
  int d = 32, layers = 2, heads = 2, ff = -1, max_seq = 32;
  bool one_hot_names = false, drop_object_features = false, drop_init = false;
  std::string drop_values = "none";
  bool parallel = false;
};

void add_train_flags(CLI::App* cmd, TrainArgs& t) {
  cmd->add_option("--name", t.model_name, "model file name (default: task)");
  cmd->add_option("--init-seed", t.init_seed, "parameter init seed");
  cmd->add_option("--epochs", t.epochs, "training epochs");
  cmd->add_option("--batch", t.batch, "minibatch size");
  cmd->add_option("--lr", t.lr, "learning rate");
  cmd->add_option("--d", t.d, "embedding width");
  cmd->add_option("--layers", t.layers, "transformer layers");
  cmd->add_option("--heads", t.heads, "attention heads");
  cmd->add_option("--ff", t.ff, "feed-forward width (default 2*d)");
  cmd->add_option("--max-seq", t.max_seq, "token budget per sequence");
  cmd->add_flag("--one-hot-names", t.one_hot_names,
                "one-hot name embeddings instead of learned");
  cmd->add_flag("--drop-object-features", t.drop_object_features,
                "ablation: drop object feature elements");
  cmd->add_option("--drop-values", t.drop_values,
                  "ablation: drop value elements (none|all|poses|angles)");
  cmd->add_flag("--drop-init", t.drop_init,
                "ablation: drop init literals from sequences");
  cmd->add_flag("--parallel", t.parallel, "parallel gradient batches");
}

TrainSpec make_train_spec(const TrainArgs& t) {
  TrainSpec ts;
  ts.cfg.d = t.d;
  ts.cfg.layers = t.layers;
  ts.cfg.heads = t.heads;
  ts.cfg.ff = t.ff > 0 ? t.ff : 2 * t.d;
  ts.cfg.max_seq = t.max_seq;
  ts.cfg.one_hot_names = t.one_hot_names;
  ts.cfg.drop_object_features = t.drop_object_features;
  ts.cfg.drop_init = t.drop_init;
  if (t.drop_values == "none") ts.cfg.drop_values = DropValues::None;
  else if (t.drop_values == "all") ts.cfg.drop_values = DropValues::All;
  else if (t.drop_values == "poses") ts.cfg.drop_values = DropValues::Poses;
  else if (t.drop_values == "angles") ts.cfg.drop_values = DropValues::Angles;
  else throw CLI::ValidationError("--drop-values", "unknown value");
  ts.opt.epochs = t.epochs;
  ts.opt.batch_size = t.batch;
  ts.opt.lr = t.lr;
  ts.opt.parallel = t.parallel;
  ts.init_seed = t.init_seed;
  return ts;
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D manipulation planning with learned skeleton feasibility"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file");

  CommonArgs a;
  app.add_option("--seed", a.seed, "run seed")->configurable(true);
  app.add_option("--out-dir", a.out_dir, "output directory");
  app.add_option("--jobs", a.jobs, "worker threads");

  auto* gen = app.add_subcommand("gen", "generate and screen problems");
  add_manifest_flags(gen, a);

  auto* skel = app.add_subcommand("skeletons", "enumerate and label skeletons");
  add_manifest_flags(skel, a);

  auto* tr = app.add_subcommand("train", "train the feasibility predictor");
  TrainArgs targs;
  add_manifest_flags(tr, a);
  add_train_flags(tr, targs);

  auto* ev = app.add_subcommand("eval", "run planner ablations");
  add_manifest_flags(ev, a);
  std::string scorers = "baseline,length,pigi,pigi01,oracle";
  std::string model_path;
  int planner_k = 50, n_problems = -1;
  double timeout = 60.0;
  bool pseudocode_rule = false, svg = false;
  ev->add_option("--scorers", scorers, "comma list of scorers");
  ev->add_option("--model", model_path, "model path for learned scorers");
  ev->add_option("--planner-k", planner_k, "skeletons per planner batch");
  ev->add_option("--n", n_problems, "cap on test problems");
  ev->add_option("--timeout", timeout, "planner timeout seconds");
  ev->add_flag("--pseudocode-rule", pseudocode_rule,
               "keep scores > 0 instead of the 0.5 discard rule");
  ev->add_flag("--svg", svg, "emit a summary bar chart");

  auto* loo = app.add_subcommand("loo", "leave-one-out item variant study");
  TrainArgs largs;
  int variant = -1;
  add_manifest_flags(loo, a);
  add_train_flags(loo, largs);
  loo->add_option("--variant", variant, "item variant to hold out")
      ->required();

  auto* val = app.add_subcommand("validate", "re-check a solution file");
  std::string problem_path, solution_path;
  val->add_option("--problem", problem_path, "problem file")->required();
  val->add_option("--solution", solution_path, "skeleton line file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 1 : 0;
  }

  try {
    if (gen->parsed()) {
      DatasetManifest m = make_manifest(a);
      run_gen(m, task_by_name(a.task));
      std::printf("generated %d train + %d test problems for %s under %s\n",
                  m.train_problems, m.test_problems, a.task.c_str(),
                  m.out_dir.c_str());
    } else if (skel->parsed()) {
      DatasetManifest m = make_manifest(a);
      run_skeletons(m, task_by_name(a.task));
      std::printf("labeled datasets written under %s/data\n",
                  m.out_dir.c_str());
    } else if (tr->parsed()) {
      DatasetManifest m = make_manifest(a);
      std::string name =
          targs.model_name.empty() ? a.task : targs.model_name;
      TrainReport rep = run_train(m, a.task, make_train_spec(targs), name);
      if (!rep.epochs.empty()) {
        const EpochRecord& last = rep.epochs.back();
        std::printf("trained %s: final val loss %.4f acc %.4f\n", name.c_str(),
                    last.val_loss, last.val_acc);
      }
    } else if (ev->parsed()) {
      DatasetManifest m = make_manifest(a);
      EvalSpec es;
      es.scorers = split_csv_list(scorers);
      es.model_path = model_path;
      es.planner.k = planner_k;
      es.planner.timeout = timeout;
      es.planner.pseudocode_rule = pseudocode_rule;
      es.planner.budget = m.label_budget;
      es.planner.search = m.search;
      es.n_problems = n_problems;
      es.svg = svg;
      std::vector<EvalSummaryRow> rows = run_eval(m, task_by_name(a.task), es);
      int runs = 0, timeouts = 0;
      for (const auto& r : rows) {
        runs += r.runs;
        timeouts += r.timeouts;
        std::printf("%-10s solved %d/%d  mean fp %.3f\n", r.scorer.c_str(),
                    r.solved, r.runs, r.mean_fp);
      }
      if (2 * timeouts > runs) {
        std::fprintf(stderr, "timeout-dominated run: %d of %d runs timed out\n",
                     timeouts, runs);
        return 3;
      }
    } else if (loo->parsed()) {
      DatasetManifest m = make_manifest(a);
      LooReport rep =
          run_loo(m, task_by_name(a.task), variant, make_train_spec(largs));
      std::printf("variant %d: seen acc %.4f (%d), unseen acc %.4f (%d), "
                  "audit %s\n",
                  rep.variant, rep.seen_accuracy, rep.seen_count,
                  rep.unseen_accuracy, rep.unseen_count,
                  rep.audit_clean ? "clean" : "LEAKED");
    } else if (val->parsed()) {
      ValidationReport rep =
          validate_solution_file(problem_path, solution_path);
      if (rep.ok) {
        std::printf("valid\n");
      } else {
        std::printf("invalid at step %d: %s\n", rep.step,
                    rep.constraint.c_str());
        return 2;
      }
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
