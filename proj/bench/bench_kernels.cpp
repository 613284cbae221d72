// Serial vs OpenMP timing for the batch kernels: predictor forward,
// gradient accumulation, and occupancy-grid construction. Prints one line
// per kernel so regressions show up in CI logs.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "pigi/geometry.h"
#include "pigi/harness.h"
#include "pigi/predictor.h"
#include "pigi/problem_io.h"
#include "pigi/rng.h"

using namespace pigi;

namespace {

double time_of(const std::function<void()>& fn, int reps) {
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-24s serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
              name, serial * 1e3, parallel * 1e3, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());

  Rng rng(7);
  const TaskSpec& spec = task_by_name("two_container_in");
  GeneratedProblem gp = generate_problem(spec, rng);
  gp.problem.name = "bench";

  PredictorConfig cfg;
  Model model = make_model(cfg);
  init_params(model, 3);

  // A synthetic batch: one plausible plan shape, tokenized repeatedly.
  StrippedPlan plan;
  plan.push_back(StrippedAction{"move", {}});
  plan.push_back(StrippedAction{"pick", {gp.problem.of_category(
                                             ObjectCategory::Item)[0]}});
  std::vector<Example> batch;
  for (int i = 0; i < 256; ++i) {
    Rng trng = Rng::stream(7, 0x62656e6368ull, i);
    Example ex;
    ex.seq = tokenize(gp.problem, plan, cfg, trng);
    ex.label = i % 2;
    batch.push_back(std::move(ex));
  }
  std::vector<TokenSeq> seqs;
  for (const auto& e : batch) seqs.push_back(e.seq);
  std::vector<const Example*> ptrs;
  for (const auto& e : batch) ptrs.push_back(&e);

  report("forward_batch",
         time_of([&] { forward_batch_serial(model, seqs); }, 5),
         time_of([&] { forward_batch(model, seqs); }, 5));

  std::vector<double> grad(model.parameter_count());
  report("loss_and_gradients",
         time_of([&] { loss_and_gradients(model, ptrs, grad); }, 5),
         time_of([&] { loss_and_gradients_parallel(model, ptrs, grad); }, 5));

  SceneState sc = initial_scene(gp.problem);
  report("build_occupancy",
         time_of(
             [&] { build_occupancy_serial(*gp.problem.world, sc, std::nullopt); },
             5),
         time_of([&] { build_occupancy(*gp.problem.world, sc, std::nullopt); },
                 5));
  return 0;
}
