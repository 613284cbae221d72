#include "pigi/planner.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "pigi/problem_io.h"
#include "pigi/rng.h"

namespace pigi {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Attempt order within one scored batch.
struct AttemptKey {
  double score;
  size_t length;
  int discovery;
};

bool attempt_before(const AttemptKey& a, const AttemptKey& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.length != b.length) return a.length < b.length;
  return a.discovery < b.discovery;
}

}  // namespace

std::string Scorer::name() const {
  switch (kind) {
    case ScorerKind::Constant1: return "baseline";
    case ScorerKind::LengthAscending: return "length";
    case ScorerKind::Learned: return "pigi";
    case ScorerKind::LearnedBinary: return "pigi01";
    case ScorerKind::Oracle: return "oracle";
  }
  return "unknown";
}

Scorer Scorer::constant1() { return Scorer{}; }

Scorer Scorer::length_ascending() {
  Scorer s;
  s.kind = ScorerKind::LengthAscending;
  return s;
}

Scorer Scorer::learned(std::shared_ptr<const Model> m) {
  if (!m) throw std::invalid_argument("learned scorer needs a model");
  Scorer s;
  s.kind = ScorerKind::Learned;
  s.model = std::move(m);
  return s;
}

Scorer Scorer::learned_binary(std::shared_ptr<const Model> m,
                              double threshold) {
  if (!m) throw std::invalid_argument("learned scorer needs a model");
  Scorer s;
  s.kind = ScorerKind::LearnedBinary;
  s.model = std::move(m);
  s.threshold = threshold;
  return s;
}

Scorer Scorer::oracle(Skeleton logged_feasible) {
  Scorer s;
  s.kind = ScorerKind::Oracle;
  s.oracle_plan = std::move(logged_feasible);
  return s;
}

std::vector<double> score_batch(const Scorer& s, const Problem& p,
                                const std::vector<Skeleton>& skeletons,
                                uint64_t seed, bool parallel) {
  std::vector<double> out(skeletons.size(), 1.0);
  switch (s.kind) {
    case ScorerKind::Constant1:
      return out;
    case ScorerKind::LengthAscending:
      for (size_t i = 0; i < skeletons.size(); ++i)
        out[i] = 1.0 / (1.0 + static_cast<double>(skeletons[i].steps.size()));
      return out;
    case ScorerKind::Oracle: {
      if (!s.oracle_plan)
        throw std::invalid_argument("oracle scorer needs a logged skeleton");
      for (size_t i = 0; i < skeletons.size(); ++i)
        out[i] = (skeletons[i] == *s.oracle_plan) ? 1.0 : 0.0;
      return out;
    }
    case ScorerKind::Learned:
    case ScorerKind::LearnedBinary: {
      if (!s.model) throw std::invalid_argument("scorer has no model");
      std::vector<TokenSeq> seqs;
      seqs.reserve(skeletons.size());
      for (size_t i = 0; i < skeletons.size(); ++i) {
        Rng rng = Rng::stream(seed, 0x746f6b656eull, i);
        seqs.push_back(
            tokenize(p, strip_continuous(skeletons[i]), s.model->cfg, rng));
      }
      out = parallel ? forward_batch(*s.model, seqs)
                     : forward_batch_serial(*s.model, seqs);
      if (s.kind == ScorerKind::LearnedBinary)
        for (double& v : out) v = (v >= s.threshold) ? 1.0 : 0.0;
      return out;
    }
  }
  return out;
}

uint64_t refinement_seed(uint64_t run_seed, const Problem& p,
                         const Skeleton& skel) {
  uint64_t hp = fnv1a(p.name);
  uint64_t hs = fnv1a(serialize_skeleton(skel, p.objects));
  return Rng::stream(run_seed, 0x726566696e65ull, hp, hs).next_u64();
}

PlannerResult batch_sorted_tamp(const Problem& p, const Scorer& scorer,
                                const PlannerOptions& opt, uint64_t seed) {
  if (opt.k <= 0) throw std::invalid_argument("k must be positive");
  if (!(opt.timeout > 0)) throw std::invalid_argument("timeout must be positive");

  auto t0 = Clock::now();
  PlannerResult res;
  res.record.problem = p.name;
  res.record.scorer = scorer.name();

  BatchSession session;
  session.options = opt.search;

  int batch_index = 0;
  while (true) {
    if (elapsed_s(t0) >= opt.timeout) {
      res.failure = PlannerFailure::Timeout;
      break;
    }
    std::vector<Skeleton> batch = batch_skeletons(session, p, opt.k);
    if (batch.empty()) {
      res.failure = PlannerFailure::NoSkeletons;
      break;
    }
    res.record.batches = ++batch_index;

    uint64_t score_seed =
        Rng::stream(seed, 0x73636f7265ull, static_cast<uint64_t>(batch_index))
            .next_u64();
    std::vector<double> scores =
        score_batch(scorer, p, batch, score_seed, opt.parallel_scoring);
    res.record.scores.push_back(scores);

    // Select the attempt set. Prose rule: drop scores below 0.5 unless the
    // whole batch is below, then keep it all. Pseudocode rule: keep scores
    // above zero, no exception. Oracle: only the logged skeleton, ever.
    std::vector<int> keep;
    if (scorer.kind == ScorerKind::Oracle) {
      for (size_t i = 0; i < batch.size(); ++i)
        if (scores[i] >= 0.5) keep.push_back(static_cast<int>(i));
    } else if (opt.pseudocode_rule) {
      for (size_t i = 0; i < batch.size(); ++i)
        if (scores[i] > 0.0) keep.push_back(static_cast<int>(i));
    } else {
      for (size_t i = 0; i < batch.size(); ++i)
        if (scores[i] >= 0.5) keep.push_back(static_cast<int>(i));
      if (keep.empty())
        for (size_t i = 0; i < batch.size(); ++i)
          keep.push_back(static_cast<int>(i));
    }

    std::stable_sort(keep.begin(), keep.end(), [&](int a, int b) {
      return attempt_before(
          AttemptKey{scores[a], batch[a].steps.size(), a},
          AttemptKey{scores[b], batch[b].steps.size(), b});
    });

    bool timed_out = false;
    for (int i : keep) {
      double left = opt.timeout - elapsed_s(t0);
      if (left <= 0) {
        timed_out = true;
        break;
      }
      RefinementBudget budget = opt.budget;
      budget.wall_clock = std::min(budget.wall_clock, left);
      uint64_t rseed = refinement_seed(seed, p, batch[i]);
      RefinementResult rr = sample_plan(batch[i], p, budget, rseed);
      ++res.record.attempts;
      if (rr.bound) {
        ValidationReport vr = validate_solution(*rr.solution, p);
        if (!vr.ok)
          throw std::logic_error("refinement returned an invalid solution: " +
                                 vr.constraint);
        res.solution = std::move(rr.solution);
        res.record.solved = true;
        res.failure = PlannerFailure::None;
        break;
      }
      ++res.record.false_positives;
    }
    if (res.record.solved) break;
    if (timed_out) {
      res.failure = PlannerFailure::Timeout;
      break;
    }
  }

  res.record.seconds = elapsed_s(t0);
  return res;
}

std::string planner_record_json(const PlannerRunRecord& r) {
  nlohmann::json j;
  j["problem"] = r.problem;
  j["scorer"] = r.scorer;
  j["solved"] = r.solved;
  j["seconds"] = r.seconds;
  j["batches"] = r.batches;
  j["attempts"] = r.attempts;
  j["false_positives"] = r.false_positives;
  j["scores"] = r.scores;
  return j.dump();
}

}  // namespace pigi
