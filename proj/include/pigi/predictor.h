#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pigi/model.h"
#include "pigi/rng.h"

namespace pigi {

// Feasibility model over (init, plan, goal): tokenizer, fused element
// embeddings, masked pre-norm transformer encoder, sigmoid readout.

constexpr int kValueFeatureWidth = 15;   // 5 kind one-hot + 3+3+3+1 slots
constexpr int kObjectFeatureWidth = 17;  // 6 category + 2 dims + 8 color + 1

enum class DropValues { None, All, Poses, Angles };

struct PredictorConfig {
  int d = 32;
  int layers = 2;
  int heads = 2;
  int ff = 64;
  int max_seq = 32;
  // Input ablations; they change tokenization and name embedding and are
  // saved with the model so a loaded model scores inputs the same way.
  bool one_hot_names = false;
  bool drop_object_features = false;
  DropValues drop_values = DropValues::None;
  bool drop_init = false;
};

// Fixed name vocabulary: the 12 predicate names, then the 5 action names.
const std::vector<std::string>& name_vocab();
int name_index(const std::string& name);  // -1 when absent

std::array<double, kObjectFeatureWidth> object_feature(const Problem& p,
                                                       ObjId o);
std::array<double, kValueFeatureWidth> value_feature(const Value& v);

struct Token {
  enum class Kind { Action, Goal, Init };
  Kind kind = Kind::Action;
  int name = -1;  // vocab index
  std::vector<std::array<double, kObjectFeatureWidth>> objects;
  std::vector<std::array<double, kValueFeatureWidth>> values;
  int position = 0;  // action index; unused for goal/init
};

struct TokenSeq {
  std::vector<Token> tokens;  // actions, then goal, then kept init
  int n_action = 0, n_goal = 0, n_init = 0;
  std::vector<uint8_t> mask;  // n*n row-major; mask[q*n + k] = may attend

  int n() const { return static_cast<int>(tokens.size()); }
  bool attends(int q, int k) const { return mask[q * n() + k] != 0; }
};

class TokenOverflowError : public std::runtime_error {
 public:
  explicit TokenOverflowError(const std::string& m) : std::runtime_error(m) {}
};

// Actions, then goal literals, then init literals. When the sequence
// exceeds cfg.max_seq the init literals are shuffled, the overflow is
// dropped, and the kept ones are re-sorted canonically so literal order
// in the problem never affects the output. Throws TokenOverflowError
// only when actions + goal alone exceed cfg.max_seq.
TokenSeq tokenize(const Problem& p, const StrippedPlan& plan,
                  const PredictorConfig& cfg, Rng& rng);

struct ParamBlock {
  std::string name;
  int rows = 0, cols = 0;
  long offset = 0;
  long size() const { return static_cast<long>(rows) * cols; }
};

struct Model {
  PredictorConfig cfg;
  std::vector<ParamBlock> blocks;
  std::vector<double> params;  // all blocks, flat

  long parameter_count() const { return static_cast<long>(params.size()); }
  int block_index(const std::string& name) const;  // -1 when absent
  double* block(const std::string& name);
  const double* block(const std::string& name) const;
};

// Zero-initialized model (readout of the zero model is exactly 0.5).
Model make_model(const PredictorConfig& cfg);
// Small random init: weights ~0.1*normal, relu biases 0.5 so units start
// active, layer-norm gains 1.
void init_params(Model& m, uint64_t seed);

// Mean of the element embeddings plus the positional term: learned
// pe_init shared by all init tokens, learned pe_goal, sinusoidal by
// action index.
std::vector<double> embed_name(const Model& m, int vocab_index);
std::vector<double> embed_object(const Model& m,
                                 const std::array<double, kObjectFeatureWidth>& f);
std::vector<double> embed_value(const Model& m,
                                const std::array<double, kValueFeatureWidth>& f);
std::vector<double> positional_term(const Model& m, Token::Kind kind,
                                    int position);
std::vector<double> fuse_token(const Model& m, const Token& t);

// Probability the plan is feasible. The first token must be an action.
double forward(const Model& m, const TokenSeq& seq);

struct Example {
  TokenSeq seq;
  double label = 0.0;  // 0 or 1
};

class NonFiniteLossError : public std::runtime_error {
 public:
  explicit NonFiniteLossError(const std::string& m) : std::runtime_error(m) {}
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& m) : std::runtime_error(m) {}
};

// Mean binary cross entropy over the batch plus its gradient for every
// parameter (reverse mode through attention, feed-forward, layer norms,
// embeddings, and positional terms). Throws NonFiniteLossError when the
// loss is not finite.
double loss_and_gradients(const Model& m,
                          const std::vector<const Example*>& batch,
                          std::vector<double>& grad);
// Same result computed with an OpenMP loop over examples; per-example
// contributions are reduced in index order, so this is bitwise identical
// to the serial version.
double loss_and_gradients_parallel(const Model& m,
                                   const std::vector<const Example*>& batch,
                                   std::vector<double>& grad);

// Forward over many sequences; serial reference and OpenMP variant are
// bitwise identical.
std::vector<double> forward_batch_serial(const Model& m,
                                         const std::vector<TokenSeq>& seqs);
std::vector<double> forward_batch(const Model& m,
                                  const std::vector<TokenSeq>& seqs);

struct TrainOptions {
  double lr = 1e-3;
  int batch_size = 32;
  int epochs = 100;
  bool parallel = true;
};

struct EpochRecord {
  double train_loss = 0, train_acc = 0;
  double val_loss = 0, val_acc = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;  // one entry per optimizer step
};

// Adaptive-moment minibatch descent. Deterministic given the seed (batch
// shuffle included). A step whose loss is non-finite is skipped without
// updating; three such steps in a row raise DivergenceError. Requires a
// nonempty training set containing both labels.
TrainReport train(Model& m, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set,
                  const TrainOptions& opt, uint64_t seed);

class ModelVersionError : public std::runtime_error {
 public:
  explicit ModelVersionError(const std::string& m) : std::runtime_error(m) {}
};

class ModelFormatError : public std::runtime_error {
 public:
  explicit ModelFormatError(const std::string& m) : std::runtime_error(m) {}
};

// Versioned binary: magic "PIGI", version u16, config, vocabulary, shape
// manifest, then every parameter as little-endian f64. load verifies the
// manifest against the config and the vocabulary against name_vocab().
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace pigi
