#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctree/autodiff.hpp"
#include "ctree/corpus.hpp"
#include "ctree/model.hpp"

namespace ctree {

struct TrainConfig {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  // Stop after this many optimizer steps even mid-epoch.
  std::optional<std::size_t> max_steps;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
  // Dropout rate during training steps (0 = off). Masks are seeded from
  // (seed, step, position in batch), so runs stay reproducible.
  double dropout = 0.0;
  // The learning rate falls linearly from learning_rate to
  // learning_rate * final_lr_scale over the planned steps (1 = constant).
  double final_lr_scale = 1.0;
  // Evaluate every this many epochs (the last epoch is always evaluated).
  std::size_t eval_every = 1;
  // Worker threads for per-example forward/backward; results do not depend
  // on this value.
  std::size_t jobs = 1;
  // Also decode the training split for accuracy at evaluation time.
  bool train_accuracy = true;
  // Called with every training example's NLL as computed for the gradient;
  // tests use it to compare against brute-force enumeration.
  std::function<void(const Model&, const Example&, double nll)> nll_probe;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;
  double nll = 0.0;            // mean negative log-likelihood per example
  double nll_per_token = 0.0;  // total NLL / total target tokens
  std::optional<double> accuracy;
};

// "epoch=3 split=train nll=1.25 nll_per_token=0.125 accuracy=0.98"; accuracy
// is "-" when not computed. Doubles print with 17 significant digits.
std::string format_metrics(const EpochMetrics& m);
EpochMetrics parse_metrics(const std::string& line);

struct TrainResult {
  std::vector<EpochMetrics> log;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_nll = 0.0;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const ad::ParameterSet& params, const TrainConfig& config);
  // lr_scale multiplies the configured learning rate for this step only.
  void step(ad::ParameterSet& params, const ad::Gradients& grads, double lr_scale = 1.0);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  ad::Gradients m_, v_;
};

// Scales gradients in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_gradients(ad::Gradients& grads, double max_norm);

// Mean NLL of the examples and its gradient (mean over examples). Per-example
// gradients are reduced in example order, so the result is independent of
// `jobs`.
double batch_gradient(const Model& model, std::span<const Example* const> batch,
                      ad::Gradients& out, std::size_t jobs = 1);

struct LikelihoodSummary {
  double total_nll = 0.0;
  std::size_t examples = 0;
  std::size_t tokens = 0;
  double mean_nll() const { return examples ? total_nll / examples : 0.0; }
  double per_token() const { return tokens ? total_nll / tokens : 0.0; }
};

LikelihoodSummary corpus_likelihood(const Model& model, const Corpus& corpus,
                                    std::size_t jobs = 1);

enum class AccuracyMode { kFullSequence, kFirstWord };

// Decodes every source with joint decoding and compares with the target.
// Throws ConfigError when the corpus vocabularies differ from the ones the
// model was trained with.
double evaluate(const Model& model, const Corpus& corpus, AccuracyMode mode,
                std::size_t jobs = 1);

// Throws ConfigError if the corpus was encoded with other vocabularies.
void check_vocabularies(const Model& model, const Corpus& corpus);

using ImprovedCallback = std::function<void(const Model&, const EpochMetrics&)>;

// Maximum-likelihood training with Adam. Each metrics record is written to
// `metrics` (if given) as one line. On return the model holds the parameters
// of the best evaluation (eval split if given, otherwise train).
TrainResult train(Model& model, const Corpus& train_set, const Corpus* eval_set,
                  const TrainConfig& config, std::ostream* metrics = nullptr,
                  const ImprovedCallback& on_improved = {});

// Runs fn(i) for i in [0, count) on up to `jobs` threads.
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace ctree
