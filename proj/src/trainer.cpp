#include "ctree/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "ctree/decoder.hpp"
#include "ctree/error.hpp"

namespace ctree {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(name) + " must be positive");
    }
  };
  positive(learning_rate, "learning_rate");
  positive(epsilon, "epsilon");
  positive(clip_norm, "clip_norm");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (jobs == 0) throw ConfigError("jobs must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(final_lr_scale >= 0.0 && final_lr_scale <= 1.0)) {
    throw ConfigError("final_lr_scale must be in [0, 1]");
  }
  if (max_steps && *max_steps == 0) throw ConfigError("max_steps must be positive");
}

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

double parse_double(const std::string& text, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("metrics field '" + key + "' is not a number: " + text);
  }
}

}  // namespace

std::string format_metrics(const EpochMetrics& m) {
  std::string line = "epoch=" + std::to_string(m.epoch) + " split=" + m.split +
                     " nll=" + format_double(m.nll) +
                     " nll_per_token=" + format_double(m.nll_per_token) +
                     " accuracy=";
  line += m.accuracy ? format_double(*m.accuracy) : "-";
  return line;
}

EpochMetrics parse_metrics(const std::string& line) {
  EpochMetrics m;
  std::istringstream in(line);
  std::string field;
  bool seen_epoch = false, seen_split = false;
  while (in >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("malformed metrics field '" + field + "'");
    }
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "epoch") {
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(),
                                       m.epoch);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("bad epoch '" + value + "'");
      }
      seen_epoch = true;
    } else if (key == "split") {
      m.split = value;
      seen_split = true;
    } else if (key == "nll") {
      m.nll = parse_double(value, key);
    } else if (key == "nll_per_token") {
      m.nll_per_token = parse_double(value, key);
    } else if (key == "accuracy") {
      if (value != "-") m.accuracy = parse_double(value, key);
    }
    // Unknown keys are ignored so the format can grow.
  }
  if (!seen_epoch || !seen_split) {
    throw ConfigError("metrics line lacks epoch or split: " + line);
  }
  return m;
}

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(jobs - 1);
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

AdamOptimizer::AdamOptimizer(const ad::ParameterSet& params,
                             const TrainConfig& config)
    : lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.epsilon),
      m_(ad::zero_gradients(params)),
      v_(ad::zero_gradients(params)) {}

void AdamOptimizer::step(ad::ParameterSet& params, const ad::Gradients& grads,
                         double lr_scale) {
  ++t_;
  const double lr = lr_ * lr_scale;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& values = params[p].values;
    auto& m = m_[p];
    auto& v = v_[p];
    const auto& g = grads[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

double clip_gradients(ad::Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double x : g) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& g : grads) {
      for (double& x : g) x *= scale;
    }
  }
  return norm;
}

namespace {

double example_gradient(const Model& model, const Example& e,
                        ad::Gradients& out, Dropout dropout) {
  ad::Tape tape;
  ad::Var loss = model.nll(tape, e.source, e.target, dropout);
  const double value = loss.scalar();
  if (!std::isfinite(value)) {
    throw DomainError("line " + std::to_string(e.line) +
                      ": target has zero probability under the model");
  }
  tape.backward(loss);
  tape.accumulate_gradients(out);
  return value;
}

// Mask seed for one example of one step.
std::uint64_t dropout_seed(std::uint64_t seed, std::size_t step, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(i)};
  std::uint64_t out[1];
  seq.generate(reinterpret_cast<std::uint32_t*>(out), reinterpret_cast<std::uint32_t*>(out + 1));
  return out[0];
}

// Per-example NLL and gradients, computed in parallel and summed in order.
double gradient_sum(const Model& model, std::span<const Example* const> batch,
                    ad::Gradients& out, std::size_t jobs,
                    std::vector<double>* losses, double dropout_rate = 0.0,
                    std::uint64_t seed = 0, std::size_t step = 0) {
  std::vector<ad::Gradients> per(batch.size());
  std::vector<double> nll(batch.size(), 0.0);
  parallel_for(batch.size(), jobs, [&](std::size_t i) {
    per[i] = ad::zero_gradients(model.params());
    Dropout dropout;
    if (dropout_rate > 0.0) dropout = {dropout_rate, dropout_seed(seed, step, i)};
    nll[i] = example_gradient(model, *batch[i], per[i], dropout);
  });
  out = ad::zero_gradients(model.params());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += nll[i];
    for (std::size_t p = 0; p < out.size(); ++p) {
      for (std::size_t k = 0; k < out[p].size(); ++k) out[p][k] += per[i][p][k];
    }
  }
  if (losses) *losses = std::move(nll);
  return total;
}

}  // namespace

double batch_gradient(const Model& model, std::span<const Example* const> batch,
                      ad::Gradients& out, std::size_t jobs) {
  if (batch.empty()) throw DomainError("empty batch");
  const double total = gradient_sum(model, batch, out, jobs, nullptr);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : out) {
    for (double& x : g) x *= inv;
  }
  return total * inv;
}

void check_vocabularies(const Model& model, const Corpus& corpus) {
  const auto& cfg = model.config();
  if (corpus.source_vocab.size() != cfg.source_vocab ||
      corpus.target_vocab.size() != cfg.target_vocab) {
    throw ConfigError("corpus vocabulary sizes (" +
                      std::to_string(corpus.source_vocab.size()) + ", " +
                      std::to_string(corpus.target_vocab.size()) +
                      ") do not match the model (" +
                      std::to_string(cfg.source_vocab) + ", " +
                      std::to_string(cfg.target_vocab) + ")");
  }
  if (cfg.source_vocab_checksum != 0 &&
      corpus.source_vocab.checksum() != cfg.source_vocab_checksum) {
    throw ConfigError("source vocabulary differs from the one the model was trained with");
  }
  if (cfg.target_vocab_checksum != 0 &&
      corpus.target_vocab.checksum() != cfg.target_vocab_checksum) {
    throw ConfigError("target vocabulary differs from the one the model was trained with");
  }
}

LikelihoodSummary corpus_likelihood(const Model& model, const Corpus& corpus,
                                    std::size_t jobs) {
  check_vocabularies(model, corpus);
  check_target_lengths(corpus, model.config().depth);
  std::vector<double> nll(corpus.examples.size(), 0.0);
  parallel_for(corpus.examples.size(), jobs, [&](std::size_t i) {
    const auto& e = corpus.examples[i];
    ad::Tape tape;
    nll[i] = model.nll(tape, e.source, e.target).scalar();
  });
  LikelihoodSummary s;
  for (std::size_t i = 0; i < nll.size(); ++i) {
    s.total_nll += nll[i];
    s.tokens += corpus.examples[i].target.size();
  }
  s.examples = nll.size();
  return s;
}

double evaluate(const Model& model, const Corpus& corpus, AccuracyMode mode,
                std::size_t jobs) {
  check_vocabularies(model, corpus);
  if (corpus.examples.empty()) return 0.0;
  std::vector<char> correct(corpus.examples.size(), 0);
  parallel_for(corpus.examples.size(), jobs, [&](std::size_t i) {
    const auto& e = corpus.examples[i];
    const Prediction pred = model.predict(e.source);
    const DecodeResult out = decode_joint(pred.field, pred.token_log_probs);
    if (mode == AccuracyMode::kFullSequence) {
      correct[i] = out.tokens == e.target;
    } else {
      correct[i] = !out.tokens.empty() && !e.target.empty() &&
                   out.tokens.front() == e.target.front();
    }
  });
  const auto hits = std::count(correct.begin(), correct.end(), char{1});
  return static_cast<double>(hits) / static_cast<double>(correct.size());
}

TrainResult train(Model& model, const Corpus& train_set, const Corpus* eval_set,
                  const TrainConfig& config, std::ostream* metrics,
                  const ImprovedCallback& on_improved) {
  config.validate();
  if (train_set.examples.empty()) throw ConfigError("training corpus is empty");
  check_vocabularies(model, train_set);
  check_target_lengths(train_set, model.config().depth);
  if (eval_set) {
    check_vocabularies(model, *eval_set);
    check_target_lengths(*eval_set, model.config().depth);
  }

  TrainResult result;
  result.best_nll = std::numeric_limits<double>::infinity();
  AdamOptimizer adam(model.params(), config);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<double>> best_values;
  const std::size_t per_epoch =
      (order.size() + config.batch_size - 1) / config.batch_size;
  std::size_t planned = per_epoch * config.epochs;
  if (config.max_steps) planned = std::min(planned, *config.max_steps);
  auto lr_scale = [&](std::size_t step) {
    if (planned <= 1) return 1.0;
    const double t = static_cast<double>(step) / static_cast<double>(planned - 1);
    return 1.0 + (config.final_lr_scale - 1.0) * t;
  };

  auto emit = [&](const EpochMetrics& m) {
    result.log.push_back(m);
    if (metrics) *metrics << format_metrics(m) << '\n' << std::flush;
  };

  bool stop = false;
  for (std::size_t epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_nll = 0.0;
    std::size_t seen = 0, seen_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const Example*> batch;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&train_set.examples[order[i]]);
      }
      ad::Gradients grads;
      std::vector<double> losses;
      const double total = gradient_sum(model, batch, grads, config.jobs, &losses,
                                        config.dropout, config.seed, result.steps);
      if (config.nll_probe) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
          config.nll_probe(model, *batch[i], losses[i]);
        }
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (auto& g : grads) {
        for (double& x : g) x *= inv;
      }
      clip_gradients(grads, config.clip_norm);
      adam.step(model.params(), grads, lr_scale(result.steps));
      ++result.steps;
      epoch_nll += total;
      seen += batch.size();
      for (const auto* e : batch) seen_tokens += e->target.size();
      if (config.max_steps && result.steps >= *config.max_steps) {
        stop = true;
        break;
      }
    }

    const bool last = stop || epoch == config.epochs;
    const bool evaluate_now = last || epoch % config.eval_every == 0;

    EpochMetrics train_m;
    train_m.epoch = epoch;
    train_m.split = "train";
    train_m.nll = epoch_nll / static_cast<double>(seen);
    train_m.nll_per_token = epoch_nll / static_cast<double>(seen_tokens);
    if (evaluate_now && config.train_accuracy) {
      train_m.accuracy =
          evaluate(model, train_set, AccuracyMode::kFullSequence, config.jobs);
    }
    emit(train_m);

    double selection = train_m.nll;
    const EpochMetrics* selected = &result.log.back();
    if (eval_set && evaluate_now) {
      EpochMetrics eval_m;
      eval_m.epoch = epoch;
      eval_m.split = "eval";
      const auto summary = corpus_likelihood(model, *eval_set, config.jobs);
      eval_m.nll = summary.mean_nll();
      eval_m.nll_per_token = summary.per_token();
      eval_m.accuracy =
          evaluate(model, *eval_set, AccuracyMode::kFullSequence, config.jobs);
      emit(eval_m);
      selection = eval_m.nll;
      selected = &result.log.back();
    } else if (eval_set) {
      continue;  // selection only happens on evaluated epochs
    }

    if (selection < result.best_nll) {
      result.best_nll = selection;
      result.best_epoch = epoch;
      best_values.clear();
      for (const auto& p : model.params()) best_values.push_back(p.values);
      if (on_improved) on_improved(model, *selected);
    }
  }

  if (!best_values.empty()) {
    for (std::size_t p = 0; p < model.params().size(); ++p) {
      model.params()[p].values = best_values[p];
    }
  }
  return result;
}

}  // namespace ctree
