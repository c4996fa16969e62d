#include "ctree/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "ctree/checkpoint.hpp"
#include "ctree/corpus.hpp"
#include "ctree/datasets.hpp"
#include "ctree/decoder.hpp"
#include "ctree/error.hpp"
#include "ctree/model.hpp"
#include "ctree/trainer.hpp"
#include "ctree/verify.hpp"

namespace fs = std::filesystem;

namespace ctree::cli {

namespace {

std::string format_score(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t default_jobs() {
  return std::max(1u, std::thread::hardware_concurrency());
}

// Plain "key=value" config files name the options of the subcommand being
// run; CLI11 would otherwise look for them on the top-level app.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  explicit SubcommandConfig(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    for (auto& item : items) {
      if (item.parents.empty() && !subcommand_.empty()) item.parents = {subcommand_};
    }
    return items;
  }

 private:
  std::string subcommand_;
};

struct ModelFiles {
  std::string dir;
  std::string source_vocab;  // overrides dir/src.vocab
  std::string target_vocab;  // overrides dir/tgt.vocab
};

struct LoadedModel {
  Model model;
  Vocabulary source;
  Vocabulary target;
};

LoadedModel load_model(const ModelFiles& files) {
  const fs::path dir(files.dir);
  fs::path ckpt = dir;
  if (fs::is_directory(dir)) ckpt = dir / "model.ckpt";
  const fs::path base = fs::is_directory(dir) ? dir : dir.parent_path();
  const fs::path src = files.source_vocab.empty() ? base / "src.vocab"
                                                  : fs::path(files.source_vocab);
  const fs::path tgt = files.target_vocab.empty() ? base / "tgt.vocab"
                                                  : fs::path(files.target_vocab);
  LoadedModel lm{load_checkpoint(ckpt), Vocabulary::load(src), Vocabulary::load(tgt)};
  Corpus probe;
  probe.source_vocab = lm.source;
  probe.target_vocab = lm.target;
  check_vocabularies(lm.model, probe);
  return lm;
}

std::vector<std::string> read_lines(const std::string& path, std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  if (path.empty() || path == "-") {
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
  }
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open '" + path + "'");
  while (std::getline(file, line)) lines.push_back(line);
  return lines;
}

std::vector<TokenId> encode(const Vocabulary& v, const std::vector<std::string>& tokens) {
  std::vector<TokenId> ids;
  for (const auto& t : tokens) ids.push_back(v.id(t));
  return ids;
}

void add_model_options(CLI::App* sub, ModelFiles& files) {
  sub->add_option("--model", files.dir,
                  "Model directory written by train (or a checkpoint file)")
      ->required();
  sub->add_option("--src-vocab", files.source_vocab, "Source vocabulary file");
  sub->add_option("--tgt-vocab", files.target_vocab, "Target vocabulary file");
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string train_path, eval_path, out_dir;
  ModelConfig model;
  TrainConfig train;
  std::string emission = "mlp", context = "mean_mlp";
  std::size_t max_steps = 0;
  bool no_train_accuracy = false;
};

int do_train(const TrainArgs& a, bool verbose, std::ostream& out) {
  auto train_rows = read_raw_examples(fs::path(a.train_path));
  Corpus train_set = build_corpus(train_rows);
  std::optional<Corpus> eval_set;
  if (!a.eval_path.empty()) {
    eval_set = encode_corpus(read_raw_examples(fs::path(a.eval_path)),
                             train_set.source_vocab, train_set.target_vocab);
  }
  ModelConfig mc = a.model;
  mc.emission = parse_emission_mode(a.emission);
  mc.context = parse_context_mode(a.context);
  mc.source_vocab = train_set.source_vocab.size();
  mc.target_vocab = train_set.target_vocab.size();
  mc.source_vocab_checksum = train_set.source_vocab.checksum();
  mc.target_vocab_checksum = train_set.target_vocab.checksum();
  if (mc.context == ContextMode::kPositional || mc.context == ContextMode::kAttention) {
    std::size_t longest = 0;
    for (const auto& e : train_set.examples) longest = std::max(longest, e.source.size());
    if (eval_set) {
      for (const auto& e : eval_set->examples) longest = std::max(longest, e.source.size());
    }
    if (longest > mc.max_source_len) {
      throw ConfigError("longest source has " + std::to_string(longest) +
                        " tokens; raise --max-source-len");
    }
  }
  TrainConfig tc = a.train;
  if (a.max_steps > 0) tc.max_steps = a.max_steps;
  tc.train_accuracy = !a.no_train_accuracy;

  Model model(mc);
  check_target_lengths(train_set, mc.depth);
  if (eval_set) check_target_lengths(*eval_set, mc.depth);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  train_set.source_vocab.save(dir / "src.vocab");
  train_set.target_vocab.save(dir / "tgt.vocab");
  std::ofstream log(dir / "metrics.log", std::ios::trunc);
  if (!log) throw ConfigError("cannot write " + (dir / "metrics.log").string());

  struct Tee : std::streambuf {
    std::ostream* a;
    std::ostream* b;
    int overflow(int c) override {
      if (c == EOF) return !EOF;
      a->put(static_cast<char>(c));
      if (b) b->put(static_cast<char>(c));
      if (c == '\n') {
        a->flush();
        if (b) b->flush();
      }
      return c;
    }
  } tee;
  tee.a = &log;
  tee.b = verbose ? &out : nullptr;
  std::ostream metrics(&tee);

  const auto result =
      train(model, train_set, eval_set ? &*eval_set : nullptr, tc, &metrics,
            [&](const Model& m, const EpochMetrics&) {
              save_checkpoint(m, dir / "model.ckpt");
            });
  save_checkpoint(model, dir / "model.ckpt");
  out << "steps=" << result.steps << " best_epoch=" << result.best_epoch
      << " best_nll=" << format_score(result.best_nll) << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

int do_eval(const ModelFiles& files, const std::string& data, const std::string& mode,
            std::size_t jobs, std::ostream& out) {
  auto lm = load_model(files);
  auto rows = read_raw_examples(fs::path(data));
  Corpus corpus = encode_corpus(rows, lm.source, lm.target);
  std::size_t known = 0;
  for (const auto& e : corpus.examples) {
    known += static_cast<std::size_t>(
        std::count_if(e.target.begin(), e.target.end(), [](TokenId t) { return t != 0; }));
  }
  if (!corpus.examples.empty() && known == 0) {
    throw ConfigError("no target token of '" + data +
                      "' is in the model's vocabulary");
  }
  check_target_lengths(corpus, lm.model.config().depth);
  const auto summary = corpus_likelihood(lm.model, corpus, jobs);
  const auto m = mode == "first_word" ? AccuracyMode::kFirstWord
                                      : AccuracyMode::kFullSequence;
  const double acc = evaluate(lm.model, corpus, m, jobs);
  EpochMetrics em;
  em.split = "eval";
  em.nll = summary.mean_nll();
  em.nll_per_token = summary.per_token();
  em.accuracy = acc;
  out << format_metrics(em) << " mode=" << mode << " examples=" << corpus.examples.size()
      << '\n';
  return 0;
}

// ---------------------------------------------------------------- decode

int do_decode(const ModelFiles& files, const std::string& input,
              std::optional<std::size_t> max_len, std::size_t jobs, bool verbose,
              std::istream& in, std::ostream& out) {
  auto lm = load_model(files);
  const auto lines = read_lines(input, in);
  std::vector<std::string> results(lines.size());
  parallel_for(lines.size(), jobs, [&](std::size_t i) {
    const auto source = encode(lm.source, split_tokens(lines[i]));
    const auto pred = lm.model.predict(source);
    const auto r = decode_joint(pred.field, pred.token_log_probs, max_len);
    std::vector<std::string> words;
    for (TokenId t : r.tokens) words.push_back(lm.target.token(t));
    std::string line = join_tokens(words) + '\t' + render_tree(r.tree, words);
    if (verbose) line += '\t' + format_score(r.log_joint);
    results[i] = std::move(line);
  });
  for (const auto& r : results) out << r << '\n';
  return 0;
}

// ---------------------------------------------------------------- parse

int do_parse(const ModelFiles& files, const std::string& input, std::size_t jobs,
             bool verbose, std::istream& in, std::ostream& out) {
  auto lm = load_model(files);
  std::vector<RawExample> rows;
  if (input.empty() || input == "-") {
    rows = read_raw_examples(in);
  } else {
    rows = read_raw_examples(fs::path(input));
  }
  const std::size_t max_leaves = lm.model.topology().max_leaves();
  for (const auto& r : rows) {
    if (r.target.size() > max_leaves) {
      throw DomainError("line " + std::to_string(r.line) + ": sentence has " +
                        std::to_string(r.target.size()) + " tokens, more than the " +
                        std::to_string(max_leaves) + " leaves of the tree");
    }
  }
  std::vector<std::string> results(rows.size());
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    const auto& r = rows[i];
    const auto pred = lm.model.predict(encode(lm.source, r.source));
    const auto target = encode(lm.target, r.target);
    const auto grid = EmissionGrid::gather(pred.token_log_probs, target);
    const auto best = best_tree_given_tokens(pred.field, grid, target.size());
    std::string line = render_tree(best.tree, r.target);
    if (verbose) line += '\t' + format_score(best.log_joint);
    results[i] = std::move(line);
  });
  for (const auto& r : results) out << r << '\n';
  return 0;
}

// ---------------------------------------------------------------- gen-data

struct GenArgs {
  std::string task = "scan";
  std::string split = "simple";
  std::string out_dir;
  std::size_t train_size = 500, test_size = 200, gen_size = 200;
  std::size_t max_output_len = 32;
  int max_connectors = 1;
  std::uint64_t seed = 0;
};

void write_file(const fs::path& path, const std::vector<RawExample>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  write_raw_examples(f, rows);
}

int do_gen(const GenArgs& g, std::ostream& out) {
  const fs::path dir(g.out_dir);
  fs::create_directories(dir);
  if (g.task == "scan") {
    data::ScanOptions opts;
    opts.max_output_len = g.max_output_len;
    opts.max_connectors = g.max_connectors;
    const auto d = data::make_scan_split(opts, data::parse_scan_split(g.split),
                                         g.train_size, g.test_size, g.seed);
    write_file(dir / "train.txt", d.train);
    write_file(dir / "test.txt", d.test);
    out << "train=" << d.train.size() << " test=" << d.test.size() << '\n';
  } else {
    const auto d = data::make_question_formation(g.train_size, g.test_size,
                                                 g.gen_size, g.seed);
    write_file(dir / "train.txt", d.train);
    write_file(dir / "test.txt", d.test);
    write_file(dir / "gen.txt", d.generalization);
    out << "train=" << d.train.size() << " test=" << d.test.size()
        << " gen=" << d.generalization.size() << '\n';
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app("Latent binary-tree sequence decoder: train, evaluate, decode, parse, "
               "generate data and verify against brute force.",
               "ctree");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.option_defaults()->always_capture_default();

  bool verbose = false;
  std::uint64_t seed = 0;
  std::size_t jobs = default_jobs();
  app.set_config("--config", "", "key=value file of subcommand options; flags win");
  auto add_common = [&](CLI::App* sub, bool with_jobs) {
    sub->fallthrough();
    sub->add_flag("-v,--verbose", verbose, "Print scores / per-epoch metrics");
    if (with_jobs) sub->add_option("--jobs", jobs, "Worker threads");
  };

  // train
  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  add_common(train_cmd, true);
  train_cmd->add_option("--train", ta.train_path, "Training corpus")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--eval", ta.eval_path, "Evaluation corpus")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", ta.out_dir, "Output directory")->required();
  train_cmd->add_option("--depth", ta.model.depth, "Depth of the complete tree");
  train_cmd->add_option("--dim", ta.model.dim, "Embedding size (even)");
  train_cmd->add_option("--emission", ta.emission, "Emission head")
      ->check(CLI::IsMember({"mlp", "lexical_attention", "la"}));
  train_cmd->add_option("--context", ta.context, "Source encoder")
      ->check(CLI::IsMember({"none", "mean_mlp", "positional", "attention"}));
  train_cmd->add_option("--max-source-len", ta.model.max_source_len,
                        "Longest source for the positional encoders");
  train_cmd->add_option("--lr", ta.train.learning_rate, "Adam learning rate");
  train_cmd->add_option("--batch-size", ta.train.batch_size, "Examples per step");
  train_cmd->add_option("--epochs", ta.train.epochs, "Passes over the data");
  train_cmd->add_option("--max-steps", ta.max_steps, "Stop after this many steps (0 = off)");
  train_cmd->add_option("--clip-norm", ta.train.clip_norm, "Gradient clipping norm");
  train_cmd->add_option("--dropout", ta.train.dropout, "Dropout rate during training")
      ->check(CLI::Range(0.0, 0.95));
  train_cmd->add_option("--final-lr-scale", ta.train.final_lr_scale,
                        "Learning rate at the last step, as a fraction of --lr")
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--eval-every", ta.train.eval_every, "Evaluate every N epochs");
  train_cmd->add_option("--seed", seed, "Seed for initialization and shuffling");
  train_cmd->add_flag("--no-train-accuracy", ta.no_train_accuracy,
                      "Skip decoding the training set at evaluation time");

  // eval
  ModelFiles files;
  std::string data_path, mode = "full_sequence";
  auto* eval_cmd = app.add_subcommand("eval", "Likelihood and accuracy on a corpus");
  add_common(eval_cmd, true);
  add_model_options(eval_cmd, files);
  eval_cmd->add_option("--data", data_path, "Corpus to evaluate")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--mode", mode, "Accuracy mode")
      ->check(CLI::IsMember({"full_sequence", "first_word"}));

  // decode
  std::string input;
  std::size_t max_len = 0;
  auto* decode_cmd = app.add_subcommand(
      "decode", "Decode sources (one per line) into tokens and a bracketed tree");
  add_common(decode_cmd, true);
  add_model_options(decode_cmd, files);
  decode_cmd->add_option("--input", input, "Source file (default: standard input)");
  decode_cmd->add_option("--max-len", max_len, "Longest output (0 = 2^depth)");
  decode_cmd->add_option("--seed", seed, "Unused; accepted for uniformity");

  // parse
  auto* parse_cmd = app.add_subcommand(
      "parse", "Most likely tree for given sentences (source TAB target lines)");
  add_common(parse_cmd, true);
  add_model_options(parse_cmd, files);
  parse_cmd->add_option("--input", input, "Input file (default: standard input)");

  // gen-data
  GenArgs ga;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  add_common(gen_cmd, false);
  gen_cmd->add_option("--task", ga.task, "Generator")
      ->check(CLI::IsMember({"scan", "questions"}));
  gen_cmd->add_option("--split", ga.split, "SCAN split")
      ->check(CLI::IsMember({"simple", "turn_left", "jump", "length"}));
  gen_cmd->add_option("--out", ga.out_dir, "Output directory")->required();
  gen_cmd->add_option("--train-size", ga.train_size, "Training examples");
  gen_cmd->add_option("--test-size", ga.test_size, "Test examples");
  gen_cmd->add_option("--gen-size", ga.gen_size, "Generalization examples (questions)");
  gen_cmd->add_option("--max-output-len", ga.max_output_len, "Longest SCAN action sequence");
  gen_cmd->add_option("--max-connectors", ga.max_connectors, "0 or 1 and/after per command")
      ->check(CLI::Range(0, 1));
  gen_cmd->add_option("--seed", ga.seed, "Sampling seed");

  // verify
  verify::Options vo;
  int verify_depth = 3;
  auto* verify_cmd = app.add_subcommand("verify", "Check the dynamic programs against brute force");
  add_common(verify_cmd, false);
  verify_cmd->add_option("--depth", verify_depth, "Largest depth to check")
      ->check(CLI::Range(1, 10));
  verify_cmd->add_option("--trials", vo.trials, "Random instances per depth and length");
  verify_cmd->add_option("--seed", vo.seed, "Seed");

  std::string selected;
  for (const auto& a : args) {
    if (app.get_subcommand_no_throw(a) != nullptr) {
      selected = a;
      break;
    }
  }
  app.config_formatter(std::make_shared<SubcommandConfig>(selected));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) {
      ta.model.seed = seed;
      ta.train.seed = seed;
      ta.train.jobs = jobs;
      return do_train(ta, verbose, out);
    }
    if (eval_cmd->parsed()) return do_eval(files, data_path, mode, jobs, out);
    if (decode_cmd->parsed()) {
      std::optional<std::size_t> cap;
      if (max_len > 0) cap = max_len;
      return do_decode(files, input, cap, jobs, verbose, in, out);
    }
    if (parse_cmd->parsed()) return do_parse(files, input, jobs, verbose, in, out);
    if (gen_cmd->parsed()) return do_gen(ga, out);
    if (verify_cmd->parsed()) {
      vo.max_depth = verify_depth;
      const auto results = verify::run_suite(vo);
      out << verify::format_table(results);
      const bool ok = std::all_of(results.begin(), results.end(),
                                  [](const auto& r) { return r.passed; });
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace ctree::cli
