// End to end through the command-line front end: generate data, train,
// evaluate, decode and parse, then check the printed scores against the
// library.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctree/checkpoint.hpp"
#include "ctree/cli.hpp"
#include "ctree/corpus.hpp"
#include "ctree/decoder.hpp"
#include "ctree/topology.hpp"

namespace ctree {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run ctree_cli(std::vector<std::string> args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class CliRoundTrip : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "ctree_roundtrip";
    fs::remove_all(dir_);
    auto r = ctree_cli({"gen-data", "--task", "scan", "--out", (dir_ / "data").string(),
                        "--train-size", "80", "--test-size", "20", "--max-output-len", "6",
                        "--seed", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    r = ctree_cli({"train", "--train", (dir_ / "data/train.txt").string(), "--eval",
                   (dir_ / "data/test.txt").string(), "--out", (dir_ / "model").string(),
                   "--depth", "3", "--dim", "8", "--emission", "la", "--context",
                   "attention", "--epochs", "3", "--seed", "4", "--jobs", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static fs::path dir_;
};

fs::path CliRoundTrip::dir_;

TEST_F(CliRoundTrip, WritesModelFilesAndMetrics) {
  for (const char* f : {"model.ckpt", "src.vocab", "tgt.vocab", "metrics.log"}) {
    EXPECT_TRUE(fs::exists(dir_ / "model" / f)) << f;
  }
  const auto log = slurp(dir_ / "model/metrics.log");
  EXPECT_NE(log.find("epoch=3 split=eval"), std::string::npos) << log;
}

TEST_F(CliRoundTrip, SameSeedSameMetrics) {
  auto r = ctree_cli({"train", "--train", (dir_ / "data/train.txt").string(), "--eval",
                      (dir_ / "data/test.txt").string(), "--out",
                      (dir_ / "model2").string(), "--depth", "3", "--dim", "8",
                      "--emission", "la", "--context", "attention", "--epochs", "3",
                      "--seed", "4", "--jobs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "model/metrics.log"), slurp(dir_ / "model2/metrics.log"));
}

TEST_F(CliRoundTrip, EvalReproducesLastLoggedEvaluation) {
  auto r = ctree_cli({"eval", "--model", (dir_ / "model").string(), "--data",
                      (dir_ / "data/test.txt").string(), "--jobs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  // The model directory holds the best epoch; find its eval line.
  const auto log = split(slurp(dir_ / "model/metrics.log"), '\n');
  bool found = false;
  const auto nll = r.out.substr(r.out.find("nll="), r.out.find(" nll_per_token") - r.out.find("nll="));
  for (const auto& line : log) {
    if (line.find("split=eval") != std::string::npos && line.find(nll + " ") != std::string::npos) {
      found = true;
    }
  }
  EXPECT_TRUE(found) << r.out;
}

TEST_F(CliRoundTrip, DecodeScoresRescoreExactly) {
  const auto sources = "jump twice\nwalk left and run\nlook\n";
  auto r = ctree_cli({"decode", "--model", (dir_ / "model").string(), "-v"}, sources);
  ASSERT_EQ(r.code, 0) << r.err;
  Model model = load_checkpoint(dir_ / "model/model.ckpt");
  auto src_vocab = Vocabulary::load(dir_ / "model/src.vocab");
  auto tgt_vocab = Vocabulary::load(dir_ / "model/tgt.vocab");
  const auto lines = split(r.out, '\n');
  const auto inputs = split(sources, '\n');
  ASSERT_EQ(lines.size(), 3u);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split(lines[i], '\t');
    ASSERT_EQ(fields.size(), 3u) << lines[i];
    const auto labeled = parse_tree(model.topology(), fields[1]);
    EXPECT_EQ(join_tokens(labeled.labels), fields[0]);
    std::vector<TokenId> src, tgt;
    for (const auto& w : split_tokens(inputs[i])) src.push_back(src_vocab.id(w));
    for (const auto& w : labeled.labels) tgt.push_back(tgt_vocab.id(w));
    const auto pred = model.predict(src);
    const double score = score_joint(pred.field, pred.token_log_probs, labeled.tree, tgt);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", score);
    EXPECT_EQ(fields[2], buf);
  }
}

TEST_F(CliRoundTrip, ParseOutputRoundTrips) {
  const auto rows = split(slurp(dir_ / "data/test.txt"), '\n');
  std::string input;
  for (std::size_t i = 0; i < 5 && i < rows.size(); ++i) input += rows[i] + "\n";
  auto r = ctree_cli({"parse", "--model", (dir_ / "model").string(), "-v"}, input);
  ASSERT_EQ(r.code, 0) << r.err;
  Model model = load_checkpoint(dir_ / "model/model.ckpt");
  const auto lines = split(r.out, '\n');
  ASSERT_EQ(lines.size(), std::min<std::size_t>(5, rows.size()));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split(lines[i], '\t');
    ASSERT_EQ(fields.size(), 2u);
    const auto labeled = parse_tree(model.topology(), fields[0]);
    EXPECT_EQ(render_tree(labeled.tree, labeled.labels), fields[0]);
    EXPECT_EQ(join_tokens(labeled.labels), split(rows[i], '\t')[1]);
  }
}

TEST_F(CliRoundTrip, DecodeOfUntrainedModelStillEmits) {
  const auto dir = dir_ / "untrained";
  auto r = ctree_cli({"train", "--train", (dir_ / "data/train.txt").string(), "--out",
                      dir.string(), "--depth", "3", "--dim", "8", "--max-steps", "1",
                      "--epochs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = ctree_cli({"decode", "--model", dir.string()}, "jump\n");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(split(r.out, '\t').size(), 2u);
}

TEST_F(CliRoundTrip, EvalOnForeignCorpusFails) {
  std::ofstream(dir_ / "foreign.txt") << "ein zwei\tEINS ZWEI\n";
  auto r = ctree_cli({"eval", "--model", (dir_ / "model").string(), "--data",
                      (dir_ / "foreign.txt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("vocabulary"), std::string::npos) << r.err;
}

TEST_F(CliRoundTrip, EvalWithWrongVocabularyFails) {
  std::ofstream(dir_ / "other.vocab") << "<unk>\nWALK\nRUN\n";
  auto r = ctree_cli({"eval", "--model", (dir_ / "model").string(), "--tgt-vocab",
                      (dir_ / "other.vocab").string(), "--data",
                      (dir_ / "data/test.txt").string()});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliRoundTrip, QuestionFormationData) {
  auto r = ctree_cli({"gen-data", "--task", "questions", "--out",
                      (dir_ / "questions").string(), "--train-size", "20", "--test-size",
                      "5", "--gen-size", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(split(slurp(dir_ / "questions/gen.txt"), '\n').size(), 5u);
}

}  // namespace
}  // namespace ctree
