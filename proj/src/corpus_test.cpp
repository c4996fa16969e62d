#include "ctree/corpus.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "ctree/error.hpp"

namespace ctree {
namespace {

TEST(Vocabulary, UnknownIsZero) {
  Vocabulary v;
  EXPECT_EQ(v.size(), 1u);
  EXPECT_EQ(v.token(0), "<unk>");
  EXPECT_EQ(v.add("walk"), 1);
  EXPECT_EQ(v.add("walk"), 1);
  EXPECT_EQ(v.id("run"), 0);
  EXPECT_THROW(v.token(5), DomainError);
}

TEST(Vocabulary, ChecksumDependsOnOrder) {
  Vocabulary a, b;
  a.add("x");
  a.add("y");
  b.add("y");
  b.add("x");
  EXPECT_NE(a.checksum(), b.checksum());
  Vocabulary c(a.tokens());
  EXPECT_EQ(a.checksum(), c.checksum());
}

TEST(Vocabulary, SaveLoad) {
  auto path = std::filesystem::temp_directory_path() / "ctree_vocab_test.txt";
  Vocabulary v;
  v.add("a");
  v.add("b c");
  v.save(path);
  auto w = Vocabulary::load(path);
  EXPECT_EQ(w.tokens(), v.tokens());
  std::filesystem::remove(path);
  EXPECT_THROW(Vocabulary(std::vector<std::string>{"a"}), ConfigError);
  EXPECT_THROW(Vocabulary(std::vector<std::string>{"<unk>", "a", "a"}), ConfigError);
}

TEST(Corpus, ReadsTabSeparatedLines) {
  std::istringstream in("jump twice\tJUMP JUMP\n\nwalk\tWALK\r\nLTURN RTURN\n");
  auto rows = read_raw_examples(in);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].source, (std::vector<std::string>{"jump", "twice"}));
  EXPECT_EQ(rows[0].target, (std::vector<std::string>{"JUMP", "JUMP"}));
  EXPECT_EQ(rows[1].line, 3u);
  EXPECT_EQ(rows[1].target, std::vector<std::string>{"WALK"});
  EXPECT_TRUE(rows[2].source.empty());
  EXPECT_EQ(rows[2].line, 4u);
}

TEST(Corpus, MalformedLinesNameTheLine) {
  std::istringstream two_tabs("a\tb\tc\n");
  try {
    read_raw_examples(two_tabs);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
  std::istringstream empty_target("ok\tOK\nwalk\t \n");
  try {
    read_raw_examples(empty_target);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Corpus, BuildAndEncode) {
  std::istringstream in("walk\tWALK\nrun twice\tRUN RUN\n");
  auto rows = read_raw_examples(in);
  auto corpus = build_corpus(rows);
  EXPECT_EQ(corpus.source_vocab.size(), 4u);
  EXPECT_EQ(corpus.target_vocab.size(), 3u);
  EXPECT_EQ(corpus.examples[1].target, (std::vector<TokenId>{2, 2}));

  std::istringstream other("look\tLOOK\n");
  auto encoded = encode_corpus(read_raw_examples(other), corpus.source_vocab,
                               corpus.target_vocab);
  EXPECT_EQ(encoded.examples[0].source, std::vector<TokenId>{0});
  EXPECT_EQ(encoded.examples[0].target, std::vector<TokenId>{0});
}

TEST(Corpus, WriteReadRoundTrip) {
  std::vector<RawExample> rows(2);
  rows[0].source = {"a", "b"};
  rows[0].target = {"X"};
  rows[1].source = {"c"};
  rows[1].target = {"Y", "Z"};
  std::stringstream buf;
  write_raw_examples(buf, rows);
  auto back = read_raw_examples(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].source, rows[1].source);
  EXPECT_EQ(back[1].target, rows[1].target);
}

TEST(Corpus, TargetLengthCheck) {
  std::istringstream in("a\tX\nb\tX X X X X\n");
  auto corpus = build_corpus(read_raw_examples(in));
  EXPECT_NO_THROW(check_target_lengths(corpus, 3));
  try {
    check_target_lengths(corpus, 2);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Tokens, SplitJoin) {
  EXPECT_EQ(split_tokens("  a  b\tc "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(join_tokens({"a", "b"}), "a b");
  EXPECT_EQ(join_tokens({}), "");
}

}  // namespace
}  // namespace ctree
