#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctree/marginalizer.hpp"

namespace ctree {

// Token <-> id map. Id 0 is always the unknown token.
class Vocabulary {
 public:
  static constexpr const char* kUnknown = "<unk>";

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);

  // Adds the token if new; returns its id.
  TokenId add(const std::string& token);
  // Id of the token, or 0 when unknown.
  TokenId id(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // FNV-1a over the tokens in id order; identifies a vocabulary in checkpoints.
  std::uint64_t checksum() const;

  // One token per line, id = line index.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// A tokenized (source, target) line before id assignment.
struct RawExample {
  std::vector<std::string> source;
  std::vector<std::string> target;
  std::size_t line = 0;  // 1-based line in the originating file
};

struct Example {
  std::vector<TokenId> source;
  std::vector<TokenId> target;
  std::size_t line = 0;
};

struct Corpus {
  std::vector<Example> examples;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
};

// Corpus text: one example per line, source tokens TAB target tokens, tokens
// separated by whitespace. Lines without a TAB are read as target-only. Blank
// lines are skipped. Throws ConfigError naming the line on malformed input.
std::vector<RawExample> read_raw_examples(std::istream& in);
std::vector<RawExample> read_raw_examples(const std::filesystem::path& path);
void write_raw_examples(std::ostream& out, const std::vector<RawExample>& rows);

// Builds vocabularies from the examples and encodes them.
Corpus build_corpus(const std::vector<RawExample>& rows);
// Encodes with fixed vocabularies; unseen tokens map to the unknown id.
Corpus encode_corpus(const std::vector<RawExample>& rows,
                     const Vocabulary& source_vocab,
                     const Vocabulary& target_vocab);

// Throws ConfigError naming the first line whose target is empty or longer
// than the 2^depth leaves of the complete tree.
void check_target_lengths(const Corpus& corpus, int depth);

std::vector<std::string> split_tokens(const std::string& text);
std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace ctree
