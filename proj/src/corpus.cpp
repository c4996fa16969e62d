#include "ctree/corpus.hpp"

#include <fstream>
#include <sstream>

#include "ctree/error.hpp"

namespace ctree {

Vocabulary::Vocabulary() { add(kUnknown); }

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  if (tokens.empty() || tokens.front() != kUnknown) {
    throw ConfigError(std::string("vocabulary must start with ") + kUnknown);
  }
  for (const auto& t : tokens) {
    if (contains(t)) throw ConfigError("duplicate vocabulary entry '" + t + "'");
    add(t);
  }
}

TokenId Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

TokenId Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? 0 : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return ids_.count(token) > 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DomainError("token id " + std::to_string(id) + " is out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : tokens_) {
    for (char c : t) mix(static_cast<unsigned char>(c));
    mix('\n');
  }
  return h;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary '" + path.string() + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) out.push_back(token);
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::vector<RawExample> read_raw_examples(std::istream& in) {
  std::vector<RawExample> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    RawExample row;
    row.line = number;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      row.target = split_tokens(line);
    } else {
      if (line.find('\t', tab + 1) != std::string::npos) {
        throw ConfigError("line " + std::to_string(number) +
                          ": more than one TAB separator");
      }
      row.source = split_tokens(line.substr(0, tab));
      row.target = split_tokens(line.substr(tab + 1));
    }
    if (row.target.empty()) {
      throw ConfigError("line " + std::to_string(number) + ": empty target");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<RawExample> read_raw_examples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus '" + path.string() + "'");
  return read_raw_examples(in);
}

void write_raw_examples(std::ostream& out, const std::vector<RawExample>& rows) {
  for (const auto& r : rows) {
    out << join_tokens(r.source) << '\t' << join_tokens(r.target) << '\n';
  }
}

Corpus build_corpus(const std::vector<RawExample>& rows) {
  Vocabulary source;
  Vocabulary target;
  for (const auto& r : rows) {
    for (const auto& t : r.source) source.add(t);
    for (const auto& t : r.target) target.add(t);
  }
  return encode_corpus(rows, source, target);
}

Corpus encode_corpus(const std::vector<RawExample>& rows,
                     const Vocabulary& source_vocab,
                     const Vocabulary& target_vocab) {
  Corpus corpus;
  corpus.source_vocab = source_vocab;
  corpus.target_vocab = target_vocab;
  corpus.examples.reserve(rows.size());
  for (const auto& r : rows) {
    Example e;
    e.line = r.line;
    for (const auto& t : r.source) e.source.push_back(source_vocab.id(t));
    for (const auto& t : r.target) e.target.push_back(target_vocab.id(t));
    corpus.examples.push_back(std::move(e));
  }
  return corpus;
}

void check_target_lengths(const Corpus& corpus, int depth) {
  const std::size_t max_leaves = std::size_t{1} << depth;
  for (const auto& e : corpus.examples) {
    if (e.target.empty()) {
      throw ConfigError("line " + std::to_string(e.line) + ": empty target");
    }
    if (e.target.size() > max_leaves) {
      throw ConfigError("line " + std::to_string(e.line) + ": target has " +
                        std::to_string(e.target.size()) +
                        " tokens but a depth-" + std::to_string(depth) +
                        " tree has at most " + std::to_string(max_leaves) +
                        " leaves");
    }
  }
}

}  // namespace ctree
