#include "ctree/datasets.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <span>

#include "ctree/error.hpp"

namespace ctree::data {

namespace {

const std::vector<std::string> kVerbs = {"walk", "run", "jump", "look"};

std::string action_of(const std::string& verb) {
  if (verb == "walk") return "WALK";
  if (verb == "run") return "RUN";
  if (verb == "jump") return "JUMP";
  if (verb == "look") return "LOOK";
  throw DomainError("unknown verb '" + verb + "'");
}

std::string turn_of(const std::string& direction) {
  if (direction == "left") return "LTURN";
  if (direction == "right") return "RTURN";
  throw DomainError("expected left or right, got '" + direction + "'");
}

// verb [opposite|around] [left|right] [twice|thrice]
std::vector<std::string> interpret_clause(std::span<const std::string> words) {
  if (words.empty()) throw DomainError("empty command clause");
  std::size_t repeat = 1;
  std::size_t end = words.size();
  if (words[end - 1] == "twice") {
    repeat = 2;
    --end;
  } else if (words[end - 1] == "thrice") {
    repeat = 3;
    --end;
  }
  if (end == 0) throw DomainError("repetition without an action");
  const std::string& verb = words[0];
  const bool is_turn = verb == "turn";
  std::vector<std::string> unit;
  if (end == 1) {
    if (is_turn) throw DomainError("'turn' needs a direction");
    unit = {action_of(verb)};
  } else if (end == 2) {
    const std::string turn = turn_of(words[1]);
    unit = {turn};
    if (!is_turn) unit.push_back(action_of(verb));
  } else if (end == 3) {
    const std::string turn = turn_of(words[2]);
    if (words[1] == "opposite") {
      unit = {turn, turn};
      if (!is_turn) unit.push_back(action_of(verb));
    } else if (words[1] == "around") {
      for (int i = 0; i < 4; ++i) {
        unit.push_back(turn);
        if (!is_turn) unit.push_back(action_of(verb));
      }
    } else {
      throw DomainError("expected opposite or around, got '" + words[1] + "'");
    }
  } else {
    throw DomainError("clause is too long");
  }
  std::vector<std::string> out;
  for (std::size_t r = 0; r < repeat; ++r) out.insert(out.end(), unit.begin(), unit.end());
  return out;
}

bool contains_sequence(const std::vector<std::string>& words,
                       const std::vector<std::string>& pattern) {
  return std::search(words.begin(), words.end(), pattern.begin(),
                     pattern.end()) != words.end();
}

bool contains_word(const std::vector<std::string>& words, const std::string& w) {
  return std::find(words.begin(), words.end(), w) != words.end();
}

std::vector<RawExample> sample(std::vector<RawExample> pool, std::size_t n,
                               std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > n) pool.resize(n);
  return pool;
}

}  // namespace

std::vector<std::string> interpret_scan(const std::vector<std::string>& command) {
  for (std::size_t i = 0; i < command.size(); ++i) {
    if (command[i] == "and" || command[i] == "after") {
      std::span<const std::string> all(command);
      auto first = interpret_clause(all.subspan(0, i));
      auto second = interpret_clause(all.subspan(i + 1));
      if (command[i] == "after") std::swap(first, second);
      first.insert(first.end(), second.begin(), second.end());
      return first;
    }
  }
  return interpret_clause(command);
}

std::vector<RawExample> enumerate_scan(const ScanOptions& options) {
  if (options.max_connectors < 0 || options.max_connectors > 1) {
    throw ConfigError("max_connectors must be 0 or 1");
  }
  std::vector<std::vector<std::string>> clauses;
  const std::vector<std::string> repeats = {"", "twice", "thrice"};
  auto push = [&](std::vector<std::string> base) {
    for (const auto& r : repeats) {
      auto c = base;
      if (!r.empty()) c.push_back(r);
      clauses.push_back(std::move(c));
    }
  };
  for (const auto& verb : kVerbs) push({verb});
  for (const std::string verb : {"walk", "run", "jump", "look", "turn"}) {
    for (const std::string dir : {"left", "right"}) {
      push({verb, dir});
      push({verb, "opposite", dir});
      push({verb, "around", dir});
    }
  }

  std::vector<RawExample> out;
  auto emit = [&](std::vector<std::string> command) {
    auto actions = interpret_scan(command);
    if (actions.size() > options.max_output_len) return;
    RawExample e;
    e.source = std::move(command);
    e.target = std::move(actions);
    e.line = out.size() + 1;
    out.push_back(std::move(e));
  };
  for (const auto& c : clauses) emit(c);
  if (options.max_connectors >= 1) {
    for (const std::string conj : {"and", "after"}) {
      for (const auto& a : clauses) {
        for (const auto& b : clauses) {
          auto command = a;
          command.push_back(conj);
          command.insert(command.end(), b.begin(), b.end());
          emit(std::move(command));
        }
      }
    }
  }
  return out;
}

ScanSplit parse_scan_split(std::string_view text) {
  if (text == "simple") return ScanSplit::kSimple;
  if (text == "turn_left" || text == "turn-left") return ScanSplit::kTurnLeft;
  if (text == "jump") return ScanSplit::kJump;
  if (text == "length") return ScanSplit::kLength;
  throw ConfigError("unknown split '" + std::string(text) +
                    "' (expected simple, turn_left, jump or length)");
}

std::string to_string(ScanSplit split) {
  switch (split) {
    case ScanSplit::kSimple: return "simple";
    case ScanSplit::kTurnLeft: return "turn_left";
    case ScanSplit::kJump: return "jump";
    case ScanSplit::kLength: return "length";
  }
  return "?";
}

SplitData make_scan_split(const ScanOptions& options, ScanSplit split,
                          std::size_t train_size, std::size_t test_size,
                          std::uint64_t seed) {
  auto all = enumerate_scan(options);
  std::mt19937_64 rng(seed);
  std::vector<RawExample> train_pool, test_pool;
  if (split == ScanSplit::kSimple) {
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t n_train = std::min(train_size, all.size());
    train_pool.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_pool.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  } else {
    for (auto& e : all) {
      bool held_out = false;
      switch (split) {
        case ScanSplit::kTurnLeft:
          held_out = contains_sequence(e.source, {"turn", "left"}) &&
                     e.source != std::vector<std::string>{"turn", "left"};
          break;
        case ScanSplit::kJump:
          held_out = contains_word(e.source, "jump") &&
                     e.source != std::vector<std::string>{"jump"};
          break;
        case ScanSplit::kLength:
          held_out = e.target.size() > options.max_output_len / 2;
          break;
        case ScanSplit::kSimple:
          break;
      }
      (held_out ? test_pool : train_pool).push_back(std::move(e));
    }
  }
  SplitData d;
  // Keep the bare primitive in the training set for the primitive splits.
  std::vector<RawExample> pinned;
  if (split == ScanSplit::kTurnLeft || split == ScanSplit::kJump) {
    const std::vector<std::string> bare =
        split == ScanSplit::kJump ? std::vector<std::string>{"jump"}
                                  : std::vector<std::string>{"turn", "left"};
    auto it = std::find_if(train_pool.begin(), train_pool.end(),
                           [&](const RawExample& e) { return e.source == bare; });
    if (it != train_pool.end()) {
      pinned.push_back(*it);
      train_pool.erase(it);
    }
  }
  const std::size_t rest = train_size > pinned.size() ? train_size - pinned.size() : 0;
  d.train = sample(std::move(train_pool), rest, rng);
  d.train.insert(d.train.begin(), pinned.begin(), pinned.end());
  d.test = sample(std::move(test_pool), test_size, rng);
  for (std::size_t i = 0; i < d.train.size(); ++i) d.train[i].line = i + 1;
  for (std::size_t i = 0; i < d.test.size(); ++i) d.test[i].line = i + 1;
  return d;
}

std::vector<std::string> form_question(const std::vector<std::string>& sentence,
                                       std::size_t main_aux) {
  if (sentence.empty() || sentence.back() != "." || main_aux + 1 >= sentence.size()) {
    throw DomainError("form_question needs a sentence ending in '.' and an auxiliary index inside it");
  }
  std::vector<std::string> q;
  q.push_back(sentence[main_aux]);
  for (std::size_t i = 0; i + 1 < sentence.size(); ++i) {
    if (i != main_aux) q.push_back(sentence[i]);
  }
  q.push_back("?");
  return q;
}

namespace {

const std::vector<std::string> kDeterminers = {"the", "my", "your", "our", "her"};
const std::vector<std::string> kNouns = {"walrus", "newt", "yak", "zebra",
                                         "raven", "salamander", "peacock"};
const std::vector<std::string> kAux = {"can", "will", "could", "would"};
const std::vector<std::string> kIntransitive = {"giggle", "smile", "swim",
                                                "sleep", "wait"};
const std::vector<std::string> kTransitive = {"see", "amuse", "admire",
                                              "entertain", "irritate"};

struct Sentence {
  std::vector<std::string> words;
  std::size_t main_aux = 0;
};

class QuestionGrammar {
 public:
  explicit QuestionGrammar(std::uint64_t seed) : rng_(seed) {}

  Sentence sentence(bool subject_rc, bool object_rc_allowed) {
    Sentence s;
    noun_phrase(s.words, subject_rc);
    s.main_aux = s.words.size();
    s.words.push_back(pick(kAux));
    if (coin()) {
      s.words.push_back(pick(kIntransitive));
    } else {
      s.words.push_back(pick(kTransitive));
      noun_phrase(s.words, object_rc_allowed && coin());
    }
    s.words.push_back(".");
    return s;
  }

  bool coin() { return std::bernoulli_distribution(0.5)(rng_); }
  std::mt19937_64& rng() { return rng_; }

 private:
  const std::string& pick(const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng_)];
  }

  void noun_phrase(std::vector<std::string>& out, bool with_rc) {
    out.push_back(pick(kDeterminers));
    out.push_back(pick(kNouns));
    if (with_rc) {
      out.push_back(coin() ? "who" : "that");
      out.push_back(pick(kAux));
      out.push_back(pick(kIntransitive));
    }
  }

  std::mt19937_64 rng_;
};

RawExample make_example(const Sentence& s, bool question) {
  RawExample e;
  e.source = s.words;
  e.source.pop_back();  // the period is not part of the input
  e.source.push_back(question ? "QUEST" : "DECL");
  e.target = question ? form_question(s.words, s.main_aux) : s.words;
  return e;
}

}  // namespace

QuestionData make_question_formation(std::size_t train_size,
                                     std::size_t test_size,
                                     std::size_t generalization_size,
                                     std::uint64_t seed) {
  QuestionGrammar g(seed);
  QuestionData d;
  std::set<std::vector<std::string>> seen;
  auto draw_in_distribution = [&]() {
    const bool question = g.coin();
    // Declaratives may carry a relative clause on the subject; questions in
    // the training distribution never do.
    const bool subject_rc = !question && std::bernoulli_distribution(1.0 / 3)(g.rng());
    return make_example(g.sentence(subject_rc, true), question);
  };
  auto fill = [&](std::vector<RawExample>& out, std::size_t n, auto draw) {
    std::size_t attempts = 0;
    while (out.size() < n && attempts < 1000 * (n + 1)) {
      ++attempts;
      RawExample e = draw();
      if (!seen.insert(e.source).second) continue;
      e.line = out.size() + 1;
      out.push_back(std::move(e));
    }
  };
  fill(d.train, train_size, draw_in_distribution);
  fill(d.test, test_size, draw_in_distribution);
  fill(d.generalization, generalization_size,
       [&]() { return make_example(g.sentence(true, true), true); });
  return d;
}

}  // namespace ctree::data
