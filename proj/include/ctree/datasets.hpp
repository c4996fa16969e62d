#pragma once

// Synthetic corpora: a SCAN-style command interpreter and an English
// question-formation toy grammar.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ctree/corpus.hpp"

namespace ctree::data {

// Interprets one command, e.g. "jump around left twice and walk" ->
// "LTURN JUMP LTURN JUMP ... WALK". Throws DomainError on malformed input.
std::vector<std::string> interpret_scan(const std::vector<std::string>& command);

struct ScanOptions {
  // Commands whose action sequence is longer are dropped.
  std::size_t max_output_len = 32;
  // 0 = single clauses only, 1 = also "x and y" / "x after y".
  int max_connectors = 1;
};

// Every command allowed by the options, in a fixed order.
std::vector<RawExample> enumerate_scan(const ScanOptions& options);

enum class ScanSplit { kSimple, kTurnLeft, kJump, kLength };

ScanSplit parse_scan_split(std::string_view text);
std::string to_string(ScanSplit split);

struct SplitData {
  std::vector<RawExample> train;
  std::vector<RawExample> test;
};

// Partitions the enumerated commands:
//   simple:    random partition
//   turn_left: "turn left" appears in training only as the bare command;
//              test holds every other command containing it
//   jump:      "jump" appears in training only as the bare command
//   length:    training outputs have at most max_output_len / 2 actions,
//              test outputs are longer
// Then samples up to train_size / test_size examples from each side.
SplitData make_scan_split(const ScanOptions& options, ScanSplit split,
                          std::size_t train_size, std::size_t test_size,
                          std::uint64_t seed);

// Question formation. Source is a declarative sentence followed by a task
// word (DECL or QUEST); the target copies the sentence for DECL and fronts the
// main-clause auxiliary for QUEST.
struct QuestionData {
  std::vector<RawExample> train;
  std::vector<RawExample> test;            // same distribution as train
  std::vector<RawExample> generalization;  // QUEST with a relative clause on
                                           // the subject
};

// The main auxiliary is the one after the subject noun phrase; the
// training QUEST sentences never have a relative clause on the subject, so
// "first auxiliary" and "main auxiliary" agree on them.
QuestionData make_question_formation(std::size_t train_size,
                                     std::size_t test_size,
                                     std::size_t generalization_size,
                                     std::uint64_t seed);

// Applies the QUEST transformation given a declarative sentence ending in
// "." and the index of the main auxiliary.
std::vector<std::string> form_question(const std::vector<std::string>& sentence,
                                       std::size_t main_aux);

}  // namespace ctree::data
