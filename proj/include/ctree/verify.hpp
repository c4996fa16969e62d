#pragma once

// Randomized comparisons of the dynamic programs and gradients against the
// brute-force references. Used by the `verify` command and the acceptance
// suite.

#include <cstdint>
#include <string>
#include <vector>

namespace ctree::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t cases = 0;
  double seconds = 0.0;
  std::string detail;
};

struct Options {
  int min_depth = 1;
  int max_depth = 3;
  std::size_t max_length = 8;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
};

// DP marginal vs the sum over enumerated trees, every depth and length.
CheckResult marginal_vs_enumeration(const Options& o, double tol = 1e-9);

// Sum of prior probabilities over all trees with the bottom level clamped.
CheckResult prior_normalization(const Options& o, double tol = 1e-9);

// Leaf-product prior vs the stop/split recursion on random (field, tree)
// pairs.
CheckResult leaf_product_identity(const Options& o, std::size_t pairs = 500,
                                  double tol = 1e-10);

// Built transition set vs adjacent pairs harvested from enumeration, plus
// the depth-2 example and its two three-leaf trees.
CheckResult successive_leaves(const Options& o);

// decode_joint and best_tree_given_tokens vs exhaustive argmax on tie-free
// instances (depth <= 3, vocab <= 3), and the early stop vs a 10x cap.
CheckResult decoder_vs_exhaustive(const Options& o, std::size_t instances = 50);

// End-to-end NLL gradient vs central differences (step 1e-5) on a dim-8
// model over random examples.
CheckResult gradient_check(int depth, std::size_t examples = 10,
                           std::uint64_t seed = 0, double tol = 1e-4);

// Sum over all sequences of lengths 1..2^depth of a random model's sequence
// probability with the bottom level clamped.
CheckResult total_probability(int depth = 3, std::size_t vocab = 3,
                              std::uint64_t seed = 0, double tol = 1e-6);

std::vector<CheckResult> run_suite(const Options& o);

// One row per check: name, PASS/FAIL, cases, max error, tolerance, time.
std::string format_table(const std::vector<CheckResult>& results);

}  // namespace ctree::verify
