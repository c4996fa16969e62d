#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ctree/marginalizer.hpp"
#include "ctree/prior.hpp"
#include "ctree/topology.hpp"

namespace ctree {

struct DecodeResult {
  std::vector<TokenId> tokens;
  InternalTree tree;
  double log_joint = 0.0;
};

// argmax over (sequence, tree) of p(x, T) by max-product over the successive
// leaf transitions. The search stops once every frontier value falls below the
// best complete tree found so far; max_len (default 2^depth) caps the length.
// Ties go to the lowest vertex index and the lowest token id. Throws
// NoDecodeError when no complete tree has finite probability.
DecodeResult decode_joint(const SplitField& field,
                          const TokenLogProbs& token_log_probs,
                          std::optional<std::size_t> max_len = std::nullopt);

// argmax over trees of p(x, T) for a fixed observed sequence.
DecodeResult best_tree_given_tokens(const SplitField& field,
                                    const EmissionGrid& emissions,
                                    std::size_t n_tokens);

// sum_n [log p(x_n | L_n) + log m(L_n)] folded left to right, the same
// association order the decoders use, so scores reproduce exactly.
double score_joint(const SplitField& field, const TokenLogProbs& token_log_probs,
                   const InternalTree& tree, std::span<const TokenId> tokens);
double score_joint(const SplitField& field, const EmissionGrid& emissions,
                   const InternalTree& tree);

}  // namespace ctree
