#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ctree/autodiff.hpp"
#include "ctree/marginalizer.hpp"
#include "ctree/prior.hpp"
#include "ctree/topology.hpp"

namespace ctree {

enum class EmissionMode { kMlp, kLexicalAttention };

// How the root embedding and the production context are derived from the
// source sequence.
//   kNone:       learned root embedding, zero context (unconditional model)
//   kMeanMlp:    mean of source embeddings through a 2-layer MLP
//   kPositional: each source embedding plus a position embedding goes through
//                a tanh projection before the mean, so word order matters
//   kAttention:  positional source encodings mixed by one self-attention
//                layer; the root comes from their mean as above, and every
//                vertex gets its own context by attending over them
enum class ContextMode { kNone, kMeanMlp, kPositional, kAttention };

std::string to_string(EmissionMode mode);
std::string to_string(ContextMode mode);
EmissionMode parse_emission_mode(std::string_view text);
ContextMode parse_context_mode(std::string_view text);

struct ModelConfig {
  int depth = 3;
  std::size_t dim = 8;
  std::size_t source_vocab = 1;
  std::size_t target_vocab = 1;
  EmissionMode emission = EmissionMode::kMlp;
  ContextMode context = ContextMode::kMeanMlp;
  // Longest source accepted in kPositional and kAttention modes.
  std::size_t max_source_len = 64;
  std::uint64_t seed = 0;
  // Checksums of the vocabularies the model was trained with (0 = unset).
  std::uint64_t source_vocab_checksum = 0;
  std::uint64_t target_vocab_checksum = 0;

  // Throws ConfigError on inconsistent values.
  void validate() const;
};

// Training-time dropout: each unit is zeroed with probability `rate` and the
// survivors are scaled by 1 / (1 - rate). Masks come from `seed` alone.
struct Dropout {
  double rate = 0.0;
  std::uint64_t seed = 0;
};

// Tape leaves for the parameters used in one forward pass, created on first
// use so every parameter appears at most once per tape.
class ParamBinding {
 public:
  ParamBinding(ad::Tape& tape, const ad::ParameterSet& params, Dropout dropout = {})
      : tape_(tape), params_(params), cache_(params.size()),
        dropout_rate_(dropout.rate), rng_(dropout.seed) {}

  ad::Var operator()(std::size_t index);
  ad::Tape& tape() { return tape_; }

  // Applies dropout when a positive rate was given, else returns x.
  ad::Var drop(ad::Var x);

 private:
  ad::Tape& tape_;
  const ad::ParameterSet& params_;
  std::vector<std::optional<ad::Var>> cache_;
  double dropout_rate_;
  std::mt19937_64 rng_;
};

struct RootState {
  ad::Var embedding;  // 1 x d
  ad::Var context;    // 1 x d
  // S x d source encodings attended by every vertex (kAttention only).
  std::optional<ad::Var> memory;
};

// Vertex embeddings h_v in heap order (row s is vertex s+1), M x d.
struct VertexEmbeddings {
  ad::Var hidden;
  std::size_t vertex_count = 0;
  // Contextual source encodings, carried over from RootState (kAttention).
  std::optional<ad::Var> memory;
};

struct HeadOutputs {
  ad::Var log_l;             // M x 1, log probability of stopping at v
  ad::Var log_one_minus_l;   // M x 1, log probability of splitting v
  ad::Var log_emission;      // M x V, log p(x | v)
};

// Plain values of one forward pass, ready for the marginalizer and decoder.
struct Prediction {
  SplitField field;
  TokenLogProbs token_log_probs;
};

// Recursive tree decoder: a gated production function splits the root
// embedding level by level down to the configured depth; every vertex gets a
// stop/split distribution and an emission distribution.
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const CompleteTreeTopology& topology() const { return *topology_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  RootState encode_context(ParamBinding& p,
                           std::span<const TokenId> source) const;

  // One application of the production function to every row of h_parent
  // (n x d) with contexts c (n x d). Returns (left children, right children).
  std::pair<ad::Var, ad::Var> production_split(ParamBinding& p, ad::Var h_parent,
                                               ad::Var context) const;

  VertexEmbeddings expand(ParamBinding& p, const RootState& root) const;

  // `source` is required in lexical-attention mode.
  HeadOutputs heads(ParamBinding& p, const VertexEmbeddings& embeddings,
                    std::span<const TokenId> source) const;

  HeadOutputs forward(ParamBinding& p, std::span<const TokenId> source) const;

  // log m(v) as an M x 1 column, level by level.
  ad::Var split_field_log_m(ParamBinding& p, const HeadOutputs& heads) const;

  // log p(target | source) through the marginalization recursion on the tape.
  ad::Var log_marginal(ParamBinding& p, const HeadOutputs& heads,
                       std::span<const TokenId> target) const;

  // Negative log marginal likelihood of one example.
  ad::Var nll(ad::Tape& tape, std::span<const TokenId> source,
              std::span<const TokenId> target, Dropout dropout = {}) const;

  Prediction predict(std::span<const TokenId> source) const;

 private:
  struct Ids {
    std::size_t source_embedding = 0;
    std::size_t position_embedding = 0;
    std::size_t bind_w = 0, bind_b = 0;
    std::size_t self_q = 0, self_k = 0, self_v = 0;
    std::size_t context_query = 0;
    std::size_t enc_w1 = 0, enc_b1 = 0, enc_w2 = 0, enc_b2 = 0;
    std::size_t root_embedding = 0;
    std::size_t prod_w1 = 0, prod_u1 = 0, prod_b1 = 0;
    std::size_t prod_w2 = 0, prod_b2 = 0;
    std::size_t prod_w3 = 0, prod_b3 = 0;
    std::size_t leaf_w = 0, leaf_b = 0;
    std::size_t emit_w1 = 0, emit_b1 = 0, emit_w2 = 0, emit_b2 = 0;
    std::size_t query_w = 0, lexical_table = 0;
  };

  void initialize();
  bool uses_positions() const {
    return config_.context == ContextMode::kPositional ||
           config_.context == ContextMode::kAttention;
  }
  // Per-row contexts: each row of `queries` attends over `memory`.
  ad::Var attend(ParamBinding& p, ad::Var queries, ad::Var memory) const;
  // One self-attention layer over the positional source rows.
  ad::Var attend_self(ParamBinding& p, ad::Var x) const;

  ModelConfig config_;
  std::shared_ptr<const CompleteTreeTopology> topology_;
  std::shared_ptr<const ad::IndexGroups> incoming_groups_;
  std::shared_ptr<const ad::IndexGroups> right_boundary_group_;
  ad::Tensor left_boundary_mask_;
  ad::ParameterSet params_;
  Ids ids_;
};

}  // namespace ctree
