#include "ctree/model.hpp"

#include <cmath>
#include <random>

#include "ctree/error.hpp"
#include "ctree/log_math.hpp"

namespace ctree {

using ad::Var;

// Larger than the usual 1e-5: pre-normalization rows near the root can have
// variance around 1e-4 at initialization, and with a tiny epsilon the
// normalization bends sharply enough there to break finite-difference checks.
constexpr double kLayerNormEps = 1e-3;

std::string to_string(EmissionMode mode) {
  return mode == EmissionMode::kMlp ? "mlp" : "lexical_attention";
}

std::string to_string(ContextMode mode) {
  switch (mode) {
    case ContextMode::kNone:
      return "none";
    case ContextMode::kMeanMlp:
      return "mean_mlp";
    case ContextMode::kPositional:
      return "positional";
    case ContextMode::kAttention:
      return "attention";
  }
  return "?";
}

EmissionMode parse_emission_mode(std::string_view text) {
  if (text == "mlp") return EmissionMode::kMlp;
  if (text == "lexical_attention" || text == "la") {
    return EmissionMode::kLexicalAttention;
  }
  throw ConfigError("unknown emission mode '" + std::string(text) + "'");
}

ContextMode parse_context_mode(std::string_view text) {
  if (text == "none") return ContextMode::kNone;
  if (text == "mean_mlp") return ContextMode::kMeanMlp;
  if (text == "positional") return ContextMode::kPositional;
  if (text == "attention") return ContextMode::kAttention;
  throw ConfigError("unknown context mode '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (depth < 0 || depth > kDefaultMaxDepth) {
    throw ConfigError("depth must be in [0, " + std::to_string(kDefaultMaxDepth) +
                      "]");
  }
  if (dim == 0 || dim % 2 != 0) {
    throw ConfigError("embedding dimension must be positive and even");
  }
  if (target_vocab == 0) throw ConfigError("target vocabulary is empty");
  if (source_vocab == 0) throw ConfigError("source vocabulary is empty");
  if (context == ContextMode::kNone && emission == EmissionMode::kLexicalAttention) {
    throw ConfigError("lexical attention needs a source sequence");
  }
  if ((context == ContextMode::kPositional || context == ContextMode::kAttention) &&
      max_source_len == 0) {
    throw ConfigError("max_source_len must be positive");
  }
}

Var ParamBinding::operator()(std::size_t index) {
  auto& slot = cache_.at(index);
  if (!slot) slot = tape_.parameter(params_[index]);
  return *slot;
}

Var ParamBinding::drop(Var x) {
  if (dropout_rate_ <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - dropout_rate_);
  ad::Tensor mask(x.rows(), x.cols());
  const double scale = 1.0 / (1.0 - dropout_rate_);
  for (double& m : mask.data()) m = keep(rng_) ? scale : 0.0;
  return ad::mul(x, tape_.constant(std::move(mask)));
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  topology_ = std::make_shared<const CompleteTreeTopology>(
      build_topology(config_.depth));
  const std::size_t m = topology_->vertex_count();

  ad::IndexGroups incoming(m);
  for (std::size_t s = 0; s < m; ++s) {
    for (VertexId u : topology_->incoming(VertexId::from_slot(s))) {
      incoming[s].push_back(u.slot());
    }
  }
  incoming_groups_ = std::make_shared<const ad::IndexGroups>(std::move(incoming));
  std::vector<std::size_t> right;
  for (VertexId v : topology_->right_boundary()) right.push_back(v.slot());
  right_boundary_group_ =
      std::make_shared<const ad::IndexGroups>(ad::IndexGroups{std::move(right)});
  left_boundary_mask_ = ad::Tensor(m, 1, kLogZero);
  for (VertexId v : topology_->left_boundary()) left_boundary_mask_[v.slot()] = 0.0;

  const std::size_t d = config_.dim;
  const std::size_t hidden = 2 * d;
  const std::size_t vs = config_.source_vocab;
  const std::size_t vt = config_.target_vocab;
  auto& P = params_;
  if (config_.context == ContextMode::kNone) {
    ids_.root_embedding = P.add("root_embedding", {d});
  } else {
    ids_.source_embedding = P.add("source_embedding", {vs, d});
    if (uses_positions()) {
      ids_.position_embedding =
          P.add("position_embedding", {config_.max_source_len, d});
      ids_.bind_w = P.add("encoder.bind_w", {d, d});
      ids_.bind_b = P.add("encoder.bind_b", {d});
    }
    if (config_.context == ContextMode::kAttention) {
      ids_.self_q = P.add("encoder.self_q", {d, d});
      ids_.self_k = P.add("encoder.self_k", {d, d});
      ids_.self_v = P.add("encoder.self_v", {d, d});
      ids_.context_query = P.add("production.context_query", {d, d});
    }
    ids_.enc_w1 = P.add("encoder.w1", {d, hidden});
    ids_.enc_b1 = P.add("encoder.b1", {hidden});
    ids_.enc_w2 = P.add("encoder.w2", {hidden, d});
    ids_.enc_b2 = P.add("encoder.b2", {d});
  }
  ids_.prod_w1 = P.add("production.w1", {d, hidden});
  ids_.prod_u1 = P.add("production.u1", {d, hidden});
  ids_.prod_b1 = P.add("production.b1", {hidden});
  ids_.prod_w2 = P.add("production.w2", {hidden, 2 * d});
  ids_.prod_b2 = P.add("production.b2", {2 * d});
  ids_.prod_w3 = P.add("production.w3", {hidden, 2 * d});
  ids_.prod_b3 = P.add("production.b3", {2 * d});
  ids_.leaf_w = P.add("leaf.w", {d, 2});
  ids_.leaf_b = P.add("leaf.b", {2});
  if (config_.emission == EmissionMode::kMlp) {
    ids_.emit_w1 = P.add("emission.w1", {d, hidden});
    ids_.emit_b1 = P.add("emission.b1", {hidden});
    ids_.emit_w2 = P.add("emission.w2", {hidden, vt});
    ids_.emit_b2 = P.add("emission.b2", {vt});
  } else {
    ids_.query_w = P.add("lexical.query_w", {d, d});
    ids_.lexical_table = P.add("lexical.table", {vs, vt});
  }
  initialize();
}

void Model::initialize() {
  std::mt19937_64 rng(config_.seed);
  for (auto& p : params_) {
    if (p.shape.size() == 1 && p.name != "root_embedding") continue;  // bias
    const bool table = p.name == "source_embedding" ||
                       p.name == "position_embedding" ||
                       p.name == "root_embedding";
    if (table) {
      // Unit-variance lookups; with ±1/sqrt(d) tables the signal reaching
      // the production layernorm is about as small as its epsilon. The
      // lexical table feeds a softmax instead and keeps the small init.
      std::normal_distribution<double> dist(0.0, 1.0);
      for (double& x : p.values) x = dist(rng);
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.shape.front()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : p.values) x = dist(rng);
  }
}

RootState Model::encode_context(ParamBinding& p,
                                std::span<const TokenId> source) const {
  ad::Tape& tape = p.tape();
  if (config_.context == ContextMode::kNone) {
    Var root = p(ids_.root_embedding);
    return {root, tape.constant(ad::Tensor(1, config_.dim)), std::nullopt};
  }
  if (source.empty()) throw DomainError("source sequence is empty");
  std::vector<std::size_t> rows;
  rows.reserve(source.size());
  for (TokenId x : source) {
    if (x < 0 || static_cast<std::size_t>(x) >= config_.source_vocab) {
      throw DomainError("source token id " + std::to_string(x) +
                        " is outside the vocabulary");
    }
    rows.push_back(static_cast<std::size_t>(x));
  }
  Var embedded = ad::gather_rows(p(ids_.source_embedding), rows);
  if (uses_positions()) {
    if (source.size() > config_.max_source_len) {
      throw DomainError("source of length " + std::to_string(source.size()) +
                        " exceeds max_source_len " +
                        std::to_string(config_.max_source_len));
    }
    std::vector<std::size_t> positions(source.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    Var pos = ad::gather_rows(p(ids_.position_embedding), std::move(positions));
    Var x = p.drop(ad::add(embedded, pos));
    if (config_.context == ContextMode::kAttention) {
      x = ad::add(x, attend_self(p, x));
    }
    embedded = ad::tanh(ad::affine(x, p(ids_.bind_w), p(ids_.bind_b)));
  }
  Var pooled = ad::mean_rows(embedded);
  Var hidden = ad::relu(ad::affine(pooled, p(ids_.enc_w1), p(ids_.enc_b1)));
  Var root = ad::tanh(ad::affine(hidden, p(ids_.enc_w2), p(ids_.enc_b2)));
  if (config_.context == ContextMode::kAttention) return {root, root, embedded};
  return {root, root, std::nullopt};
}

Var Model::attend_self(ParamBinding& p, Var x) const {
  Var q = ad::matmul(x, p(ids_.self_q));
  Var k = ad::matmul(x, p(ids_.self_k));
  Var v = ad::matmul(x, p(ids_.self_v));
  Var weights = ad::softmax_rows(ad::scale(
      ad::matmul_transposed(q, k), 1.0 / std::sqrt(static_cast<double>(config_.dim))));
  return ad::matmul(weights, v);
}

Var Model::attend(ParamBinding& p, Var queries, Var memory) const {
  Var q = ad::matmul(queries, p(ids_.context_query));
  Var weights = ad::softmax_rows(ad::scale(
      ad::matmul_transposed(q, memory), 1.0 / std::sqrt(static_cast<double>(config_.dim))));
  return ad::matmul(weights, memory);
}

std::pair<Var, Var> Model::production_split(ParamBinding& p, Var h_parent,
                                            Var context) const {
  const std::size_t d = config_.dim;
  if (h_parent.cols() != d || context.cols() != d ||
      h_parent.rows() != context.rows()) {
    throw DomainError("production_split: expected n x " + std::to_string(d) +
                      " parent and context");
  }
  Var h = p.drop(ad::relu(ad::add_row(
      ad::add(ad::matmul(h_parent, p(ids_.prod_w1)),
              ad::matmul(context, p(ids_.prod_u1))),
      p(ids_.prod_b1))));
  Var candidates = ad::tanh(
      ad::layernorm_rows(ad::affine(h, p(ids_.prod_w2), p(ids_.prod_b2)), kLayerNormEps));
  Var gates = ad::sigmoid(ad::affine(h, p(ids_.prod_w3), p(ids_.prod_b3)));
  Var left = ad::gate_blend(ad::slice_cols(gates, 0, d),
                            ad::slice_cols(candidates, 0, d), h_parent);
  Var right = ad::gate_blend(ad::slice_cols(gates, d, d),
                             ad::slice_cols(candidates, d, d), h_parent);
  return {left, right};
}

VertexEmbeddings Model::expand(ParamBinding& p, const RootState& root) const {
  std::vector<Var> levels{root.embedding};
  for (int k = 0; k < config_.depth; ++k) {
    const Var& current = levels.back();
    Var context = root.memory ? attend(p, current, *root.memory)
                              : ad::repeat_rows(root.context, current.rows());
    auto [left, right] = production_split(p, current, context);
    levels.push_back(ad::interleave_rows(left, right));
  }
  Var all = levels.size() == 1 ? levels.front() : ad::concat_rows(levels);
  return {all, topology_->vertex_count(), root.memory};
}

HeadOutputs Model::heads(ParamBinding& p, const VertexEmbeddings& embeddings,
                         std::span<const TokenId> source) const {
  HeadOutputs out;
  Var leaf = ad::log_softmax_rows(
      ad::affine(embeddings.hidden, p(ids_.leaf_w), p(ids_.leaf_b)));
  // Column 0 is "split", column 1 is "leaf".
  out.log_one_minus_l = ad::slice_cols(leaf, 0, 1);
  out.log_l = ad::slice_cols(leaf, 1, 1);

  if (config_.emission == EmissionMode::kMlp) {
    Var hidden = ad::relu(
        ad::affine(embeddings.hidden, p(ids_.emit_w1), p(ids_.emit_b1)));
    out.log_emission = ad::log_softmax_rows(
        ad::affine(hidden, p(ids_.emit_w2), p(ids_.emit_b2)));
    return out;
  }

  if (source.empty()) {
    throw DomainError("lexical attention needs a non-empty source sequence");
  }
  std::vector<std::size_t> rows(source.begin(), source.end());
  for (std::size_t r : rows) {
    if (r >= config_.source_vocab) throw DomainError("source token out of range");
  }
  // Values are always context-free: each attended source token contributes
  // its own distribution over target tokens. Keys are the contextual
  // encodings when the encoder produces them, else the plain embeddings.
  Var keys = embeddings.memory ? *embeddings.memory
                               : ad::gather_rows(p(ids_.source_embedding), rows);
  Var queries = ad::matmul(embeddings.hidden, p(ids_.query_w));
  Var attention = ad::softmax_rows(
      ad::scale(ad::matmul_transposed(queries, keys),
                1.0 / std::sqrt(static_cast<double>(config_.dim))));
  Var values = ad::softmax_rows(ad::gather_rows(p(ids_.lexical_table), rows));
  out.log_emission = ad::log(ad::matmul(attention, values));
  return out;
}

HeadOutputs Model::forward(ParamBinding& p,
                           std::span<const TokenId> source) const {
  RootState root = encode_context(p, source);
  VertexEmbeddings embeddings = expand(p, root);
  return heads(p, embeddings, source);
}

Var Model::split_field_log_m(ParamBinding& p, const HeadOutputs& heads) const {
  (void)p;
  std::vector<Var> log_m_levels;
  Var parent_tilde;
  for (int k = 0; k <= config_.depth; ++k) {
    const std::size_t first = (std::size_t{1} << k) - 1;
    const std::size_t count = std::size_t{1} << k;
    Var log_l = ad::slice_rows(heads.log_l, first, count);
    Var log_split = ad::slice_rows(heads.log_one_minus_l, first, count);
    if (k == 0) {
      log_m_levels.push_back(log_l);
      parent_tilde = log_split;
      continue;
    }
    std::vector<std::size_t> parents(count);
    for (std::size_t i = 0; i < count; ++i) parents[i] = i / 2;
    Var inherited = ad::halve(ad::gather_rows(parent_tilde, std::move(parents)));
    log_m_levels.push_back(ad::add(inherited, log_l));
    parent_tilde = ad::add(inherited, log_split);
  }
  return log_m_levels.size() == 1 ? log_m_levels.front()
                                  : ad::concat_rows(log_m_levels);
}

Var Model::log_marginal(ParamBinding& p, const HeadOutputs& heads,
                        std::span<const TokenId> target) const {
  if (target.empty()) throw DomainError("target sequence is empty");
  const std::size_t m = topology_->vertex_count();
  const std::size_t vocab = config_.target_vocab;
  for (TokenId x : target) {
    if (x < 0 || static_cast<std::size_t>(x) >= vocab) {
      throw DomainError("target token id " + std::to_string(x) +
                        " is outside the vocabulary");
    }
  }
  Var log_m = split_field_log_m(p, heads);
  auto weights = [&](TokenId x) {
    std::vector<std::size_t> idx(m);
    for (std::size_t s = 0; s < m; ++s) idx[s] = s * vocab + static_cast<std::size_t>(x);
    return ad::add(ad::gather(heads.log_emission, std::move(idx)), log_m);
  };
  ad::Tape& tape = p.tape();
  Var column = ad::add(weights(target[0]), tape.constant(left_boundary_mask_));
  for (std::size_t n = 1; n < target.size(); ++n) {
    column = ad::add(weights(target[n]),
                     ad::logsumexp_groups(column, incoming_groups_));
  }
  return ad::logsumexp_groups(column, right_boundary_group_);
}

Var Model::nll(ad::Tape& tape, std::span<const TokenId> source,
               std::span<const TokenId> target, Dropout dropout) const {
  ParamBinding p(tape, params_, dropout);
  HeadOutputs h = forward(p, source);
  return ad::neg(log_marginal(p, h, target));
}

Prediction Model::predict(std::span<const TokenId> source) const {
  ad::Tape tape;
  ParamBinding p(tape, params_);
  HeadOutputs h = forward(p, source);
  const auto log_l = h.log_l.value().data();
  const auto log_split = h.log_one_minus_l.value().data();
  const auto& emission = h.log_emission.value();
  return Prediction{
      compute_split_field(*topology_, log_l, log_split),
      TokenLogProbs(emission.rows(), emission.cols(),
                    std::vector<double>(emission.data().begin(),
                                        emission.data().end()))};
}

}  // namespace ctree
