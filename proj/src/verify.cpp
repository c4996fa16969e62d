#include "ctree/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>

#include "ctree/decoder.hpp"
#include "ctree/gradcheck.hpp"
#include "ctree/log_math.hpp"
#include "ctree/marginalizer.hpp"
#include "ctree/model.hpp"
#include "ctree/oracle.hpp"
#include "ctree/prior.hpp"
#include "ctree/topology.hpp"

namespace ctree::verify {

namespace {

// Brute-force enumeration beyond this depth takes minutes.
constexpr int kEnumerationDepthCap = 4;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::vector<double> random_log_l(const CompleteTreeTopology& topo,
                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<double> out(topo.vertex_count());
  for (auto& x : out) x = std::log(u(rng));
  return out;
}

TokenLogProbs random_table(const CompleteTreeTopology& topo, std::size_t vocab,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<double> v(topo.vertex_count() * vocab);
  for (std::size_t r = 0; r < topo.vertex_count(); ++r) {
    std::vector<double> row(vocab);
    for (auto& x : row) x = n(rng);
    const double z = log_sum_exp(row);
    for (std::size_t c = 0; c < vocab; ++c) v[r * vocab + c] = row[c] - z;
  }
  return TokenLogProbs(topo.vertex_count(), vocab, std::move(v));
}

std::vector<TokenId> random_tokens(std::size_t n, std::size_t vocab,
                                   std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, static_cast<int>(vocab) - 1);
  std::vector<TokenId> out(n);
  for (auto& x : out) x = u(rng);
  return out;
}

// |a - b|, treating two log-zeros as equal and one as infinitely far.
double log_gap(double a, double b) {
  if (is_log_zero(a) && is_log_zero(b)) return 0.0;
  if (is_log_zero(a) || is_log_zero(b)) return INFINITY;
  return std::abs(a - b);
}

int clamp_depth(int d) { return std::min(d, kEnumerationDepthCap); }

CheckResult begin_check(std::string name, double tol) {
  CheckResult r;
  r.name = std::move(name);
  r.passed = true;
  r.tolerance = tol;
  return r;
}

}  // namespace

CheckResult marginal_vs_enumeration(const Options& o, double tol) {
  Timer timer;
  auto r = begin_check("marginal vs enumeration", tol);
  std::mt19937_64 rng(o.seed);
  for (int d = o.min_depth; d <= clamp_depth(o.max_depth); ++d) {
    const auto topo = build_topology(d);
    for (std::size_t n = 1; n <= o.max_length; ++n) {
      for (std::size_t t = 0; t < o.trials; ++t) {
        const auto field = compute_split_field(topo, random_log_l(topo, rng));
        const auto table = random_table(topo, 4, rng);
        const auto grid = EmissionGrid::gather(table, random_tokens(n, 4, rng));
        const double dp = marginal_log_likelihood(field, grid, n).log_marginal();
        const double brute = oracle::log_marginal(field, grid, n);
        r.max_error = std::max(r.max_error, log_gap(dp, brute));
        ++r.cases;
      }
    }
  }
  r.passed = r.max_error < tol;
  r.seconds = timer.seconds();
  return r;
}

CheckResult prior_normalization(const Options& o, double tol) {
  Timer timer;
  auto r = begin_check("prior normalization", tol);
  std::mt19937_64 rng(o.seed + 1);
  const std::size_t per_depth = std::max<std::size_t>(1, o.trials / 10);
  for (int d = o.min_depth; d <= clamp_depth(o.max_depth); ++d) {
    const auto topo = build_topology(d);
    for (std::size_t t = 0; t < per_depth; ++t) {
      const auto field =
          compute_split_field(topo, clamp_bottom_level(topo, random_log_l(topo, rng)));
      const double mass = std::exp(oracle::prior_total_log_mass(field));
      r.max_error = std::max(r.max_error, std::abs(mass - 1.0));
      ++r.cases;
    }
  }
  r.passed = r.max_error < tol;
  r.seconds = timer.seconds();
  return r;
}

CheckResult leaf_product_identity(const Options& o, std::size_t pairs, double tol) {
  Timer timer;
  auto r = begin_check("leaf product identity", tol);
  std::mt19937_64 rng(o.seed + 2);
  const int lo = o.min_depth, hi = clamp_depth(o.max_depth);
  std::vector<CompleteTreeTopology> topos;
  std::vector<std::vector<InternalTree>> trees;
  for (int d = lo; d <= hi; ++d) {
    topos.push_back(build_topology(d));
    trees.push_back(oracle::all_internal_trees(topos.back()));
  }
  if (topos.empty()) {
    r.passed = false;
    r.detail = "empty depth range";
    return r;
  }
  std::uniform_int_distribution<std::size_t> pick_depth(0, topos.size() - 1);
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t k = pick_depth(rng);
    const auto field = compute_split_field(topos[k], random_log_l(topos[k], rng));
    std::uniform_int_distribution<std::size_t> pick_tree(0, trees[k].size() - 1);
    const auto& tree = trees[k][pick_tree(rng)];
    r.max_error = std::max(r.max_error,
                           log_gap(tree_probability_from_m(field, tree),
                                   tree_probability_pi(field, tree)));
    ++r.cases;
  }
  r.passed = r.max_error < tol;
  r.seconds = timer.seconds();
  return r;
}

CheckResult successive_leaves(const Options& o) {
  Timer timer;
  auto r = begin_check("successive leaves", 0.0);
  std::ostringstream detail;
  for (int d = std::min(o.min_depth, 0); d <= clamp_depth(o.max_depth); ++d) {
    const auto topo = build_topology(d);
    const std::set<Transition> built(topo.transitions().begin(),
                                     topo.transitions().end());
    if (built != oracle::harvest_adjacent_pairs(topo)) {
      r.passed = false;
      detail << "depth " << d << " differs; ";
    }
    ++r.cases;
  }
  const auto topo2 = build_topology(2);
  std::set<std::pair<std::uint32_t, std::uint32_t>> labels;
  for (auto [a, b] : topo2.transitions()) {
    labels.emplace(topo2.display_index(a), topo2.display_index(b));
  }
  const std::set<std::pair<std::uint32_t, std::uint32_t>> expected = {
      {1, 3}, {5, 7}, {2, 6}, {2, 5}, {3, 6}, {3, 5}};
  if (labels != expected) {
    r.passed = false;
    detail << "depth-2 labels differ; ";
  }
  const auto n3 = enumerate_internal_trees(topo2, 3).size();
  if (n3 != 2) {
    r.passed = false;
    detail << "depth 2 has " << n3 << " three-leaf trees; ";
  }
  r.cases += 2;
  r.max_error = r.passed ? 0.0 : 1.0;
  r.detail = detail.str();
  r.seconds = timer.seconds();
  return r;
}

CheckResult decoder_vs_exhaustive(const Options& o, std::size_t instances) {
  Timer timer;
  auto r = begin_check("decoder vs exhaustive", 1e-12);
  std::mt19937_64 rng(o.seed + 3);
  const int lo = std::max(o.min_depth, 0);
  const int hi = std::min(o.max_depth, 3);
  std::ostringstream detail;
  std::size_t joint = 0, attempts = 0;
  while (joint < instances && attempts < 20 * instances && lo <= hi) {
    const int depth = lo + static_cast<int>(attempts % static_cast<std::size_t>(hi - lo + 1));
    const std::size_t vocab = 2 + attempts % 2;
    ++attempts;
    const auto topo = build_topology(depth);
    const auto field = compute_split_field(topo, random_log_l(topo, rng));
    const auto table = random_table(topo, vocab, rng);
    const auto brute = oracle::decode_joint(field, table, topo.max_leaves());
    if (brute.log_joint - brute.runner_up < 1e-9) continue;  // not tie-free
    ++joint;
    const auto got = decode_joint(field, table);
    const auto wide = decode_joint(field, table, 10 * topo.max_leaves());
    const bool same = got.tokens == brute.tokens && got.tree == brute.tree &&
                      got.log_joint == score_joint(field, table, brute.tree, brute.tokens);
    const bool stable = wide.tokens == got.tokens && wide.tree == got.tree &&
                        wide.log_joint == got.log_joint;
    r.max_error = std::max(r.max_error, std::abs(got.log_joint - brute.log_joint));
    if (!same) {
      r.passed = false;
      detail << "decode mismatch at depth " << depth << "; ";
    }
    if (!stable) {
      r.passed = false;
      detail << "larger cap changed the result at depth " << depth << "; ";
    }

    // Best tree for a fixed sentence of every feasible length.
    for (std::size_t n = 1; n <= std::min<std::size_t>(6, topo.max_leaves()); ++n) {
      const auto grid = EmissionGrid::gather(table, random_tokens(n, vocab, rng));
      const auto bt = oracle::best_tree(field, grid, n);
      const auto out = best_tree_given_tokens(field, grid, n);
      r.max_error = std::max(r.max_error, std::abs(out.log_joint - bt.log_joint));
      if (bt.log_joint - bt.runner_up >= 1e-9 &&
          (out.tree != bt.tree || out.log_joint != score_joint(field, grid, bt.tree))) {
        r.passed = false;
        detail << "best tree mismatch at depth " << depth << " n " << n << "; ";
      }
    }
  }
  if (joint < instances) {
    r.passed = false;
    detail << "only " << joint << " tie-free instances found; ";
  }
  r.cases = joint;
  r.passed = r.passed && r.max_error < r.tolerance;
  r.detail = detail.str();
  r.seconds = timer.seconds();
  return r;
}

CheckResult gradient_check(int depth, std::size_t examples, std::uint64_t seed,
                           double tol) {
  Timer timer;
  auto r = begin_check("gradient check", tol);
  std::mt19937_64 rng(seed + 4);
  std::ostringstream detail;
  std::size_t kinks = 0;
  const EmissionMode emissions[] = {EmissionMode::kMlp, EmissionMode::kLexicalAttention};
  const ContextMode contexts[] = {ContextMode::kMeanMlp, ContextMode::kPositional,
                                  ContextMode::kAttention};
  for (std::size_t i = 0; i < examples; ++i) {
    ModelConfig c;
    c.depth = depth;
    c.dim = 8;
    c.source_vocab = 7;
    c.target_vocab = 5;
    c.emission = emissions[i % 2];
    c.context = contexts[(i / 2) % 3];
    c.max_source_len = 8;
    c.seed = seed + i;
    Model model(c);
    std::uniform_int_distribution<std::size_t> src_len(1, 5);
    std::uniform_int_distribution<std::size_t> tgt_len(
        1, std::min<std::size_t>(8, std::size_t{1} << depth));
    const auto source = random_tokens(src_len(rng), c.source_vocab, rng);
    const auto target = random_tokens(tgt_len(rng), c.target_vocab, rng);
    ad::LossBuilder loss = [&](ad::Tape& tape) { return model.nll(tape, source, target); };
    ad::GradCheckOptions opts;
    opts.step = 1e-5;
    opts.tolerance = tol;
    opts.seed = seed + i;
    const auto report = ad::check_gradients(loss, model.params(), opts);
    if (report.max_relative_error > r.max_error) {
      r.max_error = report.max_relative_error;
      detail.str("");
      detail << "worst " << report.worst_parameter << "[" << report.worst_coordinate
             << "] analytic " << report.worst_analytic << " numeric "
             << report.worst_numeric << " (step/10: " << report.worst_numeric_fine
             << ")";
    }
    r.cases += report.coordinates_checked;
    kinks += report.kink_coordinates;
  }
  if (kinks > 0) {
    detail << (detail.str().empty() ? "" : "; ") << kinks
           << " coordinates left out: the +-step evaluations straddle a relu kink";
  }
  r.passed = r.max_error < tol;
  r.detail = detail.str();
  r.seconds = timer.seconds();
  return r;
}

CheckResult total_probability(int depth, std::size_t vocab, std::uint64_t seed,
                              double tol) {
  Timer timer;
  auto r = begin_check("total probability", tol);
  ModelConfig c;
  c.depth = depth;
  c.dim = 8;
  c.source_vocab = 1;
  c.target_vocab = vocab;
  c.context = ContextMode::kNone;
  c.seed = seed;
  Model model(c);
  const auto pred = model.predict({});
  const auto& topo = model.topology();
  const auto field =
      compute_split_field(topo, clamp_bottom_level(topo, pred.field.log_l_values()));
  std::vector<double> terms;
  for (std::size_t n = 1; n <= topo.max_leaves(); ++n) {
    std::vector<TokenId> seq(n, 0);
    while (true) {
      const auto grid = EmissionGrid::gather(pred.token_log_probs, seq);
      terms.push_back(marginal_log_likelihood(field, grid, n).log_marginal());
      std::size_t i = n;
      while (i > 0 && static_cast<std::size_t>(seq[i - 1]) + 1 == vocab) {
        seq[i - 1] = 0;
        --i;
      }
      if (i == 0) break;
      ++seq[i - 1];
    }
  }
  r.cases = terms.size();
  r.max_error = std::abs(std::exp(log_sum_exp(terms)) - 1.0);
  r.passed = r.max_error < tol;
  r.seconds = timer.seconds();
  return r;
}

std::vector<CheckResult> run_suite(const Options& o) {
  std::vector<CheckResult> out;
  out.push_back(successive_leaves(o));
  out.push_back(marginal_vs_enumeration(o));
  out.push_back(prior_normalization(o));
  out.push_back(leaf_product_identity(o));
  out.push_back(decoder_vs_exhaustive(o));
  out.push_back(gradient_check(std::max(o.max_depth, 1), 10, o.seed));
  out.push_back(total_probability(std::min(std::max(o.max_depth, 1), 3), 3, o.seed));
  return out;
}

std::string format_table(const std::vector<CheckResult>& results) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %-6s %8s %12s %10s %8s\n", "check",
                "result", "cases", "max_error", "tolerance", "seconds");
  out << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-24s %-6s %8zu %12.3e %10.1e %8.2f\n",
                  r.name.c_str(), r.passed ? "PASS" : "FAIL", r.cases, r.max_error,
                  r.tolerance, r.seconds);
    out << line;
    if (!r.detail.empty()) out << "    " << r.detail << '\n';
  }
  return out.str();
}

}  // namespace ctree::verify
