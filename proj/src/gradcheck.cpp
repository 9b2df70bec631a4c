#include "rankex/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rankex {

namespace {

MentionBag build_random_bag(const GradCheckSpec& spec, Rng* rng) {
  MentionBag bag;
  bag.tuple_id = "gradcheck";
  std::vector<int> classes;
  for (int c = 1; c < spec.num_classes; ++c) classes.push_back(c);  // non-NR
  rng->shuffle(classes);
  classes.resize(spec.num_positives);
  std::sort(classes.begin(), classes.end());
  bag.labels = classes;
  for (int i = 0; i < spec.num_sentences; ++i) {
    Mention m;
    const int n = spec.min_tokens + static_cast<int>(rng->below(spec.max_tokens - spec.min_tokens + 1));
    for (int t = 0; t < n; ++t) m.tokens.push_back(static_cast<int>(rng->below(spec.vocab_size)));
    m.e1_pos = static_cast<int>(rng->below(n));
    do {
      m.e2_pos = static_cast<int>(rng->below(n));
    } while (m.e2_pos == m.e1_pos);
    bag.mentions.push_back(std::move(m));
  }
  return bag;
}

// Rejects instances where a finite-difference step could cross a kink: hinge
// arguments near zero, near-tied pooling maxima, or a near-tied negative
// selection.
bool fd_safe(const BagForward& fwd, const MentionBag& bag, const ModelParams& params,
             const RankingConfig& cfg, int nr_index) {
  const double hinge_tol = 1e-3;
  const double tie_tol = 1e-4;
  const auto& scores = fwd.report.scores;
  for (int r = 0; r < scores.rows; ++r) {
    for (int cp : bag.labels) {
      if (cfg.relieve_nr && cp == nr_index) continue;
      if (std::abs(cfg.sigma_plus - scores.at(r, cp)) < hinge_tol) return false;
    }
    // every negative must clear the hinge boundary and the selected one must
    // win by a margin
    const int cn = fwd.report.negatives[r];
    if (std::abs(cfg.sigma_minus + scores.at(r, cn)) < hinge_tol) return false;
    for (int c = 0; c < scores.cols; ++c) {
      if (c == cn) continue;
      if (std::find(bag.labels.begin(), bag.labels.end(), c) != bag.labels.end()) continue;
      if (scores.at(r, cn) - scores.at(r, c) < hinge_tol) return false;
    }
  }
  // pooling maxima must be strict
  for (size_t j = 0; j < bag.mentions.size(); ++j) {
    const DenseMatrix q = embed_tokens(bag.mentions[j], params.enc);
    const DenseMatrix conv = convolve(q, params.enc);
    const auto& argmax = fwd.sentences[j].pool_argmax;
    const int e_lo = std::min(bag.mentions[j].e1_pos, bag.mentions[j].e2_pos);
    const int e_hi = std::max(bag.mentions[j].e1_pos, bag.mentions[j].e2_pos);
    const int bounds[4] = {0, e_lo + 1, e_hi + 1, conv.cols};
    for (int k = 0; k < conv.rows; ++k) {
      for (int seg = 0; seg < 3; ++seg) {
        const int best = argmax[k * 3 + seg];
        if (best < 0) continue;
        for (int i = bounds[seg]; i < bounds[seg + 1]; ++i) {
          if (i == best) continue;
          if (conv.at(k, best) - conv.at(k, i) < tie_tol) return false;
        }
      }
    }
  }
  return true;
}

}  // namespace

GradCheckResult run_gradcheck_instance(const GradCheckSpec& spec) {
  Rng rng(hash_combine(spec.seed, 0x67726164));
  const int nr_index = 0;
  ModelParams params = init_params(spec.dims, spec.vocab_size, spec.num_classes,
                                   hash_combine(spec.seed, 0x696e6974));
  const MentionBag bag = build_random_bag(spec, &rng);
  RankingConfig cfg;
  cfg.relieve_nr = spec.relieve_nr;

  GradCheckResult result;
  const BagForward fwd = bag_forward(bag, params, cfg, spec.variant, nr_index,
                                     nullptr, 1.0, false);
  if (!fd_safe(fwd, bag, params, cfg, nr_index)) return result;
  result.usable = true;

  ModelParams analytic = zeros_like(params);
  bag_backward(fwd, bag, params, cfg, &analytic);
  const std::vector<double> flat = flatten_params(params);
  const std::vector<double> flat_grad = flatten_params(analytic);

  for (const ParamGroup& group : param_groups(params)) {
    std::vector<double> x(flat.begin() + group.begin, flat.begin() + group.end);
    const std::span<const double> g(flat_grad.data() + group.begin, group.end - group.begin);
    auto f = [&](const std::vector<double>& xg) {
      std::vector<double> full = flat;
      std::copy(xg.begin(), xg.end(), full.begin() + group.begin);
      ModelParams p = zeros_like(params);
      unflatten_params(full, &p);
      return bag_forward(bag, p, cfg, spec.variant, nr_index, nullptr, 1.0, false).report.value;
    };
    const double err = grad_check(f, std::move(x), g, spec.eps);
    result.groups.push_back({group.name, err});
    result.max_rel_err = std::max(result.max_rel_err, err);
  }
  return result;
}

}  // namespace rankex
