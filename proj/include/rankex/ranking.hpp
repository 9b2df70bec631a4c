#pragma once

#include "rankex/aggregate.hpp"
#include "rankex/model.hpp"

namespace rankex {

struct RankingConfig {
  double rho = 2.0;
  double sigma_plus = 2.5;
  double sigma_minus = 0.5;
  bool relieve_nr = true;
  double att_bias = 0.5;  // the fixed `a` factor of attention
};

// One active hinge: coeff = dG/dF(reps[rep], cls). Positive hinges carry
// -rho, negative hinges +rho (times the Variant-1 multiplier).
struct LossTerm {
  int rep;
  int cls;
  double coeff;
};

struct LossReport {
  double value = 0.0;
  DenseMatrix scores;           // num_reps x num_classes score table F
  std::vector<int> negatives;   // selected c- per representation
  std::vector<LossTerm> terms;  // active hinges only
};

// F(s, c) = W[c] . s
double score(std::span<const double> s, int c, const DenseMatrix& W);
std::vector<double> score_all(std::span<const double> s, const DenseMatrix& W);

// Highest-scoring class outside `positives` (ties to lowest index). NR is a
// legal negative. Throws std::invalid_argument when no negative class exists.
int select_negative(std::span<const double> scores, const std::vector<int>& positives);

// Variant-1 (AVE): one shared representation; a single negative class; the
// negative hinge carries a |L_k| multiplier. Under NR relief the NR positive
// term is skipped and the multiplier counts non-NR positives (floored at 1 so
// NR-only bags still train the selected negative down).
LossReport loss_variant1(const std::vector<int>& labels, const BagRepresentation& rep,
                         const DenseMatrix& W, const RankingConfig& cfg, int nr_index);

// Variant-2 (ATT): reps[i] is the representation queried by labels[i]; each
// positive ranks itself against its own top negative.
LossReport loss_variant2(const std::vector<int>& labels, std::span<const BagRepresentation> reps,
                         const DenseMatrix& W, const RankingConfig& cfg, int nr_index);

// Variant-3 (ExATT): every query representation is shared across all positive
// labels; one negative per query.
LossReport loss_variant3(const std::vector<int>& labels, std::span<const BagRepresentation> reps,
                         const DenseMatrix& W, const RankingConfig& cfg, int nr_index);

// Full per-bag forward pass: encodes every mention, builds the variant's
// representations (AVE for 1, per-label ATT queries for 2/3) and the loss.
// rng supplies dropout masks and may be null when training is false.
struct BagForward {
  int variant = 1;
  std::vector<EncodedSentence> sentences;
  std::vector<BagRepresentation> reps;
  LossReport report;
};

BagForward bag_forward(const MentionBag& bag, const ModelParams& params, const RankingConfig& cfg,
                       int variant, int nr_index, Rng* rng, double dropout_p, bool training);

// Subgradients of the bag loss into `grads`: active positive hinges push
// -rho * dF, active negative hinges +rho * (multiplier) * dF, through the
// aggregation and encoder backward passes. The argmax negative selection is
// held constant during differentiation.
void bag_backward(const BagForward& fwd, const MentionBag& bag, const ModelParams& params,
                  const RankingConfig& cfg, ModelParams* grads);

}  // namespace rankex
