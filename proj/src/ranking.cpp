#include "rankex/ranking.hpp"

#include <algorithm>
#include <stdexcept>

namespace rankex {

double score(std::span<const double> s, int c, const DenseMatrix& W) {
  if (static_cast<int>(s.size()) != W.cols) throw std::invalid_argument("score: dimension mismatch");
  if (c < 0 || c >= W.rows) throw std::invalid_argument("score: class index out of range");
  return dot(W.row(c), s);
}

std::vector<double> score_all(std::span<const double> s, const DenseMatrix& W) {
  if (static_cast<int>(s.size()) != W.cols) throw std::invalid_argument("score_all: dimension mismatch");
  std::vector<double> out(W.rows);
  for (int c = 0; c < W.rows; ++c) out[c] = dot(W.row(c), s);
  return out;
}

int select_negative(std::span<const double> scores, const std::vector<int>& positives) {
  int best = -1;
  for (int c = 0; c < static_cast<int>(scores.size()); ++c) {
    if (std::find(positives.begin(), positives.end(), c) != positives.end()) continue;
    if (best < 0 || scores[c] > scores[best]) best = c;
  }
  if (best < 0) throw std::invalid_argument("select_negative: no negative class available");
  return best;
}

namespace {

void check_labels(const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("loss: empty label set");
}

}  // namespace

LossReport loss_variant1(const std::vector<int>& labels, const BagRepresentation& rep,
                         const DenseMatrix& W, const RankingConfig& cfg, int nr_index) {
  check_labels(labels);
  LossReport rpt;
  rpt.scores = DenseMatrix(1, W.rows);
  const std::vector<double> f = score_all(rep.s, W);
  std::copy(f.begin(), f.end(), rpt.scores.row(0).begin());

  int counted_positives = 0;
  for (int cp : labels) {
    if (cfg.relieve_nr && cp == nr_index) continue;
    ++counted_positives;
    const double margin = cfg.sigma_plus - f[cp];
    if (margin > 0.0) {
      rpt.value += cfg.rho * margin;
      rpt.terms.push_back({0, cp, -cfg.rho});
    }
  }
  // |L_k| balances the single negative term against the positive sum; with
  // relief it counts non-NR positives, floored at 1 so an NR-only bag still
  // pushes its top negative below -sigma_minus.
  const double multiplier = std::max(1, counted_positives);
  const int cn = select_negative(f, labels);
  rpt.negatives.push_back(cn);
  const double nmargin = cfg.sigma_minus + f[cn];
  if (nmargin > 0.0) {
    rpt.value += cfg.rho * multiplier * nmargin;
    rpt.terms.push_back({0, cn, cfg.rho * multiplier});
  }
  return rpt;
}

LossReport loss_variant2(const std::vector<int>& labels, std::span<const BagRepresentation> reps,
                         const DenseMatrix& W, const RankingConfig& cfg, int nr_index) {
  check_labels(labels);
  if (reps.size() != labels.size()) {
    throw std::invalid_argument("loss_variant2: one representation per positive required");
  }
  LossReport rpt;
  rpt.scores = DenseMatrix(static_cast<int>(labels.size()), W.rows);
  for (size_t i = 0; i < labels.size(); ++i) {
    const int cp = labels[i];
    const std::vector<double> f = score_all(reps[i].s, W);
    std::copy(f.begin(), f.end(), rpt.scores.row(static_cast<int>(i)).begin());
    if (!(cfg.relieve_nr && cp == nr_index)) {
      const double margin = cfg.sigma_plus - f[cp];
      if (margin > 0.0) {
        rpt.value += cfg.rho * margin;
        rpt.terms.push_back({static_cast<int>(i), cp, -cfg.rho});
      }
    }
    const int cn = select_negative(f, labels);
    rpt.negatives.push_back(cn);
    const double nmargin = cfg.sigma_minus + f[cn];
    if (nmargin > 0.0) {
      rpt.value += cfg.rho * nmargin;
      rpt.terms.push_back({static_cast<int>(i), cn, cfg.rho});
    }
  }
  return rpt;
}

LossReport loss_variant3(const std::vector<int>& labels, std::span<const BagRepresentation> reps,
                         const DenseMatrix& W, const RankingConfig& cfg, int nr_index) {
  check_labels(labels);
  if (reps.size() != labels.size()) {
    throw std::invalid_argument("loss_variant3: one representation per query label required");
  }
  LossReport rpt;
  rpt.scores = DenseMatrix(static_cast<int>(labels.size()), W.rows);
  for (size_t i = 0; i < labels.size(); ++i) {
    const std::vector<double> f = score_all(reps[i].s, W);
    std::copy(f.begin(), f.end(), rpt.scores.row(static_cast<int>(i)).begin());
    // The query representation is shared across every positive label.
    for (int cp : labels) {
      if (cfg.relieve_nr && cp == nr_index) continue;
      const double margin = cfg.sigma_plus - f[cp];
      if (margin > 0.0) {
        rpt.value += cfg.rho * margin;
        rpt.terms.push_back({static_cast<int>(i), cp, -cfg.rho});
      }
    }
    const int cn = select_negative(f, labels);
    rpt.negatives.push_back(cn);
    const double nmargin = cfg.sigma_minus + f[cn];
    if (nmargin > 0.0) {
      rpt.value += cfg.rho * nmargin;
      rpt.terms.push_back({static_cast<int>(i), cn, cfg.rho});
    }
  }
  return rpt;
}

BagForward bag_forward(const MentionBag& bag, const ModelParams& params, const RankingConfig& cfg,
                       int variant, int nr_index, Rng* rng, double dropout_p, bool training) {
  if (variant < 1 || variant > 3) throw std::invalid_argument("bag_forward: variant must be 1, 2 or 3");
  if (bag.mentions.empty()) throw std::invalid_argument("bag_forward: empty bag");
  BagForward fwd;
  fwd.variant = variant;
  fwd.sentences.reserve(bag.mentions.size());
  for (const auto& m : bag.mentions) {
    fwd.sentences.push_back(encode_sentence(m, params.enc, rng, dropout_p, training));
  }
  if (variant == 1) {
    fwd.reps.push_back(ave(fwd.sentences));
    fwd.report = loss_variant1(bag.labels, fwd.reps[0], params.W, cfg, nr_index);
  } else {
    for (int label : bag.labels) {
      fwd.reps.push_back(att(fwd.sentences, label, params.W, cfg.att_bias));
    }
    fwd.report = variant == 2 ? loss_variant2(bag.labels, fwd.reps, params.W, cfg, nr_index)
                              : loss_variant3(bag.labels, fwd.reps, params.W, cfg, nr_index);
  }
  return fwd;
}

void bag_backward(const BagForward& fwd, const MentionBag& bag, const ModelParams& params,
                  const RankingConfig& cfg, ModelParams* grads) {
  if (fwd.sentences.size() != bag.mentions.size()) {
    throw std::invalid_argument("bag_backward: forward cache does not match bag");
  }
  const int d_f = params.enc.d_f();
  // dG/dF terms fan out to W rows directly and to each representation.
  std::vector<std::vector<double>> grad_reps(fwd.reps.size(), std::vector<double>(d_f, 0.0));
  for (const LossTerm& t : fwd.report.terms) {
    add_scaled(grads->W.row(t.cls), t.coeff, fwd.reps[t.rep].s);
    add_scaled(grad_reps[t.rep], t.coeff, params.W.row(t.cls));
  }
  std::vector<std::vector<double>> grad_sentences(fwd.sentences.size(), std::vector<double>(d_f, 0.0));
  for (size_t r = 0; r < fwd.reps.size(); ++r) {
    aggregate_backward(grad_reps[r], fwd.reps[r], fwd.sentences, params.W, cfg.att_bias,
                       &grad_sentences, &grads->W);
  }
  for (size_t j = 0; j < fwd.sentences.size(); ++j) {
    encoder_backward(grad_sentences[j], fwd.sentences[j], bag.mentions[j], params.enc, &grads->enc);
  }
}

}  // namespace rankex
