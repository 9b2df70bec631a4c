#include "rankex/aggregate.hpp"

#include <stdexcept>

namespace rankex {

BagRepresentation ave(std::span<const EncodedSentence> sentences) {
  if (sentences.empty()) throw std::invalid_argument("ave: empty bag");
  const size_t d = sentences[0].s.size();
  BagRepresentation rep;
  rep.mode = AggMode::kAve;
  rep.s.assign(d, 0.0);
  for (const auto& sent : sentences) add_scaled(rep.s, 1.0, sent.s);
  const double inv_n = 1.0 / static_cast<double>(sentences.size());
  for (double& v : rep.s) v *= inv_n;
  rep.weights.assign(sentences.size(), inv_n);
  return rep;
}

BagRepresentation att(std::span<const EncodedSentence> sentences, int class_c, const DenseMatrix& W,
                      double a) {
  if (sentences.empty()) throw std::invalid_argument("att: empty bag");
  if (class_c < 0 || class_c >= W.rows) throw std::invalid_argument("att: class index out of range");
  std::vector<double> e(sentences.size());
  for (size_t j = 0; j < sentences.size(); ++j) e[j] = a * dot(W.row(class_c), sentences[j].s);
  BagRepresentation rep;
  rep.mode = AggMode::kAtt;
  rep.query_class = class_c;
  rep.weights = softmax(e);
  rep.s.assign(sentences[0].s.size(), 0.0);
  for (size_t j = 0; j < sentences.size(); ++j) add_scaled(rep.s, rep.weights[j], sentences[j].s);
  return rep;
}

void aggregate_backward(std::span<const double> grad_bag, const BagRepresentation& rep,
                        std::span<const EncodedSentence> sentences, const DenseMatrix& W, double a,
                        std::vector<std::vector<double>>* grad_sentences, DenseMatrix* grad_W) {
  if (rep.weights.size() != sentences.size() || grad_sentences->size() != sentences.size()) {
    throw std::invalid_argument("aggregate_backward: cache does not match inputs");
  }
  const size_t n = sentences.size();
  if (rep.mode == AggMode::kAve) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t j = 0; j < n; ++j) add_scaled((*grad_sentences)[j], inv_n, grad_bag);
    return;
  }
  // Direct path of the weighted sum.
  for (size_t j = 0; j < n; ++j) add_scaled((*grad_sentences)[j], rep.weights[j], grad_bag);
  // Path through alpha: dL/de_j = alpha_j (g.s_j - sum_i alpha_i g.s_i),
  // then e_j = a * W[c].s_j fans out to both s_j and W[c].
  std::vector<double> g_dot_s(n);
  double mix = 0.0;
  for (size_t j = 0; j < n; ++j) {
    g_dot_s[j] = dot(grad_bag, sentences[j].s);
    mix += rep.weights[j] * g_dot_s[j];
  }
  auto w_row = W.row(rep.query_class);
  auto gw_row = grad_W->row(rep.query_class);
  for (size_t j = 0; j < n; ++j) {
    const double grad_e = rep.weights[j] * (g_dot_s[j] - mix);
    add_scaled((*grad_sentences)[j], grad_e * a, w_row);
    add_scaled(gw_row, grad_e * a, sentences[j].s);
  }
}

}  // namespace rankex
