#pragma once

#include "rankex/encoder.hpp"

namespace rankex {

enum class AggMode { kAve, kAtt };

// One bag-level representation. ATT records the query class and the softmax
// weights for backprop and inspection; AVE stores uniform 1/n weights.
struct BagRepresentation {
  std::vector<double> s;
  AggMode mode = AggMode::kAve;
  int query_class = -1;
  std::vector<double> weights;
};

// Elementwise mean of the sentence embeddings.
BagRepresentation ave(std::span<const EncodedSentence> sentences);

// Attention aggregation: e_j = a * W[c] . s_j, alpha = softmax(e),
// s = sum_j alpha_j s_j.
BagRepresentation att(std::span<const EncodedSentence> sentences, int class_c, const DenseMatrix& W,
                      double a);

// Distributes d(loss)/d(rep.s) to each sentence embedding; for ATT also
// through the softmax weights into W[query_class]. grad_sentences[j] and
// grad_W must be pre-sized; contributions are accumulated.
void aggregate_backward(std::span<const double> grad_bag, const BagRepresentation& rep,
                        std::span<const EncodedSentence> sentences, const DenseMatrix& W, double a,
                        std::vector<std::vector<double>>* grad_sentences, DenseMatrix* grad_W);

}  // namespace rankex
