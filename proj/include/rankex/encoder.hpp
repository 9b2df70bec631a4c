#pragma once

#include "rankex/corpus.hpp"
#include "rankex/numkit.hpp"

namespace rankex {

// All learnable arrays of the sentence encoder. Widths are derived from the
// array shapes; d_w = d1 + 2*d2 must equal the kernel column count.
struct EncoderParams {
  DenseMatrix V;                     // vocab_size x d1, word embeddings
  DenseMatrix P;                     // (2*clip+1) x d2, distance-to-e1 embeddings
  DenseMatrix P2;                    // empty => shared with P; else distance-to-e2 table
  std::vector<DenseMatrix> kernels;  // d_s matrices, each d_win x d_w
  std::vector<double> bias;          // d_s

  int d1() const { return V.cols; }
  int d2() const { return P.cols; }
  int d_s() const { return static_cast<int>(kernels.size()); }
  int d_win() const { return kernels.empty() ? 0 : kernels[0].rows; }
  int d_w() const { return kernels.empty() ? 0 : kernels[0].cols; }
  int d_f() const { return 3 * d_s(); }
  int clip() const { return (P.rows - 1) / 2; }
  bool separate_p2() const { return !P2.empty(); }
  const DenseMatrix& p_table(int channel) const { return (channel == 1 && separate_p2()) ? P2 : P; }
};

// Sentence embedding plus the forward-pass state needed for the backward pass.
struct EncodedSentence {
  std::vector<double> s;        // 3*d_s, final representation
  std::vector<double> o;        // 3*d_s, pooled pre-activation
  std::vector<double> mask;     // 3*d_s, dropout vector (already 1/keep scaled); all ones at inference
  std::vector<int> pool_argmax; // 3*d_s, convolution-output index of each pooled max, -1 for empty segment
};

// Token matrix q: row i = concat(V[token_i], P[dist-to-e1], P2[dist-to-e2]).
DenseMatrix embed_tokens(const Mention& m, const EncoderParams& params);

// out[k][i] = <q[i : i+d_win-1], K_k> + bias[k] for i = 0..n-1; window rows past
// the end of the sentence are zero, so every token index has an output and
// entity positions are valid pooling boundaries.
DenseMatrix convolve(const DenseMatrix& q, const EncoderParams& params);

// Max over the three segments delimited by the entity positions. With
// p_lo = min(e1,e2)+1 and p_hi = max(e1,e2)+1 in 1-based output coordinates the
// segments are [1..p_lo], [p_lo+1..p_hi], [p_hi+1..n]; an empty third segment
// pools to 0. o is laid out kernel-major: o[k*3 + j]. argmax indices (or -1)
// are recorded per (kernel, segment).
void piecewise_pool(const DenseMatrix& conv, int e1_pos, int e2_pos, std::vector<double>* o,
                    std::vector<int>* pool_argmax);

// s = tanh(o) * h. During training h is Bernoulli(keep=dropout_p) scaled by
// 1/dropout_p (inverted dropout); at inference h is all ones.
EncodedSentence finish(std::vector<double> o, std::vector<int> pool_argmax, Rng* rng,
                       double dropout_p, bool training);

// Full forward pass for one mention. rng may be null when training is false.
EncodedSentence encode_sentence(const Mention& m, const EncoderParams& params, Rng* rng,
                                double dropout_p, bool training);

// Accumulates d(loss)/d(params) given d(loss)/d(s) into `grads` (same shapes
// as `params`). Throws std::invalid_argument on a cache/mention mismatch.
void encoder_backward(std::span<const double> grad_s, const EncodedSentence& enc, const Mention& m,
                      const EncoderParams& params, EncoderParams* grads);

}  // namespace rankex
