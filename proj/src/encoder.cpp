#include "rankex/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace rankex {

DenseMatrix embed_tokens(const Mention& m, const EncoderParams& params) {
  const int n = static_cast<int>(m.tokens.size());
  const int d1 = params.d1();
  const int d2 = params.d2();
  const auto pos = position_features(m, params.clip());
  DenseMatrix q(n, d1 + 2 * d2);
  for (int i = 0; i < n; ++i) {
    const int tok = m.tokens[i];
    if (tok < 0 || tok >= params.V.rows) throw std::invalid_argument("embed_tokens: token id out of range");
    auto row = q.row(i);
    auto word = params.V.row(tok);
    std::copy(word.begin(), word.end(), row.begin());
    for (int ch = 0; ch < 2; ++ch) {
      auto p = params.p_table(ch).row(pos[i][ch]);
      std::copy(p.begin(), p.end(), row.begin() + d1 + ch * d2);
    }
  }
  return q;
}

DenseMatrix convolve(const DenseMatrix& q, const EncoderParams& params) {
  const int n = q.rows;
  const int d_s = params.d_s();
  const int d_win = params.d_win();
  if (q.cols != params.d_w()) throw std::invalid_argument("convolve: q width does not match kernels");
  DenseMatrix out(d_s, n);
  for (int k = 0; k < d_s; ++k) {
    const DenseMatrix& kernel = params.kernels[k];
    for (int i = 0; i < n; ++i) {
      double acc = params.bias[k];
      const int rmax = std::min(d_win, n - i);
      for (int r = 0; r < rmax; ++r) acc += dot(q.row(i + r), kernel.row(r));
      out.at(k, i) = acc;
    }
  }
  return out;
}

void piecewise_pool(const DenseMatrix& conv, int e1_pos, int e2_pos, std::vector<double>* o,
                    std::vector<int>* pool_argmax) {
  const int n = conv.cols;
  const int d_s = conv.rows;
  const int p_lo = std::min(e1_pos, e2_pos);
  const int p_hi = std::max(e1_pos, e2_pos);
  if (p_lo < 0 || p_hi >= n || p_lo == p_hi) throw std::invalid_argument("piecewise_pool: bad entity positions");
  // 0-based half-open segment bounds: [0,p_lo+1), [p_lo+1,p_hi+1), [p_hi+1,n)
  const int bounds[4] = {0, p_lo + 1, p_hi + 1, n};
  o->assign(static_cast<size_t>(d_s) * 3, 0.0);
  pool_argmax->assign(static_cast<size_t>(d_s) * 3, -1);
  for (int k = 0; k < d_s; ++k) {
    for (int j = 0; j < 3; ++j) {
      const int lo = bounds[j], hi = bounds[j + 1];
      if (lo >= hi) continue;  // empty segment pools to 0
      int best = lo;
      for (int i = lo + 1; i < hi; ++i) {
        if (conv.at(k, i) > conv.at(k, best)) best = i;
      }
      (*o)[k * 3 + j] = conv.at(k, best);
      (*pool_argmax)[k * 3 + j] = best;
    }
  }
}

EncodedSentence finish(std::vector<double> o, std::vector<int> pool_argmax, Rng* rng,
                       double dropout_p, bool training) {
  if (dropout_p <= 0.0 || dropout_p > 1.0) throw std::invalid_argument("finish: dropout_p must be in (0,1]");
  EncodedSentence enc;
  enc.mask.assign(o.size(), 1.0);
  if (training) {
    if (rng == nullptr) throw std::invalid_argument("finish: training requires an rng");
    for (double& h : enc.mask) h = rng->bernoulli(dropout_p) ? 1.0 / dropout_p : 0.0;
  }
  enc.s.resize(o.size());
  for (size_t i = 0; i < o.size(); ++i) enc.s[i] = std::tanh(o[i]) * enc.mask[i];
  enc.o = std::move(o);
  enc.pool_argmax = std::move(pool_argmax);
  return enc;
}

EncodedSentence encode_sentence(const Mention& m, const EncoderParams& params, Rng* rng,
                                double dropout_p, bool training) {
  const DenseMatrix q = embed_tokens(m, params);
  const DenseMatrix conv = convolve(q, params);
  std::vector<double> o;
  std::vector<int> pool_argmax;
  piecewise_pool(conv, m.e1_pos, m.e2_pos, &o, &pool_argmax);
  return finish(std::move(o), std::move(pool_argmax), rng, dropout_p, training);
}

void encoder_backward(std::span<const double> grad_s, const EncodedSentence& enc, const Mention& m,
                      const EncoderParams& params, EncoderParams* grads) {
  const int d_s = params.d_s();
  const int n = static_cast<int>(m.tokens.size());
  if (static_cast<int>(enc.o.size()) != 3 * d_s || static_cast<int>(grad_s.size()) != 3 * d_s ||
      enc.pool_argmax.size() != enc.o.size()) {
    throw std::invalid_argument("encoder_backward: cache does not match parameters");
  }
  const int d1 = params.d1();
  const int d2 = params.d2();
  const int d_win = params.d_win();
  const auto pos = position_features(m, params.clip());
  const DenseMatrix q = embed_tokens(m, params);

  // grad wrt conv outputs is sparse: only the pooled argmax positions receive
  // gradient, through tanh' and the dropout mask.
  std::vector<double> grad_q(q.size(), 0.0);
  for (int k = 0; k < d_s; ++k) {
    DenseMatrix& gk = grads->kernels[k];
    for (int j = 0; j < 3; ++j) {
      const int idx = k * 3 + j;
      const int i = enc.pool_argmax[idx];
      if (i < 0) continue;
      if (i >= n) throw std::invalid_argument("encoder_backward: cached argmax out of range");
      const double t = std::tanh(enc.o[idx]);
      const double g = grad_s[idx] * enc.mask[idx] * (1.0 - t * t);
      if (g == 0.0) continue;
      grads->bias[k] += g;
      const int rmax = std::min(d_win, n - i);
      for (int r = 0; r < rmax; ++r) {
        add_scaled(gk.row(r), g, q.row(i + r));
        add_scaled({grad_q.data() + static_cast<size_t>(i + r) * q.cols, static_cast<size_t>(q.cols)},
                   g, params.kernels[k].row(r));
      }
    }
  }

  // Route token-matrix gradients into the embedding rows that produced them.
  for (int i = 0; i < n; ++i) {
    const double* gq = grad_q.data() + static_cast<size_t>(i) * q.cols;
    add_scaled(grads->V.row(m.tokens[i]), 1.0, {gq, static_cast<size_t>(d1)});
    DenseMatrix& gp1 = grads->P;
    DenseMatrix& gp2 = params.separate_p2() ? grads->P2 : grads->P;
    add_scaled(gp1.row(pos[i][0]), 1.0, {gq + d1, static_cast<size_t>(d2)});
    add_scaled(gp2.row(pos[i][1]), 1.0, {gq + d1 + d2, static_cast<size_t>(d2)});
  }
}

}  // namespace rankex
