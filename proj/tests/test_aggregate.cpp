#include <algorithm>
#include <stdexcept>
#include <cmath>

#include <doctest.h>

#include "rankex/aggregate.hpp"
#include "rankex/model.hpp"

using namespace rankex;

namespace {

EncodedSentence sentence(std::vector<double> s) {
  EncodedSentence e;
  e.s = std::move(s);
  e.o.assign(e.s.size(), 0.0);
  e.mask.assign(e.s.size(), 1.0);
  e.pool_argmax.assign(e.s.size(), 0);
  return e;
}

}  // namespace

TEST_CASE("ave is the elementwise mean") {
  std::vector<EncodedSentence> sents;
  sents.push_back(sentence({2.0, 4.0}));
  sents.push_back(sentence({0.0, 2.0}));
  auto rep = ave(sents);
  CHECK(rep.s == std::vector<double>{1.0, 3.0});
  CHECK(rep.weights == std::vector<double>{0.5, 0.5});
}

TEST_CASE("ave of a single sentence is the sentence") {
  std::vector<EncodedSentence> sents;
  sents.push_back(sentence({0.25, -1.0, 3.0}));
  auto rep = ave(sents);
  CHECK(rep.s == sents[0].s);
}

TEST_CASE("ave matches a sum/n oracle on random bags") {
  Rng rng(5);
  std::vector<EncodedSentence> sents;
  const int n = 5, d = 6;
  for (int i = 0; i < n; ++i) {
    std::vector<double> s(d);
    for (auto& v : s) v = rng.uniform(-3.0, 3.0);
    sents.push_back(sentence(std::move(s)));
  }
  auto rep = ave(sents);
  for (int j = 0; j < d; ++j) {
    double sum = 0.0;
    for (const auto& s : sents) sum += s.s[j];
    CHECK(std::abs(rep.s[j] - sum / n) <= 1e-12);
  }
}

TEST_CASE("ave and att reject empty bags") {
  DenseMatrix W(2, 3);
  CHECK_THROWS_AS(ave({}), std::invalid_argument);
  CHECK_THROWS_AS(att({}, 0, W, 0.5), std::invalid_argument);
}

TEST_CASE("att of identical sentences returns the sentence for any query") {
  std::vector<EncodedSentence> sents;
  for (int i = 0; i < 3; ++i) sents.push_back(sentence({0.4, -0.7, 1.1}));
  DenseMatrix W(2, 3);
  W.at(0, 0) = 1.0;
  W.at(1, 2) = -2.0;
  for (int c = 0; c < 2; ++c) {
    auto rep = att(sents, c, W, 0.5);
    for (int j = 0; j < 3; ++j) CHECK(rep.s[j] == doctest::Approx(sents[0].s[j]).epsilon(1e-12));
  }
}

TEST_CASE("att with all-zero similarities weights uniformly") {
  std::vector<EncodedSentence> sents;
  sents.push_back(sentence({1.0, 0.0}));
  sents.push_back(sentence({0.0, 1.0}));
  DenseMatrix W(1, 2);  // zero row is orthogonal to both
  auto rep = att(sents, 0, W, 0.5);
  CHECK(rep.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.weights[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("att matches the hand-evaluated three-sentence reference") {
  // frozen from a 30-digit evaluation of e_j = a W.s_j, softmax, weighted sum
  std::vector<EncodedSentence> sents;
  sents.push_back(sentence({0.5, -1.0, 0.25, 2.0}));
  sents.push_back(sentence({1.5, 0.5, -0.75, 0.0}));
  sents.push_back(sentence({-0.25, 1.0, 0.5, -1.5}));
  DenseMatrix W(1, 4);
  const double wrow[4] = {0.8, -0.4, 1.2, 0.3};
  for (int j = 0; j < 4; ++j) W.at(0, j) = wrow[j];
  auto rep = att(sents, 0, W, 0.5);
  const double alpha[3] = {0.55846368713011590, 0.25093391003525912, 0.19060240283462498};
  const double expect[4] = {0.60798210790929038, -0.24239432927786135, 0.04671669067339712,
                            0.83102377000829432};
  for (int j = 0; j < 3; ++j) CHECK(rep.weights[j] == doctest::Approx(alpha[j]).epsilon(1e-13));
  for (int j = 0; j < 4; ++j) CHECK(rep.s[j] == doctest::Approx(expect[j]).epsilon(1e-13));
}

TEST_CASE("att weights sum to one and lie in (0,1)") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const int d = 4;
    std::vector<EncodedSentence> sents;
    for (int i = 0; i < n; ++i) {
      std::vector<double> s(d);
      for (auto& v : s) v = rng.uniform(-2.0, 2.0);
      sents.push_back(sentence(std::move(s)));
    }
    DenseMatrix W(3, d);
    for (auto& v : W.data) v = rng.uniform(-1.0, 1.0);
    auto rep = att(sents, static_cast<int>(rng.below(3)), W, 0.5);
    double sum = 0.0;
    for (double w : rep.weights) {
      CHECK(w > 0.0);
      CHECK(w < 1.0 + 1e-12);
      sum += w;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("att is invariant to similarity shifts along constructed directions") {
  // pick s1, s2 and a perturbation v = a*s1 + b*s2 with v.s1 == v.s2 == 1,
  // so W + t*v shifts every e_j equally and the weights must not move
  std::vector<EncodedSentence> sents;
  sents.push_back(sentence({1.0, 0.5, -0.25, 0.0}));
  sents.push_back(sentence({-0.5, 1.25, 0.75, 0.5}));
  const auto& s1 = sents[0].s;
  const auto& s2 = sents[1].s;
  const double a11 = dot(s1, s1), a12 = dot(s1, s2), a22 = dot(s2, s2);
  const double det = a11 * a22 - a12 * a12;
  const double ca = (a22 - a12) / det, cb = (a11 - a12) / det;
  std::vector<double> v(4);
  for (int j = 0; j < 4; ++j) v[j] = ca * s1[j] + cb * s2[j];
  REQUIRE(dot(v, s1) == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(dot(v, s2) == doctest::Approx(1.0).epsilon(1e-12));

  DenseMatrix W(1, 4);
  const double wrow[4] = {0.3, -0.8, 0.6, 0.1};
  for (int j = 0; j < 4; ++j) W.at(0, j) = wrow[j];
  auto base = att(sents, 0, W, 0.5);
  for (double t : {-2.0, 1.0, 3.5}) {
    DenseMatrix W2 = W;
    for (int j = 0; j < 4; ++j) W2.at(0, j) += t * v[j];
    auto shifted = att(sents, 0, W2, 0.5);
    for (size_t j = 0; j < base.weights.size(); ++j) {
      CHECK(std::abs(shifted.weights[j] - base.weights[j]) <= 1e-12);
    }
  }
}

TEST_CASE("att equals ave when all similarities coincide") {
  std::vector<EncodedSentence> sents;
  sents.push_back(sentence({1.0, 0.0, 0.0, 0.5}));
  sents.push_back(sentence({0.0, 1.0, 0.0, 0.5}));
  sents.push_back(sentence({0.0, 0.0, 1.0, 0.5}));
  DenseMatrix W(1, 4);  // only the shared coordinate is nonzero
  W.at(0, 3) = 2.0;
  auto a = att(sents, 0, W, 0.5);
  auto v = ave(sents);
  for (int j = 0; j < 4; ++j) CHECK(a.s[j] == doctest::Approx(v.s[j]).epsilon(1e-12));
}

TEST_CASE("aggregate_backward distributes AVE gradient as grad/n") {
  std::vector<EncodedSentence> sents;
  sents.push_back(sentence({1.0, 2.0}));
  sents.push_back(sentence({3.0, 4.0}));
  auto rep = ave(sents);
  std::vector<double> grad{2.0, 2.0};
  std::vector<std::vector<double>> grad_sents(2, std::vector<double>(2, 0.0));
  DenseMatrix grad_W(1, 2);
  DenseMatrix W(1, 2);
  aggregate_backward(grad, rep, sents, W, 0.5, &grad_sents, &grad_W);
  for (const auto& gs : grad_sents) CHECK(gs == std::vector<double>{1.0, 1.0});
  for (double v : grad_W.data) CHECK(v == 0.0);
}

TEST_CASE("aggregate_backward on a singleton ATT bag passes the gradient through") {
  std::vector<EncodedSentence> sents;
  sents.push_back(sentence({0.3, -0.9, 1.4}));
  DenseMatrix W(2, 3);
  W.at(1, 0) = 0.7;
  W.at(1, 2) = -0.4;
  auto rep = att(sents, 1, W, 0.5);
  CHECK(rep.weights[0] == 1.0);
  std::vector<double> grad{0.5, -1.5, 2.5};
  std::vector<std::vector<double>> grad_sents(1, std::vector<double>(3, 0.0));
  DenseMatrix grad_W(2, 3);
  aggregate_backward(grad, rep, sents, W, 0.5, &grad_sents, &grad_W);
  CHECK(grad_sents[0] == grad);  // alpha = 1 is a softmax fixed point
  for (double v : grad_W.data) CHECK(v == 0.0);
}

TEST_CASE("att backward agrees with finite differences through every path") {
  // full path: perturb sentence embeddings and W jointly; loss = g . rep
  Rng rng(91);
  const int n = 2, d = 4, classes = 3, query = 1;
  std::vector<double> g(d);
  for (auto& v : g) v = rng.uniform(-1.0, 1.0);
  std::vector<double> x;  // layout: s_0 | s_1 | W
  for (int i = 0; i < n * d + classes * d; ++i) x.push_back(rng.uniform(-1.0, 1.0));

  auto unpack = [&](const std::vector<double>& flat, std::vector<EncodedSentence>* sents,
                    DenseMatrix* W) {
    sents->clear();
    for (int i = 0; i < n; ++i) {
      sents->push_back(sentence({flat.begin() + i * d, flat.begin() + (i + 1) * d}));
    }
    *W = DenseMatrix(classes, d);
    std::copy(flat.begin() + n * d, flat.end(), W->data.begin());
  };

  auto f = [&](const std::vector<double>& flat) {
    std::vector<EncodedSentence> sents;
    DenseMatrix W;
    unpack(flat, &sents, &W);
    return dot(g, att(sents, query, W, 0.5).s);
  };

  std::vector<EncodedSentence> sents;
  DenseMatrix W;
  unpack(x, &sents, &W);
  auto rep = att(sents, query, W, 0.5);
  std::vector<std::vector<double>> grad_sents(n, std::vector<double>(d, 0.0));
  DenseMatrix grad_W(classes, d);
  aggregate_backward(g, rep, sents, W, 0.5, &grad_sents, &grad_W);
  std::vector<double> analytic;
  for (int i = 0; i < n; ++i) analytic.insert(analytic.end(), grad_sents[i].begin(), grad_sents[i].end());
  analytic.insert(analytic.end(), grad_W.data.begin(), grad_W.data.end());
  CHECK(grad_check(f, x, analytic) < 1e-4);
}

TEST_CASE("bag representation keeps dimension d_f for any bag size") {
  Rng rng(61);
  DenseMatrix W(2, 5);
  for (auto& v : W.data) v = rng.uniform(-1.0, 1.0);
  for (int n : {1, 2, 7}) {
    std::vector<EncodedSentence> sents;
    for (int i = 0; i < n; ++i) {
      std::vector<double> s(5);
      for (auto& v : s) v = rng.uniform(-1.0, 1.0);
      sents.push_back(sentence(std::move(s)));
    }
    CHECK(ave(sents).s.size() == 5);
    CHECK(att(sents, 0, W, 0.5).s.size() == 5);
  }
}
