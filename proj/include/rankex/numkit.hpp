#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rankex {

// Row-major dense matrix of doubles. The only array type used by the model.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  std::span<double> row(int i) { return {data.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)}; }
  std::span<const double> row(int i) const {
    return {data.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)};
  }

  bool empty() const { return rows == 0 || cols == 0; }
  size_t size() const { return data.size(); }
  bool all_finite() const;
};

// xoshiro256++ seeded through splitmix64. Chosen over the platform engines so
// that a given seed yields the same stream on every platform and compiler.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Unbiased integer in [0, n), n >= 1 (Lemire's multiply-shift rejection).
  uint64_t below(uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<uint64_t, 4> state_;
};

// Deterministic mix of two 64-bit values (splitmix64 finalizer). Used to
// derive per-bag RNG streams from (seed, epoch, ordinal) so results do not
// depend on scheduling.
uint64_t hash_combine(uint64_t a, uint64_t b);

// Max-subtracted exp-normalize. Throws std::invalid_argument on empty input.
std::vector<double> softmax(std::span<const double> scores);

// Index of the maximum, ties broken toward the lowest index.
int argmax_det(std::span<const double> scores);

double dot(std::span<const double> a, std::span<const double> b);

// y += a * x
void add_scaled(std::span<double> y, double a, std::span<const double> x);

// Central-difference gradient verification. Returns
//   max_i |g_fd[i] - g_an[i]| / max(1e-8, |g_fd[i]| + |g_an[i]|).
// Throws std::runtime_error if f evaluates to a non-finite value.
double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  std::vector<double> x, std::span<const double> analytic_grad,
                  double eps = 1e-5);

}  // namespace rankex
