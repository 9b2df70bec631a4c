#pragma once

#include <string>

#include "rankex/encoder.hpp"

namespace rankex {

// Model width settings. `d_f()` is the sentence embedding size fed to both
// attention and scoring.
struct ModelDims {
  int d1 = 50;    // word embedding size
  int d2 = 5;     // position embedding size
  int d_s = 230;  // number of convolution kernels
  int d_win = 3;  // convolution window
  int clip = 30;  // position distance clamp; table height is 2*clip+1
  bool separate_position_tables = false;

  int d_w() const { return d1 + 2 * d2; }
  int d_f() const { return 3 * d_s; }
  int l_p() const { return 2 * clip + 1; }
};

// Every learnable array: the sentence encoder plus the class embeddings W
// (num_classes x d_f) used by attention and scoring.
struct ModelParams {
  EncoderParams enc;
  DenseMatrix W;

  int num_classes() const { return W.rows; }
  bool all_finite() const;
};

// Seeded initialization: word/position embeddings uniform in [-0.25, 0.25];
// kernels and class embeddings uniform in +-sqrt(6/(fan_in+fan_out)); bias
// zero. Draw order is V, P, (P2), kernels, W.
ModelParams init_params(const ModelDims& dims, int vocab_size, int num_classes, uint64_t seed);

ModelParams zeros_like(const ModelParams& p);

// dst += a * src, elementwise over every parameter array.
void add_scaled_params(ModelParams* dst, double a, const ModelParams& src);

size_t param_count(const ModelParams& p);
std::vector<double> flatten_params(const ModelParams& p);
void unflatten_params(std::span<const double> flat, ModelParams* p);

// Named [begin, end) coordinate ranges in the flattened layout, for
// per-parameter-group reporting.
struct ParamGroup {
  std::string name;
  size_t begin;
  size_t end;
};
std::vector<ParamGroup> param_groups(const ModelParams& p);

// Overwrites V rows for vocabulary words found in a whitespace-separated text
// file (word followed by d1 floats per line). Returns the number of rows set.
int load_pretrained_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               DenseMatrix* V);

}  // namespace rankex
