#pragma once

#include "rankex/ranking.hpp"

namespace rankex {

// Settings for one finite-difference verification instance: a randomly built
// bag and parameter set at reduced dimensions.
struct GradCheckSpec {
  int variant = 3;
  bool relieve_nr = false;
  ModelDims dims{.d1 = 6, .d2 = 2, .d_s = 8, .d_win = 3, .clip = 5};
  int num_classes = 5;  // includes NR at index 0
  int vocab_size = 12;
  int num_sentences = 2;
  int num_positives = 2;
  int min_tokens = 5;
  int max_tokens = 9;
  uint64_t seed = 1;
  double eps = 1e-5;
};

struct GroupCheck {
  std::string group;
  double max_rel_err = 0.0;
};

struct GradCheckResult {
  bool usable = false;  // instance was safely away from hinge kinks and pool ties
  double max_rel_err = 0.0;
  std::vector<GroupCheck> groups;
};

// Builds the seeded instance and, when it sits safely away from every
// non-differentiable point (hinge kinks, pooling ties, negative-selection
// ties), compares analytic gradients of the full bag loss against central
// finite differences for every parameter group. An unusable instance returns
// usable=false; callers advance the seed.
GradCheckResult run_gradcheck_instance(const GradCheckSpec& spec);

}  // namespace rankex
