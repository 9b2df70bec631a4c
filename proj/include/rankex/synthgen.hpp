#pragma once

#include "rankex/corpus.hpp"
#include "rankex/numkit.hpp"

namespace rankex {

// A directed label tie: whenever `src` is drawn as a bag label, `dst` joins it
// with probability `prob`. prob >= 1 declares an entailment (src => dst).
// Indices address the real (non-NR) classes, 0-based.
struct TiePair {
  int src = 0;
  int dst = 0;
  double prob = 0.0;
};

struct SynthConfig {
  int num_classes = 7;  // includes NR
  std::vector<TiePair> ties;
  int triggers_per_class = 2;
  int vocab_size = 120;  // total token budget: triggers + 2 entity tokens + fillers
  int bag_min = 1;
  int bag_max = 4;
  int sent_min = 8;
  int sent_max = 20;
  int num_train = 2000;
  int num_test = 500;
  double nr_fraction = 0.7;         // train split
  double nr_fraction_test = 0.9626; // held-out split is far more NR-heavy
  double noise_rate = 0.0;  // probability an evidence mention's trigger is dropped
  uint64_t seed = 13;

  int num_real() const { return num_classes - 1; }
};

// Pre-vocabulary corpus records (tokens and labels as strings).
struct RawMention {
  std::vector<std::string> tokens;
  int e1 = 0;
  int e2 = 0;
  std::vector<std::string> provenance;
};

struct RawBag {
  std::string tuple_id;
  std::vector<std::string> labels;
  std::vector<RawMention> mentions;
  // planted[label] = mention indices whose trigger survived the noise draw
  std::map<std::string, std::vector<int>> planted;
};

struct SynthCorpus {
  std::vector<RawBag> train;
  std::vector<RawBag> test;
  RelationSchema schema;
};

// Schema for a config: "NR" at index 0, then rel_0 .. rel_{k-2}.
RelationSchema synth_schema(const SynthConfig& cfg);

std::string synth_relation_name(int real_class);
std::string synth_trigger_token(int real_class, int variant);

// Deterministic corpus with exact NR counts per split. Every label of a
// non-NR bag is assigned at least one evidence mention; evidence mentions
// carry the label's trigger token unless the noise draw removes it. NR bags
// never contain triggers. Throws std::invalid_argument when vocab_size cannot
// cover the trigger tokens.
SynthCorpus generate(const SynthConfig& cfg);

void write_raw_corpus(const std::filesystem::path& path, const std::vector<RawBag>& bags);
void write_truth(const std::filesystem::path& path, const SynthConfig& cfg, const SynthCorpus& corpus);

// Fraction of bags labeled `src` that are also labeled `dst`.
double tie_cooccurrence(const std::vector<RawBag>& bags, const std::string& src,
                        const std::string& dst);

double nr_ratio(const std::vector<RawBag>& bags, const std::string& nr = "NR");

// Score of the oracle that reads the planted triggers (plus entailment
// closure over prob>=1 ties) straight off the text: an upper reference for
// what any model can reach on this corpus.
struct CeilingReport {
  double precision = 0.0;
  double recall = 0.0;
  double max_f = 0.0;
};
CeilingReport bayes_ceiling(const SynthConfig& cfg, const std::vector<RawBag>& bags);

}  // namespace rankex
