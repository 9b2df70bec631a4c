#pragma once

#include <optional>
#include <ostream>

#include "rankex/eval.hpp"
#include "rankex/ranking.hpp"

namespace rankex {

struct TrainConfig {
  int variant = 3;  // 1 = AVE, 2 = ATT, 3 = ExATT
  int batch_size = 160;
  double learning_rate = 0.03;
  int epochs = 15;
  double dropout_keep = 0.5;
  uint64_t seed = 1;
  int threads = 1;
  ModelDims dims;
  RankingConfig ranking;

  AggMode agg_mode() const { return variant == 1 ? AggMode::kAve : AggMode::kAtt; }
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  std::optional<double> dev_max_f;
};

struct TrainResult {
  ModelParams params;        // best dev epoch when a dev set is given, else final
  ModelParams final_params;
  std::vector<EpochMetrics> metrics;
  int best_epoch = 0;  // 0 when no dev set
};

// Mini-batch SGD over bags. Each epoch visits every bag once in a seeded
// shuffle; the step applies the mean of the per-bag gradients. Identical
// seed, data, config and thread count reproduce the parameter trajectory
// bitwise. Throws std::runtime_error naming the bag if a loss goes
// non-finite. `initial` overrides the seeded initialization (e.g. after a
// pre-trained embedding import).
TrainResult train(const std::vector<MentionBag>& bags, const RelationSchema& schema, int vocab_size,
                  const TrainConfig& cfg, const std::vector<MentionBag>* dev_bags = nullptr,
                  std::ostream* progress = nullptr, const ModelParams* initial = nullptr);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& metrics);

// Checkpoint directory: manifest.json plus one little-endian float32 blob per
// parameter array, and the vocabulary alongside.
void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params,
                     const Vocabulary& vocab, const RelationSchema& schema, const TrainConfig& cfg);

struct LoadedCheckpoint {
  ModelParams params;
  Vocabulary vocab;
  RelationSchema schema;
  TrainConfig cfg;
};

// Validates the manifest against every blob; shape disagreements and
// truncated blobs raise std::runtime_error.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace rankex
