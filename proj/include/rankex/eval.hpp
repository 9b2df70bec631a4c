#pragma once

#include "rankex/ranking.hpp"

namespace rankex {

// Per-class scores for one bag at inference (dropout off). AVE scores every
// class against one shared representation; ATT rebuilds the representation
// with each candidate class as the attention query and reports F(s^c, c).
std::vector<double> predict_bag(const MentionBag& bag, const ModelParams& params, AggMode mode,
                                double att_bias);

struct Prediction {
  std::string tuple_id;
  int cls = 0;
  double score = 0.0;
  bool correct = false;
};

struct PRPoint {
  double precision = 0.0;
  double recall = 0.0;
};

// Ranked candidate list over all (bag, non-NR class) pairs with one P/R point
// per rank prefix. total_gold counts gold non-NR facts in the test set.
struct PRCurve {
  std::vector<Prediction> ranked;
  std::vector<PRPoint> points;
  long total_gold = 0;
};

// Sorts candidates descending (ties by tuple_id then class index) and counts
// correct prefixes into P/R points. Throws std::invalid_argument when
// total_gold is not positive.
PRCurve assemble_curve(std::vector<Prediction> candidates, long total_gold);

// Scores every (bag, non-NR class) candidate and assembles the curve; a
// prediction is correct iff its class is in the bag's labels. When
// multi_sentence_only is set, bags with a single mention are excluded from
// the candidate pool.
PRCurve pr_curve(const std::vector<MentionBag>& test_bags, const ModelParams& params, AggMode mode,
                 double att_bias, int nr_index, int threads = 1, bool multi_sentence_only = false);

// Max of F = 2PR/(P+R) over all rank prefixes (0 where P+R == 0).
double max_f(const PRCurve& curve);

// Fraction correct among the first min(n, pool) predictions.
double precision_at(const PRCurve& curve, int n);

// The Table-style P@N block: N in {100,...,500} plus their mean.
struct PAtN {
  std::array<int, 5> n{100, 200, 300, 400, 500};
  std::array<double, 5> precision{};
  double mean = 0.0;
};
PAtN p_at_n(const PRCurve& curve);

struct InspectRow {
  std::string relation;
  double score = 0.0;
  bool is_gold = false;
};

// Per-class score table for one tuple (the case-study view). With rescale the
// scores are shifted by +10. Throws std::invalid_argument for unknown tuples.
std::vector<InspectRow> inspect(const std::string& tuple_id, const std::vector<MentionBag>& test_bags,
                                const ModelParams& params, const RelationSchema& schema, AggMode mode,
                                double att_bias, bool rescale);

// CSV writers. The curve is truncated to the top `top` rows (0 = all).
void write_pr_csv(const std::filesystem::path& path, const PRCurve& curve,
                  const RelationSchema& schema, int top = 2000);
void write_p_at_n_csv(const std::filesystem::path& path, const PAtN& p);
void write_inspect_csv(std::ostream& out, const std::vector<InspectRow>& rows);

}  // namespace rankex
