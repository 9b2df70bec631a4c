#include "rankex/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace rankex {

std::vector<double> predict_bag(const MentionBag& bag, const ModelParams& params, AggMode mode,
                                double att_bias) {
  if (bag.mentions.empty()) throw std::invalid_argument("predict_bag: empty bag");
  std::vector<EncodedSentence> sentences;
  sentences.reserve(bag.mentions.size());
  for (const auto& m : bag.mentions) {
    sentences.push_back(encode_sentence(m, params.enc, nullptr, 1.0, false));
  }
  if (mode == AggMode::kAve) {
    return score_all(ave(sentences).s, params.W);
  }
  std::vector<double> scores(params.num_classes());
  for (int c = 0; c < params.num_classes(); ++c) {
    scores[c] = score(att(sentences, c, params.W, att_bias).s, c, params.W);
  }
  return scores;
}

PRCurve assemble_curve(std::vector<Prediction> candidates, long total_gold) {
  if (total_gold <= 0) throw std::invalid_argument("pr_curve: no gold facts in test set");
  PRCurve curve;
  curve.total_gold = total_gold;
  curve.ranked = std::move(candidates);
  std::sort(curve.ranked.begin(), curve.ranked.end(), [](const Prediction& a, const Prediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.tuple_id != b.tuple_id) return a.tuple_id < b.tuple_id;
    return a.cls < b.cls;
  });
  long correct = 0;
  curve.points.reserve(curve.ranked.size());
  for (size_t r = 0; r < curve.ranked.size(); ++r) {
    if (curve.ranked[r].correct) ++correct;
    curve.points.push_back({static_cast<double>(correct) / static_cast<double>(r + 1),
                            static_cast<double>(correct) / static_cast<double>(curve.total_gold)});
  }
  return curve;
}

PRCurve pr_curve(const std::vector<MentionBag>& test_bags, const ModelParams& params, AggMode mode,
                 double att_bias, int nr_index, int threads, bool multi_sentence_only) {
  long total_gold = 0;
  std::vector<const MentionBag*> pool;
  for (const auto& bag : test_bags) {
    if (multi_sentence_only && bag.mentions.size() < 2) continue;
    pool.push_back(&bag);
    for (int l : bag.labels) {
      if (l != nr_index) ++total_gold;
    }
  }
  std::vector<std::vector<double>> all_scores(pool.size());
  auto score_range = [&](size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i) all_scores[i] = predict_bag(*pool[i], params, mode, att_bias);
  };
  const int workers = std::max(1, threads);
  if (workers == 1 || pool.size() < 2) {
    score_range(0, pool.size());
  } else {
    std::vector<std::thread> pool_threads;
    const size_t chunk = (pool.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const size_t lo = std::min(pool.size(), w * chunk);
      const size_t hi = std::min(pool.size(), lo + chunk);
      if (lo < hi) pool_threads.emplace_back(score_range, lo, hi);
    }
    for (auto& t : pool_threads) t.join();
  }

  std::vector<Prediction> candidates;
  candidates.reserve(pool.size() * (params.num_classes() - 1));
  for (size_t i = 0; i < pool.size(); ++i) {
    for (int c = 0; c < params.num_classes(); ++c) {
      if (c == nr_index) continue;
      Prediction p;
      p.tuple_id = pool[i]->tuple_id;
      p.cls = c;
      p.score = all_scores[i][c];
      p.correct = std::find(pool[i]->labels.begin(), pool[i]->labels.end(), c) != pool[i]->labels.end();
      candidates.push_back(std::move(p));
    }
  }
  return assemble_curve(std::move(candidates), total_gold);
}

double max_f(const PRCurve& curve) {
  if (curve.points.empty()) throw std::invalid_argument("max_f: empty curve");
  double best = 0.0;
  for (const PRPoint& pt : curve.points) {
    const double pr = pt.precision + pt.recall;
    if (pr > 0.0) best = std::max(best, 2.0 * pt.precision * pt.recall / pr);
  }
  return best;
}

double precision_at(const PRCurve& curve, int n) {
  if (n < 1) throw std::invalid_argument("precision_at: n must be positive");
  const size_t take = std::min<size_t>(n, curve.ranked.size());
  if (take == 0) return 0.0;
  long correct = 0;
  for (size_t i = 0; i < take; ++i) correct += curve.ranked[i].correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(take);
}

PAtN p_at_n(const PRCurve& curve) {
  PAtN out;
  double sum = 0.0;
  for (size_t i = 0; i < out.n.size(); ++i) {
    out.precision[i] = precision_at(curve, out.n[i]);
    sum += out.precision[i];
  }
  out.mean = sum / static_cast<double>(out.n.size());
  return out;
}

std::vector<InspectRow> inspect(const std::string& tuple_id, const std::vector<MentionBag>& test_bags,
                                const ModelParams& params, const RelationSchema& schema, AggMode mode,
                                double att_bias, bool rescale) {
  const MentionBag* bag = nullptr;
  for (const auto& b : test_bags) {
    if (b.tuple_id == tuple_id) {
      bag = &b;
      break;
    }
  }
  if (bag == nullptr) throw std::invalid_argument("inspect: unknown tuple \"" + tuple_id + "\"");
  const std::vector<double> scores = predict_bag(*bag, params, mode, att_bias);
  std::vector<InspectRow> rows(scores.size());
  for (size_t c = 0; c < scores.size(); ++c) {
    rows[c].relation = schema.names[c];
    rows[c].score = scores[c] + (rescale ? 10.0 : 0.0);
    rows[c].is_gold = std::find(bag->labels.begin(), bag->labels.end(), static_cast<int>(c)) !=
                      bag->labels.end();
  }
  return rows;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void write_pr_csv(const std::filesystem::path& path, const PRCurve& curve,
                  const RelationSchema& schema, int top) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "rank,score,tuple_id,relation,correct,precision,recall\n";
  const size_t limit = top > 0 ? std::min<size_t>(top, curve.ranked.size()) : curve.ranked.size();
  for (size_t r = 0; r < limit; ++r) {
    const Prediction& p = curve.ranked[r];
    out << (r + 1) << ',' << fmt_double(p.score) << ',' << p.tuple_id << ',' << schema.names[p.cls]
        << ',' << (p.correct ? 1 : 0) << ',' << fmt_double(curve.points[r].precision) << ','
        << fmt_double(curve.points[r].recall) << "\n";
  }
}

void write_p_at_n_csv(const std::filesystem::path& path, const PAtN& p) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "n,precision\n";
  for (size_t i = 0; i < p.n.size(); ++i) out << p.n[i] << ',' << fmt_double(p.precision[i]) << "\n";
  out << "mean," << fmt_double(p.mean) << "\n";
}

void write_inspect_csv(std::ostream& out, const std::vector<InspectRow>& rows) {
  out << "relation,score,is_gold\n";
  for (const auto& r : rows) {
    out << r.relation << ',' << fmt_double(r.score) << ',' << (r.is_gold ? 1 : 0) << "\n";
  }
}

}  // namespace rankex
