#include "rankex/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace rankex {

using nlohmann::json;

std::string synth_relation_name(int real_class) { return "rel_" + std::to_string(real_class); }

std::string synth_trigger_token(int real_class, int variant) {
  return "trig" + std::to_string(real_class) + "_" + std::to_string(variant);
}

RelationSchema synth_schema(const SynthConfig& cfg) {
  std::vector<std::string> real;
  for (int c = 0; c < cfg.num_real(); ++c) real.push_back(synth_relation_name(c));
  return make_schema(real);
}

namespace {

void validate(const SynthConfig& cfg) {
  if (cfg.num_classes < 2) throw std::invalid_argument("synthgen: need NR plus one real class");
  for (double p : {cfg.nr_fraction, cfg.nr_fraction_test, cfg.noise_rate}) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("synthgen: probabilities must lie in [0,1]");
  }
  if (cfg.bag_min < 1 || cfg.bag_max < cfg.bag_min) throw std::invalid_argument("synthgen: bad bag size range");
  if (cfg.sent_min < 3 || cfg.sent_max < cfg.sent_min) {
    throw std::invalid_argument("synthgen: sentences need at least 3 tokens");
  }
  const int reserved = cfg.num_real() * cfg.triggers_per_class + 2;
  if (cfg.vocab_size <= reserved) {
    throw std::invalid_argument("synthgen: vocab_size " + std::to_string(cfg.vocab_size) +
                                " too small for " + std::to_string(reserved) +
                                " trigger/entity tokens plus filler");
  }
  for (const TiePair& t : cfg.ties) {
    if (t.src < 0 || t.src >= cfg.num_real() || t.dst < 0 || t.dst >= cfg.num_real() || t.src == t.dst) {
      throw std::invalid_argument("synthgen: tie indices out of range");
    }
    if (t.prob < 0.0 || t.prob > 1.0) throw std::invalid_argument("synthgen: tie probability out of range");
  }
}

int draw_range(Rng* rng, int lo, int hi) { return lo + static_cast<int>(rng->below(hi - lo + 1)); }

RawMention make_mention(Rng* rng, const SynthConfig& cfg, int filler_count) {
  RawMention m;
  const int n = draw_range(rng, cfg.sent_min, cfg.sent_max);
  m.tokens.resize(n);
  for (auto& t : m.tokens) t = "w" + std::to_string(rng->below(filler_count));
  m.e1 = static_cast<int>(rng->below(n));
  do {
    m.e2 = static_cast<int>(rng->below(n));
  } while (m.e2 == m.e1);
  m.tokens[m.e1] = "enta";
  m.tokens[m.e2] = "entb";
  return m;
}

std::vector<RawBag> make_split(Rng* rng, const SynthConfig& cfg, int count, double nr_fraction,
                               const char* prefix) {
  const int filler_count = cfg.vocab_size - cfg.num_real() * cfg.triggers_per_class - 2;
  const long n_nr = std::lround(nr_fraction * count);
  std::vector<char> is_nr(count, 0);
  std::fill(is_nr.begin(), is_nr.begin() + std::min<long>(n_nr, count), 1);
  rng->shuffle(is_nr);

  std::vector<RawBag> bags(count);
  for (int b = 0; b < count; ++b) {
    RawBag& bag = bags[b];
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%05d", prefix, b);
    bag.tuple_id = buf;
    if (is_nr[b]) {
      bag.labels = {"NR"};
      const int m_count = draw_range(rng, cfg.bag_min, cfg.bag_max);
      for (int i = 0; i < m_count; ++i) {
        RawMention m = make_mention(rng, cfg, filler_count);
        m.provenance = {"NR"};
        bag.mentions.push_back(std::move(m));
      }
      continue;
    }
    // primary relation, then one pass of tie rules in config order
    std::vector<int> labels{static_cast<int>(rng->below(cfg.num_real()))};
    for (const TiePair& tie : cfg.ties) {
      const bool has_src = std::find(labels.begin(), labels.end(), tie.src) != labels.end();
      const bool has_dst = std::find(labels.begin(), labels.end(), tie.dst) != labels.end();
      if (has_src && !has_dst && rng->bernoulli(tie.prob)) labels.push_back(tie.dst);
    }
    std::sort(labels.begin(), labels.end());
    for (int l : labels) bag.labels.push_back(synth_relation_name(l));

    const int m_count = std::max(draw_range(rng, cfg.bag_min, cfg.bag_max),
                                 static_cast<int>(labels.size()));
    // each label gets a dedicated evidence mention; extra mentions draw a
    // label at random (one latent relation per sentence)
    std::vector<int> latents = labels;
    rng->shuffle(latents);
    while (static_cast<int>(latents.size()) < m_count) {
      latents.push_back(labels[rng->below(labels.size())]);
    }
    for (int i = 0; i < m_count; ++i) {
      RawMention m = make_mention(rng, cfg, filler_count);
      const std::string latent_name = synth_relation_name(latents[i]);
      m.provenance = {latent_name};
      if (!rng->bernoulli(cfg.noise_rate)) {
        const int trig = static_cast<int>(rng->below(cfg.triggers_per_class));
        int pos;
        do {
          pos = static_cast<int>(rng->below(m.tokens.size()));
        } while (pos == m.e1 || pos == m.e2);
        m.tokens[pos] = synth_trigger_token(latents[i], trig);
        bag.planted[latent_name].push_back(i);
      }
      bag.mentions.push_back(std::move(m));
    }
  }
  return bags;
}

}  // namespace

SynthCorpus generate(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  SynthCorpus corpus;
  corpus.schema = synth_schema(cfg);
  corpus.train = make_split(&rng, cfg, cfg.num_train, cfg.nr_fraction, "tr");
  corpus.test = make_split(&rng, cfg, cfg.num_test, cfg.nr_fraction_test, "te");
  return corpus;
}

void write_raw_corpus(const std::filesystem::path& path, const std::vector<RawBag>& bags) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const RawBag& bag : bags) {
    json rec;
    rec["tuple_id"] = bag.tuple_id;
    rec["labels"] = bag.labels;
    json mentions = json::array();
    for (const RawMention& m : bag.mentions) {
      json jm;
      jm["tokens"] = m.tokens;
      jm["e1"] = m.e1;
      jm["e2"] = m.e2;
      jm["label_provenance"] = m.provenance;
      mentions.push_back(std::move(jm));
    }
    rec["mentions"] = std::move(mentions);
    out << rec.dump() << "\n";
  }
}

void write_truth(const std::filesystem::path& path, const SynthConfig& cfg, const SynthCorpus& corpus) {
  json j;
  json ties = json::array();
  for (const TiePair& t : cfg.ties) ties.push_back({{"src", t.src}, {"dst", t.dst}, {"prob", t.prob}});
  j["config"] = {{"num_classes", cfg.num_classes},
                 {"ties", ties},
                 {"triggers_per_class", cfg.triggers_per_class},
                 {"vocab_size", cfg.vocab_size},
                 {"bag_min", cfg.bag_min},
                 {"bag_max", cfg.bag_max},
                 {"sent_min", cfg.sent_min},
                 {"sent_max", cfg.sent_max},
                 {"num_train", cfg.num_train},
                 {"num_test", cfg.num_test},
                 {"nr_fraction", cfg.nr_fraction},
                 {"nr_fraction_test", cfg.nr_fraction_test},
                 {"noise_rate", cfg.noise_rate},
                 {"seed", cfg.seed}};
  auto dump_split = [](const std::vector<RawBag>& bags) {
    json arr = json::array();
    for (const RawBag& bag : bags) {
      json rec;
      rec["tuple_id"] = bag.tuple_id;
      rec["labels"] = bag.labels;
      rec["planted"] = bag.planted;
      arr.push_back(std::move(rec));
    }
    return arr;
  };
  j["train"] = dump_split(corpus.train);
  j["test"] = dump_split(corpus.test);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << "\n";
}

double tie_cooccurrence(const std::vector<RawBag>& bags, const std::string& src,
                        const std::string& dst) {
  long with_src = 0, with_both = 0;
  for (const RawBag& bag : bags) {
    const bool has_src = std::find(bag.labels.begin(), bag.labels.end(), src) != bag.labels.end();
    if (!has_src) continue;
    ++with_src;
    if (std::find(bag.labels.begin(), bag.labels.end(), dst) != bag.labels.end()) ++with_both;
  }
  return with_src == 0 ? 0.0 : static_cast<double>(with_both) / static_cast<double>(with_src);
}

double nr_ratio(const std::vector<RawBag>& bags, const std::string& nr) {
  long count = 0;
  for (const RawBag& bag : bags) {
    if (bag.labels.size() == 1 && bag.labels[0] == nr) ++count;
  }
  return bags.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(bags.size());
}

CeilingReport bayes_ceiling(const SynthConfig& cfg, const std::vector<RawBag>& bags) {
  // trigger token -> relation name
  std::map<std::string, std::string> trigger_of;
  for (int c = 0; c < cfg.num_real(); ++c) {
    for (int v = 0; v < cfg.triggers_per_class; ++v) {
      trigger_of[synth_trigger_token(c, v)] = synth_relation_name(c);
    }
  }
  long tp = 0, fp = 0, fn = 0;
  for (const RawBag& bag : bags) {
    std::set<std::string> predicted;
    for (const RawMention& m : bag.mentions) {
      for (const std::string& t : m.tokens) {
        auto it = trigger_of.find(t);
        if (it != trigger_of.end()) predicted.insert(it->second);
      }
    }
    // entailment closure over deterministic ties
    bool grew = true;
    while (grew) {
      grew = false;
      for (const TiePair& tie : cfg.ties) {
        if (tie.prob < 1.0) continue;
        if (predicted.count(synth_relation_name(tie.src)) &&
            predicted.insert(synth_relation_name(tie.dst)).second) {
          grew = true;
        }
      }
    }
    std::set<std::string> gold(bag.labels.begin(), bag.labels.end());
    gold.erase("NR");
    for (const std::string& p : predicted) {
      if (gold.count(p)) {
        ++tp;
      } else {
        ++fp;
      }
    }
    for (const std::string& g : gold) {
      if (!predicted.count(g)) ++fn;
    }
  }
  CeilingReport rep;
  rep.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  rep.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double pr = rep.precision + rep.recall;
  rep.max_f = pr > 0.0 ? 2.0 * rep.precision * rep.recall / pr : 0.0;
  return rep;
}

}  // namespace rankex
