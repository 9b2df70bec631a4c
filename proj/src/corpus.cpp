#include "rankex/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace rankex {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& path, long line, const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

int RelationSchema::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

RelationSchema make_schema(const std::vector<std::string>& real, const std::string& nr) {
  RelationSchema s;
  s.names.push_back(nr);
  s.names.insert(s.names.end(), real.begin(), real.end());
  s.nr_index = 0;
  std::set<std::string> seen(s.names.begin(), s.names.end());
  if (seen.size() != s.names.size()) throw std::invalid_argument("schema: duplicate relation names");
  return s;
}

RelationSchema schema_from_corpus(const std::filesystem::path& path, const std::string& nr) {
  auto in = open_for_read(path);
  std::set<std::string> names;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      parse_fail(path, line_no, e.what());
    }
    if (!rec.contains("labels")) parse_fail(path, line_no, "missing \"labels\"");
    for (const auto& l : rec["labels"]) names.insert(l.get<std::string>());
  }
  names.erase(nr);
  return make_schema({names.begin(), names.end()}, nr);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  json j;
  j["min_count"] = min_count;
  j["words"] = id_to_word;
  j["unk"] = id_to_word[unk_id];
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  json j = json::parse(in);
  Vocabulary v;
  v.min_count = j.at("min_count").get<int>();
  v.id_to_word = j.at("words").get<std::vector<std::string>>();
  const std::string unk = j.at("unk").get<std::string>();
  for (size_t i = 0; i < v.id_to_word.size(); ++i) {
    v.word_to_id[v.id_to_word[i]] = static_cast<int>(i);
    if (v.id_to_word[i] == unk) v.unk_id = static_cast<int>(i);
  }
  return v;
}

Vocabulary build_vocab(const std::map<std::string, long>& freq, int min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  if (freq.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [word, count] : freq) {
    if (word == "UNK") continue;  // reserved; literal occurrences map to it anyway
    if (count > min_count) kept.emplace_back(word, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.min_count = min_count;
  v.unk_id = 0;
  v.id_to_word.push_back("UNK");
  for (const auto& [word, count] : kept) v.id_to_word.push_back(word);
  for (size_t i = 0; i < v.id_to_word.size(); ++i) v.word_to_id[v.id_to_word[i]] = static_cast<int>(i);
  return v;
}

std::map<std::string, long> count_corpus_tokens(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::map<std::string, long> freq;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      parse_fail(path, line_no, e.what());
    }
    if (!rec.contains("mentions")) parse_fail(path, line_no, "missing \"mentions\"");
    for (const auto& m : rec["mentions"]) {
      for (const auto& t : m.at("tokens")) freq[t.get<std::string>()] += 1;
    }
  }
  return freq;
}

std::vector<std::array<int, 2>> position_features(const Mention& m, int clip) {
  if (clip < 1) throw std::invalid_argument("position_features: clip must be >= 1");
  const int n = static_cast<int>(m.tokens.size());
  std::vector<std::array<int, 2>> out(n);
  for (int i = 0; i < n; ++i) {
    const int d1 = std::clamp(i - m.e1_pos, -clip, clip);
    const int d2 = std::clamp(i - m.e2_pos, -clip, clip);
    out[i] = {d1 + clip, d2 + clip};
  }
  return out;
}

std::vector<MentionBag> load_bags(const std::filesystem::path& path, const RelationSchema& schema,
                                  const Vocabulary& vocab) {
  auto in = open_for_read(path);
  std::vector<MentionBag> bags;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      parse_fail(path, line_no, e.what());
    }
    MentionBag bag;
    try {
      bag.tuple_id = rec.at("tuple_id").get<std::string>();
      for (const auto& l : rec.at("labels")) {
        const int idx = schema.index_of(l.get<std::string>());
        if (idx < 0) parse_fail(path, line_no, "unknown relation name \"" + l.get<std::string>() + "\"");
        bag.labels.push_back(idx);
      }
      if (bag.labels.empty()) parse_fail(path, line_no, "empty label set");
      std::sort(bag.labels.begin(), bag.labels.end());
      bag.labels.erase(std::unique(bag.labels.begin(), bag.labels.end()), bag.labels.end());
      const bool has_nr = std::find(bag.labels.begin(), bag.labels.end(), schema.nr_index) != bag.labels.end();
      if (has_nr && bag.labels.size() > 1) {
        parse_fail(path, line_no, "NR label must be exclusive");
      }
      if (!rec.contains("mentions") || rec["mentions"].empty()) {
        parse_fail(path, line_no, "empty mention list");
      }
      for (const auto& jm : rec["mentions"]) {
        Mention m;
        for (const auto& t : jm.at("tokens")) m.tokens.push_back(vocab.id_of(t.get<std::string>()));
        if (m.tokens.empty()) parse_fail(path, line_no, "mention with no tokens");
        if (!jm.contains("e1") || !jm.contains("e2")) {
          parse_fail(path, line_no, "missing entity positions");
        }
        m.e1_pos = jm["e1"].get<int>();
        m.e2_pos = jm["e2"].get<int>();
        const int n = static_cast<int>(m.tokens.size());
        if (m.e1_pos < 0 || m.e1_pos >= n || m.e2_pos < 0 || m.e2_pos >= n) {
          parse_fail(path, line_no, "entity position out of range");
        }
        if (m.e1_pos == m.e2_pos) parse_fail(path, line_no, "entity positions coincide");
        if (jm.contains("label_provenance")) {
          for (const auto& l : jm["label_provenance"]) {
            const int idx = schema.index_of(l.get<std::string>());
            if (idx < 0) {
              parse_fail(path, line_no, "unknown relation in label_provenance");
            }
            m.provenance.push_back(idx);
          }
        }
        bag.mentions.push_back(std::move(m));
      }
    } catch (const json::exception& e) {
      parse_fail(path, line_no, e.what());
    }
    bags.push_back(std::move(bag));
  }
  return bags;
}

void save_bags(const std::filesystem::path& path, const std::vector<MentionBag>& bags,
               const RelationSchema& schema, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& bag : bags) {
    json rec;
    rec["tuple_id"] = bag.tuple_id;
    json labels = json::array();
    for (int l : bag.labels) labels.push_back(schema.names[l]);
    rec["labels"] = labels;
    json mentions = json::array();
    for (const auto& m : bag.mentions) {
      json jm;
      json tokens = json::array();
      for (int t : m.tokens) tokens.push_back(vocab.id_to_word[t]);
      jm["tokens"] = tokens;
      jm["e1"] = m.e1_pos;
      jm["e2"] = m.e2_pos;
      if (!m.provenance.empty()) {
        json prov = json::array();
        for (int l : m.provenance) prov.push_back(schema.names[l]);
        jm["label_provenance"] = prov;
      }
      mentions.push_back(std::move(jm));
    }
    rec["mentions"] = std::move(mentions);
    out << rec.dump() << "\n";
  }
}

std::vector<MentionBag> split_to_separated(const std::vector<MentionBag>& bags) {
  std::vector<MentionBag> out;
  for (const auto& bag : bags) {
    if (bag.labels.size() == 1) {
      out.push_back(bag);
      continue;
    }
    const bool has_provenance = std::any_of(bag.mentions.begin(), bag.mentions.end(),
                                            [](const Mention& m) { return !m.provenance.empty(); });
    for (int label : bag.labels) {
      MentionBag single;
      single.tuple_id = bag.tuple_id;
      single.labels = {label};
      if (has_provenance) {
        for (const auto& m : bag.mentions) {
          if (std::find(m.provenance.begin(), m.provenance.end(), label) != m.provenance.end()) {
            single.mentions.push_back(m);
          }
        }
      }
      if (single.mentions.empty()) single.mentions = bag.mentions;
      out.push_back(std::move(single));
    }
  }
  return out;
}

}  // namespace rankex
