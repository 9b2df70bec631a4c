#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace rankex {

// Ordered relation inventory. Class indices are positions in `names` and are
// stable for the lifetime of a run (and across runs via checkpoints).
struct RelationSchema {
  std::vector<std::string> names;
  int nr_index = 0;

  int num_classes() const { return static_cast<int>(names.size()); }
  int index_of(const std::string& name) const;  // -1 if unknown
  const std::string& nr_name() const { return names[nr_index]; }
};

// Builds a schema with NR at index 0 followed by `real` in the given order.
RelationSchema make_schema(const std::vector<std::string>& real, const std::string& nr = "NR");

// Scans a corpus file for relation names; returns NR first, the rest sorted.
RelationSchema schema_from_corpus(const std::filesystem::path& path, const std::string& nr = "NR");

struct Vocabulary {
  std::unordered_map<std::string, int> word_to_id;
  std::vector<std::string> id_to_word;
  int unk_id = 0;
  int min_count = 1;

  int size() const { return static_cast<int>(id_to_word.size()); }
  int id_of(const std::string& w) const {
    auto it = word_to_id.find(w);
    return it == word_to_id.end() ? unk_id : it->second;
  }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
};

// Words with frequency strictly greater than min_count get dedicated ids,
// assigned by descending frequency then lexicographic order; everything else
// maps to id 0 ("UNK"). Throws std::invalid_argument on an empty frequency
// table or min_count < 1.
Vocabulary build_vocab(const std::map<std::string, long>& freq, int min_count);

// Token frequency over every mention of every record in a corpus file.
std::map<std::string, long> count_corpus_tokens(const std::filesystem::path& path);

struct Mention {
  std::vector<int> tokens;  // vocabulary ids, length >= 1
  int e1_pos = 0;
  int e2_pos = 0;
  std::vector<int> provenance;  // label indices this mention is annotated for; may be empty
};

struct MentionBag {
  std::string tuple_id;
  std::vector<int> labels;  // sorted, unique, non-empty
  std::vector<Mention> mentions;
};

// Per-token (distance-to-e1, distance-to-e2) indices. Raw distances are
// clamped to [-clip, clip] and shifted to [0, 2*clip].
std::vector<std::array<int, 2>> position_features(const Mention& m, int clip);

// Reads JSON-lines bags, mapping tokens through `vocab` and labels through
// `schema`. Malformed records throw std::runtime_error naming the line.
std::vector<MentionBag> load_bags(const std::filesystem::path& path, const RelationSchema& schema,
                                  const Vocabulary& vocab);

void save_bags(const std::filesystem::path& path, const std::vector<MentionBag>& bags,
               const RelationSchema& schema, const Vocabulary& vocab);

// Splits every multi-label bag into one single-label bag per label. When any
// mention of the input bag carries provenance, each output keeps only the
// mentions annotated for its label (falling back to all mentions if none
// match); without provenance all mentions are duplicated into every output.
std::vector<MentionBag> split_to_separated(const std::vector<MentionBag>& bags);

}  // namespace rankex
