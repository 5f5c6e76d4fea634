#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "instadet/embedding_store.hpp"

namespace instadet {

enum class Label { POSITIVE, NEGATIVE };
enum class NegType { NONE, INVERSE, INST2INST, NOTINST_GLOBAL, NOTINST_INCLASS };

std::string label_name(Label l);
std::string neg_type_name(NegType t);
Label label_from_name(const std::string& s);
NegType neg_type_from_name(const std::string& s);

// One pre-extracted relation pair: synset element lists plus optional
// lexicographer-file class labels (empty string = absent).
struct RawPair {
  std::vector<std::string> entity_elements;
  std::vector<std::string> category_elements;
  std::string entity_lexfile;
  std::string category_lexfile;
};

struct PairRecord {
  std::string entity;
  std::string category;
  std::string onto_class;
  Label label = Label::POSITIVE;
  NegType neg_type = NegType::NONE;

  bool operator==(const PairRecord&) const = default;
};

struct BuildReport {
  struct ClassRow {
    std::string onto_class;
    std::size_t datapoints = 0;
    std::size_t entities = 0;
    std::size_t categories = 0;
  };
  std::vector<ClassRow> rows;  // sorted by datapoints desc, then name
  std::size_t total_datapoints = 0;
  std::size_t total_entities = 0;    // unique across classes
  std::size_t total_categories = 0;  // unique across classes
  std::size_t input_pairs = 0;
  std::size_t dropped_entity_miss = 0;
  std::size_t dropped_category_miss = 0;
  std::size_t dropped_self_pair = 0;
  std::size_t dropped_duplicate = 0;

  std::string to_text() const;
};

// Longest in-vocabulary element (ties: first listed); nullopt if none is in
// vocabulary. Length is measured on the normalized token.
std::optional<std::string> resolve_synset(const std::vector<std::string>& elements,
                                          const EmbeddingStore& store);

// Entity's label wins when both are present; nullopt when both are absent.
std::optional<std::string> assign_class(const std::string& entity_lexfile,
                                        const std::string& category_lexfile);

// Relabel every class with fewer than `threshold` datapoints to `other`.
void collapse_rare_classes(std::vector<PairRecord>& records, std::size_t threshold = 50);

// Per-class and unique-total counts over positive records.
BuildReport summarize_positives(const std::vector<PairRecord>& records);

// resolve -> drop (MISS either side, entity = category) -> assign classes
// (absent on both sides falls back to `other`) -> collapse rare classes ->
// drop exact (entity, category) duplicates keeping the first. Throws if
// nothing survives.
std::pair<std::vector<PairRecord>, BuildReport> build_positive_set(
    const std::vector<RawPair>& raw_pairs, const EmbeddingStore& store,
    std::size_t rare_threshold = 50);

// TSV: entity_elements \t category_elements \t entity_lexfile \t
// category_lexfile, elements '|'-separated, empty field = missing lexfile.
std::vector<RawPair> read_raw_pairs_tsv(const std::string& path);

void save_records_jsonl(const std::string& path, const std::vector<PairRecord>& records);
std::vector<PairRecord> load_records_jsonl(const std::string& path);

}  // namespace instadet
