#include "instadet/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "instadet/util.hpp"
#include "nlohmann/json.hpp"

namespace instadet {

namespace {

// Accept both bare class labels and WordNet-style "noun.person".
std::string normalize_class(const std::string& lexfile) {
  std::string c = normalize_token(lexfile);
  if (c.rfind("noun.", 0) == 0) c = c.substr(5);
  return c;
}

}  // namespace

std::string label_name(Label l) { return l == Label::POSITIVE ? "positive" : "negative"; }

std::string neg_type_name(NegType t) {
  switch (t) {
    case NegType::NONE: return "none";
    case NegType::INVERSE: return "inverse";
    case NegType::INST2INST: return "inst2inst";
    case NegType::NOTINST_GLOBAL: return "notinst_global";
    case NegType::NOTINST_INCLASS: return "notinst_inclass";
  }
  throw std::logic_error("unreachable neg_type");
}

Label label_from_name(const std::string& s) {
  if (s == "positive") return Label::POSITIVE;
  if (s == "negative") return Label::NEGATIVE;
  throw std::runtime_error("unknown label: '" + s + "'");
}

NegType neg_type_from_name(const std::string& s) {
  if (s == "none") return NegType::NONE;
  if (s == "inverse") return NegType::INVERSE;
  if (s == "inst2inst") return NegType::INST2INST;
  if (s == "notinst_global") return NegType::NOTINST_GLOBAL;
  if (s == "notinst_inclass") return NegType::NOTINST_INCLASS;
  throw std::runtime_error("unknown neg_type: '" + s + "'");
}

std::optional<std::string> resolve_synset(const std::vector<std::string>& elements,
                                          const EmbeddingStore& store) {
  if (elements.empty()) throw std::runtime_error("resolve_synset: empty element list");
  std::optional<std::string> best;
  for (const auto& el : elements) {
    std::string tok = normalize_token(el);
    if (tok.empty() || !store.contains(tok)) continue;
    if (!best || tok.size() > best->size()) best = tok;  // ties keep the earlier element
  }
  return best;
}

std::optional<std::string> assign_class(const std::string& entity_lexfile,
                                        const std::string& category_lexfile) {
  std::string e = normalize_class(entity_lexfile);
  std::string c = normalize_class(category_lexfile);
  if (!e.empty()) return e;
  if (!c.empty()) return c;
  return std::nullopt;
}

void collapse_rare_classes(std::vector<PairRecord>& records, std::size_t threshold) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) counts[r.onto_class]++;
  for (auto& r : records) {
    if (counts[r.onto_class] < threshold) r.onto_class = "other";
  }
}

BuildReport summarize_positives(const std::vector<PairRecord>& records) {
  BuildReport report;
  std::map<std::string, std::size_t> datapoints;
  std::map<std::string, std::set<std::string>> entities, categories;
  std::set<std::string> all_entities, all_categories;
  for (const auto& r : records) {
    datapoints[r.onto_class]++;
    entities[r.onto_class].insert(r.entity);
    categories[r.onto_class].insert(r.category);
    all_entities.insert(r.entity);
    all_categories.insert(r.category);
  }
  for (const auto& [cls, n] : datapoints) {
    report.rows.push_back({cls, n, entities[cls].size(), categories[cls].size()});
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
    if (a.datapoints != b.datapoints) return a.datapoints > b.datapoints;
    return a.onto_class < b.onto_class;
  });
  report.total_datapoints = records.size();
  report.total_entities = all_entities.size();
  report.total_categories = all_categories.size();
  return report;
}

std::string BuildReport::to_text() const {
  std::ostringstream out;
  out << "class\tdatapoints\tentities\tcategories\n";
  for (const auto& row : rows) {
    out << row.onto_class << '\t' << row.datapoints << '\t' << row.entities << '\t'
        << row.categories << '\n';
  }
  out << "total_unique\t" << total_datapoints << '\t' << total_entities << '\t'
      << total_categories << '\n';
  out << "input_pairs\t" << input_pairs << '\n';
  out << "dropped_entity_miss\t" << dropped_entity_miss << '\n';
  out << "dropped_category_miss\t" << dropped_category_miss << '\n';
  out << "dropped_self_pair\t" << dropped_self_pair << '\n';
  out << "dropped_duplicate\t" << dropped_duplicate << '\n';
  return out.str();
}

std::pair<std::vector<PairRecord>, BuildReport> build_positive_set(
    const std::vector<RawPair>& raw_pairs, const EmbeddingStore& store,
    std::size_t rare_threshold) {
  BuildReport report;
  report.input_pairs = raw_pairs.size();

  std::vector<PairRecord> records;
  records.reserve(raw_pairs.size());
  for (const auto& raw : raw_pairs) {
    auto entity = resolve_synset(raw.entity_elements, store);
    if (!entity) {
      report.dropped_entity_miss++;
      continue;
    }
    auto category = resolve_synset(raw.category_elements, store);
    if (!category) {
      report.dropped_category_miss++;
      continue;
    }
    if (*entity == *category) {
      report.dropped_self_pair++;
      continue;
    }
    auto cls = assign_class(raw.entity_lexfile, raw.category_lexfile);
    records.push_back(
        {*entity, *category, cls.value_or("other"), Label::POSITIVE, NegType::NONE});
  }

  collapse_rare_classes(records, rare_threshold);

  std::vector<PairRecord> deduped;
  deduped.reserve(records.size());
  std::unordered_set<std::string> seen;
  for (auto& r : records) {
    std::string key = r.entity + '\t' + r.category;
    if (seen.insert(std::move(key)).second) {
      deduped.push_back(std::move(r));
    } else {
      report.dropped_duplicate++;
    }
  }

  if (deduped.empty()) {
    throw std::runtime_error("build_positive_set: no records survived filtering (input pairs: " +
                             std::to_string(raw_pairs.size()) + ")");
  }

  auto summary = summarize_positives(deduped);
  summary.input_pairs = report.input_pairs;
  summary.dropped_entity_miss = report.dropped_entity_miss;
  summary.dropped_category_miss = report.dropped_category_miss;
  summary.dropped_self_pair = report.dropped_self_pair;
  summary.dropped_duplicate = report.dropped_duplicate;
  return {std::move(deduped), std::move(summary)};
}

std::vector<RawPair> read_raw_pairs_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open raw pair file: " + path);
  std::vector<RawPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields, found " +
                               std::to_string(fields.size()));
    }
    RawPair raw;
    for (auto& el : split(fields[0], '|')) {
      if (!el.empty()) raw.entity_elements.push_back(el);
    }
    for (auto& el : split(fields[1], '|')) {
      if (!el.empty()) raw.category_elements.push_back(el);
    }
    if (raw.entity_elements.empty() || raw.category_elements.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty element list");
    }
    raw.entity_lexfile = fields[2];
    raw.category_lexfile = fields[3];
    out.push_back(std::move(raw));
  }
  return out;
}

namespace {

nlohmann::json record_to_json(const PairRecord& r) {
  nlohmann::json j;
  j["entity"] = r.entity;
  j["category"] = r.category;
  j["onto_class"] = r.onto_class;
  j["label"] = label_name(r.label);
  j["neg_type"] = neg_type_name(r.neg_type);
  return j;
}

PairRecord record_from_json(const nlohmann::json& j) {
  PairRecord r;
  r.entity = j.at("entity").get<std::string>();
  r.category = j.at("category").get<std::string>();
  r.onto_class = j.at("onto_class").get<std::string>();
  r.label = label_from_name(j.at("label").get<std::string>());
  r.neg_type = neg_type_from_name(j.at("neg_type").get<std::string>());
  if ((r.label == Label::POSITIVE) != (r.neg_type == NegType::NONE)) {
    throw std::runtime_error("record violates label/neg_type pairing: " + j.dump());
  }
  return r;
}

}  // namespace

void save_records_jsonl(const std::string& path, const std::vector<PairRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  write_file(path, out.str());
}

std::vector<PairRecord> load_records_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records file: " + path);
  std::vector<PairRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace instadet
