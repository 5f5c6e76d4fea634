#include "instadet/confounders.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "instadet/util.hpp"
#include "nlohmann/json.hpp"

namespace instadet {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::POS_INVERSE: return "pos_inverse";
    case Variant::POS_INST2INST: return "pos_inst2inst";
    case Variant::POS_NOTINST_GLOBAL: return "pos_notinst_global";
    case Variant::POS_NOTINST_INCLASS: return "pos_notinst_inclass";
    case Variant::POS_UNION_GLOBAL: return "pos_union_global";
    case Variant::POS_UNION_INCLASS: return "pos_union_inclass";
  }
  throw std::logic_error("unreachable variant");
}

Variant variant_from_name(const std::string& s) {
  for (Variant v : all_variants()) {
    if (variant_name(v) == s) return v;
  }
  throw std::runtime_error("unknown variant: '" + s + "'");
}

std::vector<Variant> all_variants() {
  return {Variant::POS_INVERSE,        Variant::POS_INST2INST,
          Variant::POS_NOTINST_GLOBAL, Variant::POS_NOTINST_INCLASS,
          Variant::POS_UNION_GLOBAL,   Variant::POS_UNION_INCLASS};
}

bool is_union_variant(Variant v) {
  return v == Variant::POS_UNION_GLOBAL || v == Variant::POS_UNION_INCLASS;
}

std::vector<NegType> variant_neg_types(Variant v) {
  switch (v) {
    case Variant::POS_INVERSE: return {NegType::INVERSE};
    case Variant::POS_INST2INST: return {NegType::INST2INST};
    case Variant::POS_NOTINST_GLOBAL: return {NegType::NOTINST_GLOBAL};
    case Variant::POS_NOTINST_INCLASS: return {NegType::NOTINST_INCLASS};
    case Variant::POS_UNION_GLOBAL:
      return {NegType::INVERSE, NegType::INST2INST, NegType::NOTINST_GLOBAL};
    case Variant::POS_UNION_INCLASS:
      return {NegType::INVERSE, NegType::INST2INST, NegType::NOTINST_INCLASS};
  }
  throw std::logic_error("unreachable variant");
}

ConfounderPools make_pools(const std::vector<PairRecord>& positives) {
  ConfounderPools pools;
  std::map<std::string, std::set<std::string>> ents, cats;
  std::map<std::string, std::size_t> cat_freq;
  for (const auto& p : positives) {
    if (p.label != Label::POSITIVE) throw std::runtime_error("make_pools: input must be positive records");
    ents[p.onto_class].insert(p.entity);
    cats[p.onto_class].insert(p.category);
    cat_freq[p.category]++;
    pools.gold[p.entity].insert(p.category);
    pools.positive_pairs.insert(p.entity + '\t' + p.category);
  }
  for (auto& [cls, s] : ents) pools.entities_by_class[cls].assign(s.begin(), s.end());
  for (auto& [cls, s] : cats) pools.categories_by_class[cls].assign(s.begin(), s.end());
  for (auto& [cat, n] : cat_freq) {
    pools.category_index[cat] = pools.categories.size();
    pools.categories.push_back(cat);
    pools.category_counts.push_back(n);
    pools.total_mass += n;
  }
  return pools;
}

PairRecord gen_inverse(const PairRecord& p) {
  return {p.category, p.entity, p.onto_class, Label::NEGATIVE, NegType::INVERSE};
}

namespace {

// k-th element of `pool` after removing the (sorted, distinct) indices in
// `excluded`.
std::size_t skip_excluded(std::size_t k, const std::vector<std::size_t>& excluded) {
  for (std::size_t ex : excluded) {
    if (ex <= k) ++k;
  }
  return k;
}

std::optional<std::size_t> index_in_sorted(const std::vector<std::string>& pool,
                                           const std::string& value) {
  auto it = std::lower_bound(pool.begin(), pool.end(), value);
  if (it == pool.end() || *it != value) return std::nullopt;
  return static_cast<std::size_t>(it - pool.begin());
}

}  // namespace

std::optional<PairRecord> gen_inst2inst(const PairRecord& p, const ConfounderPools& pools,
                                        Rng& rng) {
  auto it = pools.entities_by_class.find(p.onto_class);
  if (it == pools.entities_by_class.end()) return std::nullopt;
  const auto& pool = it->second;

  std::vector<std::size_t> excluded;
  if (auto self = index_in_sorted(pool, p.entity)) excluded.push_back(*self);
  // An entity that is also someone's gold category could reproduce a
  // positive pair; exclude those too.
  auto gold_it = pools.gold.find(p.entity);
  if (gold_it != pools.gold.end()) {
    for (const auto& g : gold_it->second) {
      if (auto idx = index_in_sorted(pool, g)) excluded.push_back(*idx);
    }
  }
  std::sort(excluded.begin(), excluded.end());
  excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());

  if (excluded.size() >= pool.size()) return std::nullopt;
  std::size_t k = rng.below(pool.size() - excluded.size());
  const std::string& other = pool[skip_excluded(k, excluded)];
  return PairRecord{p.entity, other, p.onto_class, Label::NEGATIVE, NegType::INST2INST};
}

std::optional<PairRecord> gen_notinst(const PairRecord& p, const ConfounderPools& pools,
                                      NotInstMode mode, Rng& rng) {
  const std::set<std::string>* gold = nullptr;
  auto gold_it = pools.gold.find(p.entity);
  if (gold_it != pools.gold.end()) gold = &gold_it->second;

  std::string chosen;
  if (mode == NotInstMode::GLOBAL) {
    std::size_t excluded_mass = 0;
    if (gold) {
      for (const auto& g : *gold) {
        auto idx = pools.category_index.find(g);
        if (idx != pools.category_index.end()) excluded_mass += pools.category_counts[idx->second];
      }
    }
    // The entity itself can appear in the category vocabulary; a draw of it
    // would violate entity != category.
    auto self_idx = pools.category_index.find(p.entity);
    if (self_idx != pools.category_index.end() && (!gold || !gold->count(p.entity))) {
      excluded_mass += pools.category_counts[self_idx->second];
    }
    if (excluded_mass >= pools.total_mass) return std::nullopt;
    std::size_t r = rng.below(pools.total_mass - excluded_mass);
    for (std::size_t i = 0; i < pools.categories.size(); ++i) {
      const auto& cat = pools.categories[i];
      if (cat == p.entity || (gold && gold->count(cat))) continue;
      if (r < pools.category_counts[i]) {
        chosen = cat;
        break;
      }
      r -= pools.category_counts[i];
    }
  } else {
    auto it = pools.categories_by_class.find(p.onto_class);
    if (it == pools.categories_by_class.end()) return std::nullopt;
    const auto& pool = it->second;
    std::vector<std::size_t> excluded;
    if (auto self = index_in_sorted(pool, p.entity)) excluded.push_back(*self);
    if (gold) {
      for (const auto& g : *gold) {
        if (auto idx = index_in_sorted(pool, g)) excluded.push_back(*idx);
      }
    }
    std::sort(excluded.begin(), excluded.end());
    excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());
    if (excluded.size() >= pool.size()) return std::nullopt;
    std::size_t k = rng.below(pool.size() - excluded.size());
    chosen = pool[skip_excluded(k, excluded)];
  }
  if (chosen.empty()) throw std::logic_error("gen_notinst: sampling walked off the pool");
  NegType t = mode == NotInstMode::GLOBAL ? NegType::NOTINST_GLOBAL : NegType::NOTINST_INCLASS;
  return PairRecord{p.entity, chosen, p.onto_class, Label::NEGATIVE, t};
}

std::size_t VariantDataset::positive_count() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.label == Label::POSITIVE;
  return n;
}

std::size_t VariantDataset::negative_count() const { return records.size() - positive_count(); }

VariantDataset build_variant(const std::vector<PairRecord>& positives, Variant variant,
                             std::uint64_t seed) {
  if (positives.empty()) throw std::runtime_error("build_variant: empty positive set");
  ConfounderPools pools = make_pools(positives);
  auto neg_types = variant_neg_types(variant);

  VariantDataset vd;
  vd.variant = variant;
  vd.seed = seed;
  vd.records.reserve(positives.size() * (1 + neg_types.size()));

  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& p = positives[i];
    Rng rng(derive_stream(seed, "confounder", i));
    std::vector<PairRecord> negs;
    bool ok = true;
    for (NegType t : neg_types) {
      std::optional<PairRecord> neg;
      switch (t) {
        case NegType::INVERSE: {
          auto inv = gen_inverse(p);
          // Reject a swap that happens to be a genuine positive pair.
          if (!pools.is_positive_pair(inv.entity, inv.category)) neg = inv;
          break;
        }
        case NegType::INST2INST:
          neg = gen_inst2inst(p, pools, rng);
          break;
        case NegType::NOTINST_GLOBAL:
          neg = gen_notinst(p, pools, NotInstMode::GLOBAL, rng);
          break;
        case NegType::NOTINST_INCLASS:
          neg = gen_notinst(p, pools, NotInstMode::INCLASS, rng);
          break;
        case NegType::NONE:
          throw std::logic_error("NONE is not a confounder type");
      }
      if (!neg) {
        ok = false;
        break;
      }
      negs.push_back(std::move(*neg));
    }
    if (!ok) {
      vd.skipped_positives++;
      continue;
    }
    vd.records.push_back(p);
    for (auto& n : negs) vd.records.push_back(std::move(n));
  }
  return vd;
}

namespace {

nlohmann::json variant_header(const VariantDataset& vd) {
  nlohmann::json h;
  h["variant"] = variant_name(vd.variant);
  h["seed"] = vd.seed;
  h["skipped_positives"] = vd.skipped_positives;
  h["decisions"] = {
      {"global_sampling", "datapoint_frequency"},
      {"inclass_sampling", "uniform_distinct"},
      {"generation_failure", "skip_with_positive"},
  };
  return h;
}

}  // namespace

void save_variant(const std::string& path, const VariantDataset& vd) {
  std::ostringstream out;
  out << variant_header(vd).dump() << '\n';
  nlohmann::json j;
  for (const auto& r : vd.records) {
    j["entity"] = r.entity;
    j["category"] = r.category;
    j["onto_class"] = r.onto_class;
    j["label"] = label_name(r.label);
    j["neg_type"] = neg_type_name(r.neg_type);
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

VariantDataset load_variant(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open variant file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty variant file");
  VariantDataset vd;
  try {
    auto h = nlohmann::json::parse(line);
    vd.variant = variant_from_name(h.at("variant").get<std::string>());
    vd.seed = h.at("seed").get<std::uint64_t>();
    vd.skipped_positives = h.value("skipped_positives", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ":1: bad variant header: " + e.what());
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      PairRecord r;
      r.entity = j.at("entity").get<std::string>();
      r.category = j.at("category").get<std::string>();
      r.onto_class = j.at("onto_class").get<std::string>();
      r.label = label_from_name(j.at("label").get<std::string>());
      r.neg_type = neg_type_from_name(j.at("neg_type").get<std::string>());
      vd.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return vd;
}

}  // namespace instadet
