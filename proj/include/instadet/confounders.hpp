#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "instadet/dataset.hpp"
#include "instadet/rng.hpp"

namespace instadet {

enum class Variant {
  POS_INVERSE,
  POS_INST2INST,
  POS_NOTINST_GLOBAL,
  POS_NOTINST_INCLASS,
  POS_UNION_GLOBAL,
  POS_UNION_INCLASS,
};

enum class NotInstMode { GLOBAL, INCLASS };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& s);
std::vector<Variant> all_variants();
bool is_union_variant(Variant v);
// Negatives paired with each positive, in emission order.
std::vector<NegType> variant_neg_types(Variant v);

// Sampling pools derived once from the positive set.
struct ConfounderPools {
  std::map<std::string, std::vector<std::string>> entities_by_class;    // sorted distinct
  std::map<std::string, std::vector<std::string>> categories_by_class;  // sorted distinct
  std::vector<std::string> categories;       // sorted distinct, all classes
  std::vector<std::size_t> category_counts;  // datapoint frequency, aligned with categories
  std::size_t total_mass = 0;                // = number of positive datapoints
  std::unordered_map<std::string, std::size_t> category_index;
  std::unordered_map<std::string, std::set<std::string>> gold;  // entity -> gold categories
  std::unordered_set<std::string> positive_pairs;               // "entity\tcategory"

  bool is_positive_pair(const std::string& entity, const std::string& category) const {
    return positive_pairs.count(entity + '\t' + category) > 0;
  }
};

ConfounderPools make_pools(const std::vector<PairRecord>& positives);

// Swap entity and category. Always succeeds; the caller rejects the rare
// swap that collides with another positive pair.
PairRecord gen_inverse(const PairRecord& p);

// (e, e') with e' uniform over the distinct entities of p's class, excluding
// e itself and any e' that would reproduce a positive pair. nullopt when no
// eligible entity remains.
std::optional<PairRecord> gen_inst2inst(const PairRecord& p, const ConfounderPools& pools,
                                        Rng& rng);

// (e, c'') with c'' avoiding every gold category of e. GLOBAL draws from the
// datapoint-frequency distribution over all categories; INCLASS draws
// uniformly from the distinct categories of p's class. nullopt when no
// eligible category remains.
std::optional<PairRecord> gen_notinst(const PairRecord& p, const ConfounderPools& pools,
                                      NotInstMode mode, Rng& rng);

struct VariantDataset {
  Variant variant = Variant::POS_INVERSE;
  std::uint64_t seed = 0;
  std::vector<PairRecord> records;  // each positive followed by its negatives
  std::size_t skipped_positives = 0;

  std::size_t positive_count() const;
  std::size_t negative_count() const;
};

// Pure function of (positives, variant, seed): every kept positive is
// followed by exactly the variant's negatives; a positive whose generation
// fails is skipped together with its negatives so the ratio stays exact.
VariantDataset build_variant(const std::vector<PairRecord>& positives, Variant variant,
                             std::uint64_t seed);

// JSON Lines with a header line carrying variant, seed, skip count, and the
// sampling decisions.
void save_variant(const std::string& path, const VariantDataset& vd);
VariantDataset load_variant(const std::string& path);

}  // namespace instadet
