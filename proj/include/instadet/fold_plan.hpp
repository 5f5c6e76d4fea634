#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "instadet/dataset.hpp"

namespace instadet {

// Base 80/10/10 split plus K disjoint test folds, each with the train/val
// records that survive zero-lexical-overlap filtering against the fold.
struct FoldPlan {
  struct Fold {
    std::vector<std::size_t> test;
    std::vector<std::size_t> filtered_train;
    std::vector<std::size_t> filtered_val;
  };

  std::uint64_t seed = 0;
  double target_retention = 0.0;
  bool filtered = true;  // false in the memorization-ablation mode
  std::vector<std::size_t> base_train;
  std::vector<std::size_t> base_val;
  std::vector<std::size_t> base_test;
  std::vector<Fold> folds;
  double retention = 0.0;  // mean |filtered_train| / |base_train|, 4 decimals
  bool retention_warning = false;  // set when no K met the target

  std::size_t fold_count() const { return folds.size(); }
  // Same base split and folds with filtering undone (retention 1.0).
  FoldPlan without_filtering() const;
};

struct BaseSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Uniform joint shuffle; sizes floor(0.8n) / floor(0.1n) / remainder.
BaseSplit split_80_10_10(std::size_t n, std::uint64_t seed);

// Tokens (entity and category position alike) a record set touches.
std::vector<std::string> record_tokens(const std::vector<PairRecord>& records,
                                       const std::vector<std::size_t>& idx);

// Remove from train/val every record sharing any token with the fold.
void filter_lexical_overlap(const std::vector<PairRecord>& records,
                            const std::vector<std::size_t>& train,
                            const std::vector<std::size_t>& val,
                            const std::vector<std::size_t>& fold,
                            std::vector<std::size_t>& filtered_train,
                            std::vector<std::size_t>& filtered_val);

// Chop `test` into K contiguous folds with sizes differing by at most one.
std::vector<std::vector<std::size_t>> chop_folds(const std::vector<std::size_t>& test,
                                                 std::size_t k);

// Mean |filtered_train| / |train| over the K folds.
double mean_retention(const std::vector<PairRecord>& records,
                      const std::vector<std::size_t>& train,
                      const std::vector<std::size_t>& test, std::size_t k);

// Smallest K in [2, |test|] with mean retention >= target; |test| with a
// warning flag when none qualifies.
struct FoldCountChoice {
  std::size_t k = 0;
  double retention = 0.0;
  bool warning = false;
};
FoldCountChoice choose_fold_count(const std::vector<PairRecord>& records,
                                  const std::vector<std::size_t>& train,
                                  const std::vector<std::size_t>& test,
                                  double target_retention = 0.90, int jobs = 1);

// split + fold-count choice + per-fold filtering. forced_k = 0 means choose
// by the retention rule. Throws if any fold's filtered train is empty.
FoldPlan build_fold_plan(const std::vector<PairRecord>& records, std::uint64_t seed,
                         double target_retention = 0.90, std::size_t forced_k = 0,
                         int jobs = 1);

void save_fold_plan(const std::string& path, const FoldPlan& plan);
FoldPlan load_fold_plan(const std::string& path);

}  // namespace instadet
