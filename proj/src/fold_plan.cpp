#include "instadet/fold_plan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "instadet/rng.hpp"
#include "instadet/util.hpp"
#include "nlohmann/json.hpp"

namespace instadet {

BaseSplit split_80_10_10(std::size_t n, std::uint64_t seed) {
  if (n < 10) {
    throw std::runtime_error("split_80_10_10: need at least 10 records, have " +
                             std::to_string(n));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_stream(seed, "split"));
  rng.shuffle(idx);

  std::size_t n_train = n * 8 / 10;
  std::size_t n_val = n / 10;
  BaseSplit s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());
  return s;
}

std::vector<std::string> record_tokens(const std::vector<PairRecord>& records,
                                       const std::vector<std::size_t>& idx) {
  std::set<std::string> toks;
  for (std::size_t i : idx) {
    toks.insert(records.at(i).entity);
    toks.insert(records.at(i).category);
  }
  return {toks.begin(), toks.end()};
}

namespace {

std::unordered_set<std::string> token_set(const std::vector<PairRecord>& records,
                                          const std::vector<std::size_t>& idx) {
  std::unordered_set<std::string> toks;
  toks.reserve(idx.size() * 2);
  for (std::size_t i : idx) {
    toks.insert(records[i].entity);
    toks.insert(records[i].category);
  }
  return toks;
}

std::vector<std::size_t> keep_disjoint(const std::vector<PairRecord>& records,
                                       const std::vector<std::size_t>& idx,
                                       const std::unordered_set<std::string>& banned) {
  std::vector<std::size_t> kept;
  kept.reserve(idx.size());
  for (std::size_t i : idx) {
    if (!banned.count(records[i].entity) && !banned.count(records[i].category)) {
      kept.push_back(i);
    }
  }
  return kept;
}

}  // namespace

void filter_lexical_overlap(const std::vector<PairRecord>& records,
                            const std::vector<std::size_t>& train,
                            const std::vector<std::size_t>& val,
                            const std::vector<std::size_t>& fold,
                            std::vector<std::size_t>& filtered_train,
                            std::vector<std::size_t>& filtered_val) {
  auto banned = token_set(records, fold);
  filtered_train = keep_disjoint(records, train, banned);
  filtered_val = keep_disjoint(records, val, banned);
}

std::vector<std::vector<std::size_t>> chop_folds(const std::vector<std::size_t>& test,
                                                 std::size_t k) {
  if (k == 0 || k > test.size()) {
    throw std::runtime_error("chop_folds: fold count " + std::to_string(k) +
                             " out of range for test size " + std::to_string(test.size()));
  }
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t base = test.size() / k;
  std::size_t extra = test.size() % k;  // first `extra` folds get one more
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t len = base + (f < extra ? 1 : 0);
    folds[f].assign(test.begin() + pos, test.begin() + pos + len);
    pos += len;
  }
  return folds;
}

double mean_retention(const std::vector<PairRecord>& records,
                      const std::vector<std::size_t>& train,
                      const std::vector<std::size_t>& test, std::size_t k) {
  if (train.empty()) throw std::runtime_error("mean_retention: empty train set");
  auto folds = chop_folds(test, k);
  double sum = 0.0;
  for (const auto& fold : folds) {
    auto banned = token_set(records, fold);
    sum += static_cast<double>(keep_disjoint(records, train, banned).size()) /
           static_cast<double>(train.size());
  }
  return sum / static_cast<double>(k);
}

FoldCountChoice choose_fold_count(const std::vector<PairRecord>& records,
                                  const std::vector<std::size_t>& train,
                                  const std::vector<std::size_t>& test,
                                  double target_retention, int jobs) {
  if (test.empty()) throw std::runtime_error("choose_fold_count: empty test set");

  auto retention_at = [&](std::size_t k) {
    auto folds = chop_folds(test, k);
    std::vector<double> per_fold(k, 0.0);
    parallel_for(k, jobs, [&](std::size_t f) {
      auto banned = token_set(records, folds[f]);
      per_fold[f] = static_cast<double>(keep_disjoint(records, train, banned).size()) /
                    static_cast<double>(train.size());
    });
    double sum = 0.0;
    for (double r : per_fold) sum += r;
    return sum / static_cast<double>(k);
  };

  for (std::size_t k = 2; k <= test.size(); ++k) {
    double r = retention_at(k);
    if (r >= target_retention) return {k, r, false};
  }
  // Nothing qualified (or the test set is a singleton): use one record per
  // fold and flag whether even that missed the target.
  std::size_t k = test.size();
  double r = retention_at(k);
  return {k, r, r < target_retention};
}

FoldPlan build_fold_plan(const std::vector<PairRecord>& records, std::uint64_t seed,
                         double target_retention, std::size_t forced_k, int jobs) {
  auto base = split_80_10_10(records.size(), seed);

  FoldPlan plan;
  plan.seed = seed;
  plan.target_retention = target_retention;
  plan.base_train = base.train;
  plan.base_val = base.val;
  plan.base_test = base.test;

  std::size_t k;
  if (forced_k > 0) {
    k = forced_k;
  } else {
    auto choice = choose_fold_count(records, base.train, base.test, target_retention, jobs);
    k = choice.k;
    plan.retention_warning = choice.warning;
  }

  auto fold_tests = chop_folds(base.test, k);
  plan.folds.resize(k);
  parallel_for(k, jobs, [&](std::size_t f) {
    plan.folds[f].test = fold_tests[f];
    filter_lexical_overlap(records, base.train, base.val, fold_tests[f],
                           plan.folds[f].filtered_train, plan.folds[f].filtered_val);
  });

  double sum = 0.0;
  for (std::size_t f = 0; f < k; ++f) {
    if (plan.folds[f].filtered_train.empty()) {
      throw std::runtime_error("build_fold_plan: fold " + std::to_string(f) +
                               " has an empty filtered training set (untrainable plan)");
    }
    sum += static_cast<double>(plan.folds[f].filtered_train.size()) /
           static_cast<double>(base.train.size());
  }
  plan.retention = std::round(sum / static_cast<double>(k) * 10000.0) / 10000.0;
  if (forced_k > 0) plan.retention_warning = plan.retention < target_retention;
  return plan;
}

FoldPlan FoldPlan::without_filtering() const {
  FoldPlan plan = *this;
  plan.filtered = false;
  for (auto& fold : plan.folds) {
    fold.filtered_train = plan.base_train;
    fold.filtered_val = plan.base_val;
  }
  plan.retention = 1.0;
  plan.retention_warning = false;
  return plan;
}

void save_fold_plan(const std::string& path, const FoldPlan& plan) {
  nlohmann::json j;
  j["seed"] = plan.seed;
  j["target_retention"] = plan.target_retention;
  j["filtered"] = plan.filtered;
  j["base_train"] = plan.base_train;
  j["base_val"] = plan.base_val;
  j["base_test"] = plan.base_test;
  j["retention"] = plan.retention;
  j["retention_warning"] = plan.retention_warning;
  j["fold_count"] = plan.folds.size();
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : plan.folds) {
    folds.push_back({{"test", f.test},
                     {"filtered_train", f.filtered_train},
                     {"filtered_val", f.filtered_val}});
  }
  j["folds"] = std::move(folds);
  write_file(path, j.dump() + "\n");
}

FoldPlan load_fold_plan(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad fold plan: " + e.what());
  }
  FoldPlan plan;
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.target_retention = j.at("target_retention").get<double>();
  plan.filtered = j.at("filtered").get<bool>();
  plan.base_train = j.at("base_train").get<std::vector<std::size_t>>();
  plan.base_val = j.at("base_val").get<std::vector<std::size_t>>();
  plan.base_test = j.at("base_test").get<std::vector<std::size_t>>();
  plan.retention = j.at("retention").get<double>();
  plan.retention_warning = j.at("retention_warning").get<bool>();
  for (const auto& f : j.at("folds")) {
    FoldPlan::Fold fold;
    fold.test = f.at("test").get<std::vector<std::size_t>>();
    fold.filtered_train = f.at("filtered_train").get<std::vector<std::size_t>>();
    fold.filtered_val = f.at("filtered_val").get<std::vector<std::size_t>>();
    plan.folds.push_back(std::move(fold));
  }
  if (plan.folds.size() != j.at("fold_count").get<std::size_t>()) {
    throw std::runtime_error(path + ": fold_count does not match folds array");
  }
  return plan;
}

}  // namespace instadet
