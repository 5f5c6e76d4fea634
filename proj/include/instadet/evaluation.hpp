#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "instadet/classifier.hpp"
#include "instadet/confounders.hpp"
#include "instadet/fold_plan.hpp"

namespace instadet {

enum class CategoryRep { CONCEPT, CENTROID };

std::string category_rep_name(CategoryRep r);
CategoryRep category_rep_from_name(const std::string& s);

// F1 with the positive class as target. FP + FN == 0 counts as a perfect 1.0
// (nothing to miss, nothing spurious); TP == 0 with errors present is 0.
double f1_positive(std::size_t tp, std::size_t fp, std::size_t fn);

struct FoldCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double f1 = 0.0;

  std::size_t total() const { return tp + fp + fn + tn; }
};

FoldCounts count_predictions(const std::vector<int>& preds, const std::vector<int>& golds);

// Pool counts across folds, then one F1.
double micro_average(const std::vector<FoldCounts>& folds);
// Mean of per-fold F1 (informational).
double macro_average(const std::vector<FoldCounts>& folds);

// Constant positive predictions.
std::vector<int> baseline_pos(std::size_t n);
// Independent positive predictions with probability p.
std::vector<int> baseline_freq(std::size_t n, double p, Rng& rng);

struct EvalReport {
  std::string variant;
  std::string model_id;  // lr / nn1 / nn2 / bl_pos / bl_freq
  std::string input_fn;  // empty for baselines
  std::string category_rep;
  bool filtered = true;
  std::uint64_t seed = 0;
  int chosen_width = 0;
  std::vector<FoldCounts> per_fold;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  bool complete = true;
  std::string error;  // set when a fold failed and the report is partial
};

// Distinct second-member tokens that are genuine categories (positives and
// NotInst negatives; inverse and inst2inst second members are entities).
std::vector<std::string> gold_category_tokens(const std::vector<PairRecord>& records);

// CONCEPT: each category's own embedding. CENTROID: mean embedding of the
// category's training-set entities (error naming any category with none).
CategoryRepMap build_category_reps(CategoryRep kind, const std::vector<PairRecord>& records,
                                   const std::vector<std::size_t>& train_idx,
                                   const std::vector<std::string>& needed_categories,
                                   const EmbeddingStore& store);

// Train/select once on the base split, then per fold: train at the chosen
// width on filtered_train, early-stop on filtered_val, score the fold.
// CENTROID reps are frozen from the base training split.
EvalReport evaluate_variant(const VariantDataset& vd, const FoldPlan& plan,
                            const ModelConfig& base_config, CategoryRep rep,
                            const EmbeddingStore& store,
                            const std::vector<int>& grid = default_width_grid(), int jobs = 1);

// which: "bl_pos" or "bl_freq"; prior is the positive-class probability for
// bl_freq (conventionally the variant's nominal positive rate).
EvalReport evaluate_baseline(const VariantDataset& vd, const FoldPlan& plan,
                             const std::string& which, double prior, std::uint64_t seed);

double nominal_positive_rate(Variant v);  // 0.5 balanced, 0.25 union

// Keep only records whose category has at least min_entities distinct
// entities in the positive set.
struct MinEntityFilterResult {
  std::vector<PairRecord> records;
  std::size_t categories_before = 0;
  std::size_t categories_after = 0;
};
MinEntityFilterResult filter_min_entities(const std::vector<PairRecord>& positives,
                                          std::size_t min_entities = 5);

struct ExperimentOptions {
  std::uint64_t seed = 1;
  double target_retention = 0.90;
  std::size_t forced_k = 0;  // 0 = choose by retention rule
  std::vector<Variant> variants = all_variants();
  std::vector<Arch> archs = {Arch::LR, Arch::NN_1HL, Arch::NN_2HL};
  std::vector<InputFn> input_fns = {InputFn::CONC};
  std::vector<int> grid = default_width_grid();
  bool with_baselines = true;
  bool with_ablation = false;  // rerun without overlap filtering
  std::size_t min_entities = 5;  // experiment 2 only
  int jobs = 1;
};

// Concept-based study over the variants: baselines, classifiers, optional
// no-filter ablation.
std::vector<EvalReport> run_experiment1(const std::vector<PairRecord>& positives,
                                        const EmbeddingStore& store,
                                        const ExperimentOptions& options);

// Centroid study: drop thin categories, rebuild variants, evaluate CONCEPT
// and CENTROID representations side by side.
std::vector<EvalReport> run_experiment2(const std::vector<PairRecord>& positives,
                                        const EmbeddingStore& store,
                                        const ExperimentOptions& options);

void save_eval_reports(const std::string& path, const std::vector<EvalReport>& reports);
std::vector<EvalReport> load_eval_reports(const std::string& path);

// One row per report with counts and scores, 4 decimals.
void write_eval_reports_csv(const std::string& path, const std::vector<EvalReport>& reports);
// Variant rows x model columns pivot of micro F1, 2 decimals.
void write_summary_csv(const std::string& path, const std::vector<EvalReport>& reports);

}  // namespace instadet
