#include "instadet/evaluation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "instadet/util.hpp"
#include "nlohmann/json.hpp"

namespace instadet {

std::string category_rep_name(CategoryRep r) {
  return r == CategoryRep::CONCEPT ? "concept" : "centroid";
}

CategoryRep category_rep_from_name(const std::string& s) {
  if (s == "concept") return CategoryRep::CONCEPT;
  if (s == "centroid") return CategoryRep::CENTROID;
  throw std::runtime_error("unknown category representation: '" + s +
                           "' (want concept or centroid)");
}

double f1_positive(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (fp + fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

FoldCounts count_predictions(const std::vector<int>& preds, const std::vector<int>& golds) {
  if (preds.size() != golds.size()) {
    throw std::runtime_error("count_predictions: predictions/golds length mismatch");
  }
  if (preds.empty()) throw std::runtime_error("count_predictions: empty fold");
  FoldCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == 1 && golds[i] == 1) ++c.tp;
    if (preds[i] == 1 && golds[i] == 0) ++c.fp;
    if (preds[i] == 0 && golds[i] == 1) ++c.fn;
    if (preds[i] == 0 && golds[i] == 0) ++c.tn;
  }
  c.f1 = f1_positive(c.tp, c.fp, c.fn);
  return c;
}

double micro_average(const std::vector<FoldCounts>& folds) {
  if (folds.empty()) throw std::runtime_error("micro_average: no folds");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& f : folds) {
    tp += f.tp;
    fp += f.fp;
    fn += f.fn;
  }
  return f1_positive(tp, fp, fn);
}

double macro_average(const std::vector<FoldCounts>& folds) {
  if (folds.empty()) throw std::runtime_error("macro_average: no folds");
  double sum = 0.0;
  for (const auto& f : folds) sum += f.f1;
  return sum / static_cast<double>(folds.size());
}

std::vector<int> baseline_pos(std::size_t n) { return std::vector<int>(n, 1); }

std::vector<int> baseline_freq(std::size_t n, double p, Rng& rng) {
  if (p <= 0.0 || p >= 1.0) {
    throw std::runtime_error("baseline_freq: prior must lie strictly in (0,1)");
  }
  std::vector<int> preds(n);
  for (auto& v : preds) v = rng.real01() < p ? 1 : 0;
  return preds;
}

double nominal_positive_rate(Variant v) { return is_union_variant(v) ? 0.25 : 0.5; }

std::vector<std::string> gold_category_tokens(const std::vector<PairRecord>& records) {
  std::set<std::string> cats;
  for (const auto& r : records) {
    switch (r.neg_type) {
      case NegType::NONE:
      case NegType::NOTINST_GLOBAL:
      case NegType::NOTINST_INCLASS:
        cats.insert(r.category);
        break;
      case NegType::INVERSE:
      case NegType::INST2INST:
        break;  // second member is an entity, not a category
    }
  }
  return {cats.begin(), cats.end()};
}

CategoryRepMap build_category_reps(CategoryRep kind, const std::vector<PairRecord>& records,
                                   const std::vector<std::size_t>& train_idx,
                                   const std::vector<std::string>& needed_categories,
                                   const EmbeddingStore& store) {
  CategoryRepMap reps;
  if (kind == CategoryRep::CONCEPT) {
    for (const auto& cat : needed_categories) {
      auto v = store.lookup(cat);
      if (!v) throw std::runtime_error("concept representation: category not in store: '" + cat + "'");
      reps.emplace(cat, std::move(*v));
    }
    return reps;
  }

  std::unordered_map<std::string, std::set<std::string>> train_entities;
  for (std::size_t i : train_idx) {
    const auto& r = records.at(i);
    if (r.label == Label::POSITIVE) train_entities[r.category].insert(r.entity);
  }
  for (const auto& cat : needed_categories) {
    auto it = train_entities.find(cat);
    if (it == train_entities.end() || it->second.empty()) {
      throw std::runtime_error("centroid representation: category '" + cat +
                               "' has no training-set entities");
    }
    reps.emplace(cat, centroid(store, {it->second.begin(), it->second.end()}));
  }
  return reps;
}

namespace {

std::vector<int> predict_labels(const TrainedModel& model, const Eigen::MatrixXd& X) {
  auto probs = model.predict_proba_batch(X);
  std::vector<int> preds(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    preds[static_cast<std::size_t>(i)] = probs(i, 1) > probs(i, 0) ? 1 : 0;
  }
  return preds;
}

}  // namespace

EvalReport evaluate_variant(const VariantDataset& vd, const FoldPlan& plan,
                            const ModelConfig& base_config, CategoryRep rep,
                            const EmbeddingStore& store, const std::vector<int>& grid,
                            int jobs) {
  EvalReport report;
  report.variant = variant_name(vd.variant);
  report.model_id = arch_name(base_config.arch);
  report.input_fn = input_fn_name(base_config.input_fn);
  report.category_rep = category_rep_name(rep);
  report.filtered = plan.filtered;
  report.seed = base_config.seed;

  // Representations are frozen from the base training split before any
  // fold is touched.
  auto needed = gold_category_tokens(vd.records);
  auto reps = build_category_reps(rep, vd.records, plan.base_train, needed, store);

  // One grid search on the base split; folds reuse the chosen width.
  auto Xtr = featurize_records(vd.records, plan.base_train, store, reps, base_config.input_fn);
  auto ytr = labels_of(vd.records, plan.base_train);
  auto Xval = featurize_records(vd.records, plan.base_val, store, reps, base_config.input_fn);
  auto yval = labels_of(vd.records, plan.base_val);
  auto search = hyperparam_search(base_config, Xtr, ytr, Xval, yval, grid, jobs);
  report.chosen_width = search.best_width;

  report.per_fold.resize(plan.fold_count());
  std::vector<std::string> fold_errors(plan.fold_count());
  parallel_for(plan.fold_count(), jobs, [&](std::size_t f) {
    try {
      const auto& fold = plan.folds[f];
      if (fold.filtered_val.empty()) {
        throw std::runtime_error("fold " + std::to_string(f) +
                                 " has an empty validation set after filtering");
      }
      ModelConfig cfg = base_config;
      cfg.hidden_units = search.best_width;
      cfg.seed = derive_stream(base_config.seed, "fold", f);
      auto model = train(cfg, vd.records, fold.filtered_train, fold.filtered_val, store, reps);
      auto Xte = featurize_records(vd.records, fold.test, store, reps, cfg.input_fn);
      report.per_fold[f] = count_predictions(predict_labels(model, Xte),
                                             labels_of(vd.records, fold.test));
    } catch (const std::exception& e) {
      fold_errors[f] = e.what();
    }
  });

  std::vector<FoldCounts> ok_folds;
  for (std::size_t f = 0; f < plan.fold_count(); ++f) {
    if (!fold_errors[f].empty()) {
      report.complete = false;
      if (report.error.empty()) report.error = fold_errors[f];
      continue;
    }
    ok_folds.push_back(report.per_fold[f]);
  }
  if (ok_folds.empty()) {
    throw std::runtime_error("evaluate_variant: every fold failed; first error: " + report.error);
  }
  report.micro_f1 = micro_average(ok_folds);
  report.macro_f1 = macro_average(ok_folds);
  return report;
}

EvalReport evaluate_baseline(const VariantDataset& vd, const FoldPlan& plan,
                             const std::string& which, double prior, std::uint64_t seed) {
  if (which != "bl_pos" && which != "bl_freq") {
    throw std::runtime_error("unknown baseline: '" + which + "' (want bl_pos or bl_freq)");
  }
  EvalReport report;
  report.variant = variant_name(vd.variant);
  report.model_id = which;
  report.category_rep = "";
  report.filtered = plan.filtered;
  report.seed = seed;

  for (std::size_t f = 0; f < plan.fold_count(); ++f) {
    const auto& test = plan.folds[f].test;
    auto golds = labels_of(vd.records, test);
    std::vector<int> preds;
    if (which == "bl_pos") {
      preds = baseline_pos(test.size());
    } else {
      Rng rng(derive_stream(seed, "bl_freq", f));
      preds = baseline_freq(test.size(), prior, rng);
    }
    report.per_fold.push_back(count_predictions(preds, golds));
  }
  report.micro_f1 = micro_average(report.per_fold);
  report.macro_f1 = macro_average(report.per_fold);
  return report;
}

MinEntityFilterResult filter_min_entities(const std::vector<PairRecord>& positives,
                                          std::size_t min_entities) {
  std::unordered_map<std::string, std::set<std::string>> entities;
  for (const auto& r : positives) {
    if (r.label != Label::POSITIVE) {
      throw std::runtime_error("filter_min_entities: input must be positive records");
    }
    entities[r.category].insert(r.entity);
  }
  MinEntityFilterResult result;
  result.categories_before = entities.size();
  std::unordered_set<std::string> kept;
  for (const auto& [cat, ents] : entities) {
    if (ents.size() >= min_entities) kept.insert(cat);
  }
  result.categories_after = kept.size();
  for (const auto& r : positives) {
    if (kept.count(r.category)) result.records.push_back(r);
  }
  return result;
}

namespace {

std::vector<EvalReport> run_study(const std::vector<PairRecord>& positives,
                                  const EmbeddingStore& store, const ExperimentOptions& options,
                                  const std::vector<CategoryRep>& rep_kinds) {
  if (positives.empty()) throw std::runtime_error("experiment: empty positive set");
  std::vector<EvalReport> reports;

  for (Variant variant : options.variants) {
    auto vd = build_variant(positives, variant,
                            derive_stream(options.seed, "variant",
                                          static_cast<std::uint64_t>(variant)));
    auto plan = build_fold_plan(vd.records, derive_stream(options.seed, "plan"),
                                options.target_retention, options.forced_k, options.jobs);
    std::vector<FoldPlan> plans = {plan};
    if (options.with_ablation) plans.push_back(plan.without_filtering());

    for (const auto& p : plans) {
      if (options.with_baselines) {
        reports.push_back(evaluate_baseline(vd, p, "bl_pos", 0.5, options.seed));
        reports.push_back(
            evaluate_baseline(vd, p, "bl_freq", nominal_positive_rate(variant), options.seed));
      }
      for (CategoryRep rep : rep_kinds) {
        for (Arch arch : options.archs) {
          for (InputFn fn : options.input_fns) {
            ModelConfig cfg;
            cfg.arch = arch;
            cfg.input_fn = fn;
            cfg.seed = derive_stream(options.seed, "model",
                                     fnv1a64(arch_name(arch) + "/" + input_fn_name(fn) + "/" +
                                             category_rep_name(rep) + "/" +
                                             variant_name(variant) + "/" +
                                             (p.filtered ? "filtered" : "nofilter")));
            reports.push_back(evaluate_variant(vd, p, cfg, rep, store, options.grid, options.jobs));
          }
        }
      }
    }
  }
  return reports;
}

}  // namespace

std::vector<EvalReport> run_experiment1(const std::vector<PairRecord>& positives,
                                        const EmbeddingStore& store,
                                        const ExperimentOptions& options) {
  return run_study(positives, store, options, {CategoryRep::CONCEPT});
}

std::vector<EvalReport> run_experiment2(const std::vector<PairRecord>& positives,
                                        const EmbeddingStore& store,
                                        const ExperimentOptions& options) {
  auto filtered = filter_min_entities(positives, options.min_entities);
  if (filtered.records.empty()) {
    throw std::runtime_error("experiment 2: no categories have at least " +
                             std::to_string(options.min_entities) + " entities");
  }
  return run_study(filtered.records, store, options,
                   {CategoryRep::CONCEPT, CategoryRep::CENTROID});
}

namespace {

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["variant"] = r.variant;
  j["model_id"] = r.model_id;
  j["input_fn"] = r.input_fn;
  j["category_rep"] = r.category_rep;
  j["filtered"] = r.filtered;
  j["seed"] = r.seed;
  j["chosen_width"] = r.chosen_width;
  j["micro_f1"] = r.micro_f1;
  j["macro_f1"] = r.macro_f1;
  j["complete"] = r.complete;
  j["error"] = r.error;
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.per_fold) {
    folds.push_back(
        {{"tp", f.tp}, {"fp", f.fp}, {"fn", f.fn}, {"tn", f.tn}, {"f1", f.f1}});
  }
  j["per_fold"] = std::move(folds);
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.variant = j.at("variant").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.input_fn = j.at("input_fn").get<std::string>();
  r.category_rep = j.at("category_rep").get<std::string>();
  r.filtered = j.at("filtered").get<bool>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.chosen_width = j.at("chosen_width").get<int>();
  r.micro_f1 = j.at("micro_f1").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.complete = j.at("complete").get<bool>();
  r.error = j.at("error").get<std::string>();
  for (const auto& f : j.at("per_fold")) {
    FoldCounts c;
    c.tp = f.at("tp").get<std::size_t>();
    c.fp = f.at("fp").get<std::size_t>();
    c.fn = f.at("fn").get<std::size_t>();
    c.tn = f.at("tn").get<std::size_t>();
    c.f1 = f.at("f1").get<double>();
    r.per_fold.push_back(c);
  }
  return r;
}

}  // namespace

void save_eval_reports(const std::string& path, const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  for (const auto& r : reports) out << report_to_json(r).dump() << '\n';
  write_file(path, out.str());
}

std::vector<EvalReport> load_eval_reports(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<EvalReport> reports;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      reports.push_back(report_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return reports;
}

namespace {

std::string model_column(const EvalReport& r) {
  std::string col = r.model_id;
  if (!r.input_fn.empty()) col += "_" + r.input_fn;
  if (!r.category_rep.empty()) col += "_" + r.category_rep;
  if (!r.filtered) col += "_nofilter";
  return col;
}

}  // namespace

void write_eval_reports_csv(const std::string& path, const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "variant,model,input_fn,category_rep,filtered,chosen_width,folds,tp,fp,fn,tn,"
         "micro_f1,macro_f1,complete\n";
  for (const auto& r : reports) {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& f : r.per_fold) {
      tp += f.tp;
      fp += f.fp;
      fn += f.fn;
      tn += f.tn;
    }
    out << r.variant << ',' << r.model_id << ',' << r.input_fn << ',' << r.category_rep << ','
        << (r.filtered ? 1 : 0) << ',' << r.chosen_width << ',' << r.per_fold.size() << ','
        << tp << ',' << fp << ',' << fn << ',' << tn << ',' << format_double(r.micro_f1, 4)
        << ',' << format_double(r.macro_f1, 4) << ',' << (r.complete ? 1 : 0) << '\n';
  }
  write_file(path, out.str());
}

void write_summary_csv(const std::string& path, const std::vector<EvalReport>& reports) {
  std::set<std::string> variants_seen;
  std::set<std::string> columns;
  std::map<std::pair<std::string, std::string>, double> cells;
  for (const auto& r : reports) {
    variants_seen.insert(r.variant);
    std::string col = model_column(r);
    columns.insert(col);
    cells[{r.variant, col}] = r.micro_f1;
  }
  std::ostringstream out;
  out << "variant";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  // Keep the conventional variant order rather than alphabetical.
  for (Variant v : all_variants()) {
    auto name = variant_name(v);
    if (!variants_seen.count(name)) continue;
    out << name;
    for (const auto& c : columns) {
      auto it = cells.find({name, c});
      out << ',';
      if (it != cells.end()) out << format_double(it->second, 2);
    }
    out << '\n';
  }
  write_file(path, out.str());
}

}  // namespace instadet
