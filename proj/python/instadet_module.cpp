#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "instadet/classifier.hpp"
#include "instadet/confounders.hpp"
#include "instadet/dataset.hpp"
#include "instadet/embedding_store.hpp"
#include "instadet/evaluation.hpp"
#include "instadet/fold_plan.hpp"
#include "instadet/geometry.hpp"
#include "instadet/rng.hpp"

namespace py = pybind11;
using namespace instadet;

namespace {

ModelConfig config_from_args(const std::string& arch, const std::string& input_fn,
                             int hidden_units, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.arch = arch_from_name(arch);
  cfg.input_fn = input_fn_from_name(input_fn);
  cfg.hidden_units = hidden_units;
  cfg.seed = seed;
  return cfg;
}

ExperimentOptions options_from_kwargs(std::uint64_t seed, double target_retention,
                                      std::size_t forced_k,
                                      const std::vector<std::string>& variants,
                                      const std::vector<std::string>& models,
                                      const std::vector<std::string>& input_fns,
                                      const std::vector<int>& grid, bool with_baselines,
                                      bool with_ablation, std::size_t min_entities,
                                      int jobs) {
  ExperimentOptions opt;
  opt.seed = seed;
  opt.target_retention = target_retention;
  opt.forced_k = forced_k;
  if (!variants.empty()) {
    opt.variants.clear();
    for (const auto& v : variants) opt.variants.push_back(variant_from_name(v));
  }
  if (!models.empty()) {
    opt.archs.clear();
    for (const auto& m : models) opt.archs.push_back(arch_from_name(m));
  }
  if (!input_fns.empty()) {
    opt.input_fns.clear();
    for (const auto& f : input_fns) opt.input_fns.push_back(input_fn_from_name(f));
  }
  if (!grid.empty()) opt.grid = grid;
  opt.with_baselines = with_baselines;
  opt.with_ablation = with_ablation;
  opt.min_entities = min_entities;
  opt.jobs = jobs;
  return opt;
}

}  // namespace

PYBIND11_MODULE(instadet, m) {
  m.doc() = "instantiation-detection toolkit bindings";

  py::class_<EmbeddingStore>(m, "EmbeddingStore")
      .def_static("load_text", &EmbeddingStore::load_text, py::arg("path"))
      .def_static("load_word2vec_binary", &EmbeddingStore::load_word2vec_binary,
                  py::arg("path"))
      .def_static("from_rows", &EmbeddingStore::from_rows, py::arg("tokens"),
                  py::arg("rows"))
      .def("save_text", &EmbeddingStore::save_text, py::arg("path"))
      .def("save_word2vec_binary", &EmbeddingStore::save_word2vec_binary, py::arg("path"))
      .def_property_readonly("dim", &EmbeddingStore::dim)
      .def_property_readonly("rescaled", &EmbeddingStore::rescaled)
      .def_property_readonly("vocab", &EmbeddingStore::vocab)
      .def("__len__", &EmbeddingStore::size)
      .def("__contains__",
           [](const EmbeddingStore& s, const std::string& t) { return s.contains(t); })
      .def(
          "lookup",
          [](const EmbeddingStore& s, const std::string& t) -> py::object {
            auto v = s.lookup(t);
            if (!v) return py::none();
            return py::cast(*v);
          },
          py::arg("token"))
      .def("rescale_columns", &EmbeddingStore::rescale_columns, py::arg("subset"))
      .def("rescale_all", &EmbeddingStore::rescale_all);

  m.def("cosine", &cosine, py::arg("a"), py::arg("b"));

  py::class_<PairRecord>(m, "PairRecord")
      .def(py::init([](const std::string& entity, const std::string& category,
                       const std::string& onto_class, const std::string& label,
                       const std::string& neg_type) {
             PairRecord r;
             r.entity = entity;
             r.category = category;
             r.onto_class = onto_class;
             r.label = label_from_name(label);
             r.neg_type = neg_type_from_name(neg_type);
             return r;
           }),
           py::arg("entity"), py::arg("category"), py::arg("onto_class") = "other",
           py::arg("label") = "positive", py::arg("neg_type") = "none")
      .def_readwrite("entity", &PairRecord::entity)
      .def_readwrite("category", &PairRecord::category)
      .def_readwrite("onto_class", &PairRecord::onto_class)
      .def_property(
          "label", [](const PairRecord& r) { return label_name(r.label); },
          [](PairRecord& r, const std::string& s) { r.label = label_from_name(s); })
      .def_property(
          "neg_type", [](const PairRecord& r) { return neg_type_name(r.neg_type); },
          [](PairRecord& r, const std::string& s) { r.neg_type = neg_type_from_name(s); })
      .def("__eq__", [](const PairRecord& a, const PairRecord& b) { return a == b; })
      .def("__repr__", [](const PairRecord& r) {
        return "PairRecord(" + r.entity + ", " + r.category + ", " + r.onto_class + ", " +
               label_name(r.label) + ")";
      });

  py::class_<BuildReport>(m, "BuildReport")
      .def_readonly("total_datapoints", &BuildReport::total_datapoints)
      .def_readonly("total_entities", &BuildReport::total_entities)
      .def_readonly("total_categories", &BuildReport::total_categories)
      .def_readonly("input_pairs", &BuildReport::input_pairs)
      .def_readonly("dropped_entity_miss", &BuildReport::dropped_entity_miss)
      .def_readonly("dropped_category_miss", &BuildReport::dropped_category_miss)
      .def_readonly("dropped_self_pair", &BuildReport::dropped_self_pair)
      .def_readonly("dropped_duplicate", &BuildReport::dropped_duplicate)
      .def("to_text", &BuildReport::to_text);

  py::class_<RawPair>(m, "RawPair")
      .def(py::init([](const std::vector<std::string>& entity_elements,
                       const std::vector<std::string>& category_elements,
                       const std::string& entity_lexfile,
                       const std::string& category_lexfile) {
             return RawPair{entity_elements, category_elements, entity_lexfile,
                            category_lexfile};
           }),
           py::arg("entity_elements"), py::arg("category_elements"),
           py::arg("entity_lexfile") = "", py::arg("category_lexfile") = "")
      .def_readwrite("entity_elements", &RawPair::entity_elements)
      .def_readwrite("category_elements", &RawPair::category_elements)
      .def_readwrite("entity_lexfile", &RawPair::entity_lexfile)
      .def_readwrite("category_lexfile", &RawPair::category_lexfile);

  m.def("read_raw_pairs_tsv", &read_raw_pairs_tsv, py::arg("path"));
  m.def("build_positive_set", &build_positive_set, py::arg("raw_pairs"), py::arg("store"),
        py::arg("rare_threshold") = 50);
  m.def("save_records_jsonl", &save_records_jsonl, py::arg("path"), py::arg("records"));
  m.def("load_records_jsonl", &load_records_jsonl, py::arg("path"));

  m.def("variant_names", [] {
    std::vector<std::string> names;
    for (Variant v : all_variants()) names.push_back(variant_name(v));
    return names;
  });

  py::class_<VariantDataset>(m, "VariantDataset")
      .def_property_readonly(
          "variant", [](const VariantDataset& vd) { return variant_name(vd.variant); })
      .def_readonly("seed", &VariantDataset::seed)
      .def_readonly("records", &VariantDataset::records)
      .def_readonly("skipped_positives", &VariantDataset::skipped_positives)
      .def("positive_count", &VariantDataset::positive_count)
      .def("negative_count", &VariantDataset::negative_count);

  m.def(
      "build_variant",
      [](const std::vector<PairRecord>& positives, const std::string& variant,
         std::uint64_t seed) {
        return build_variant(positives, variant_from_name(variant), seed);
      },
      py::arg("positives"), py::arg("variant"), py::arg("seed") = 1);
  m.def("save_variant", &save_variant, py::arg("path"), py::arg("dataset"));
  m.def("load_variant", &load_variant, py::arg("path"));

  py::class_<FoldPlan::Fold>(m, "Fold")
      .def_readonly("test", &FoldPlan::Fold::test)
      .def_readonly("filtered_train", &FoldPlan::Fold::filtered_train)
      .def_readonly("filtered_val", &FoldPlan::Fold::filtered_val);

  py::class_<FoldPlan>(m, "FoldPlan")
      .def_readonly("seed", &FoldPlan::seed)
      .def_readonly("target_retention", &FoldPlan::target_retention)
      .def_readonly("filtered", &FoldPlan::filtered)
      .def_readonly("base_train", &FoldPlan::base_train)
      .def_readonly("base_val", &FoldPlan::base_val)
      .def_readonly("base_test", &FoldPlan::base_test)
      .def_readonly("folds", &FoldPlan::folds)
      .def_readonly("retention", &FoldPlan::retention)
      .def_readonly("retention_warning", &FoldPlan::retention_warning)
      .def("fold_count", &FoldPlan::fold_count)
      .def("without_filtering", &FoldPlan::without_filtering);

  m.def("build_fold_plan", &build_fold_plan, py::arg("records"), py::arg("seed") = 1,
        py::arg("target_retention") = 0.90, py::arg("forced_k") = 0, py::arg("jobs") = 1);
  m.def("save_fold_plan", &save_fold_plan, py::arg("path"), py::arg("plan"));
  m.def("load_fold_plan", &load_fold_plan, py::arg("path"));

  py::class_<TrainedModel>(m, "TrainedModel")
      .def_property_readonly(
          "arch", [](const TrainedModel& t) { return arch_name(t.config.arch); })
      .def_property_readonly(
          "input_fn", [](const TrainedModel& t) { return input_fn_name(t.config.input_fn); })
      .def_property_readonly(
          "hidden_units", [](const TrainedModel& t) { return t.config.hidden_units; })
      .def_readonly("input_dim", &TrainedModel::input_dim)
      .def_readonly("stopped_epoch", &TrainedModel::stopped_epoch)
      .def_readonly("best_epoch", &TrainedModel::best_epoch)
      .def_readonly("best_val_loss", &TrainedModel::best_val_loss)
      .def("predict_proba", &TrainedModel::predict_proba, py::arg("x"))
      .def("predict_proba_batch", &TrainedModel::predict_proba_batch, py::arg("matrix"))
      .def("predict_label", &TrainedModel::predict_label, py::arg("x"));

  m.def(
      "train_model",
      [](const Eigen::MatrixXd& x_train, const std::vector<int>& y_train,
         const Eigen::MatrixXd& x_val, const std::vector<int>& y_val,
         const std::string& arch, const std::string& input_fn, int hidden_units,
         std::uint64_t seed) {
        ModelConfig cfg = config_from_args(arch, input_fn, hidden_units, seed);
        return train_on_features(cfg, x_train, y_train, x_val, y_val);
      },
      py::arg("x_train"), py::arg("y_train"), py::arg("x_val"), py::arg("y_val"),
      py::arg("arch") = "lr", py::arg("input_fn") = "conc", py::arg("hidden_units") = 0,
      py::arg("seed") = 1);
  m.def("save_model", &save_model, py::arg("path"), py::arg("model"));
  m.def("load_model", &load_model, py::arg("path"));

  m.def("f1_positive", &f1_positive, py::arg("tp"), py::arg("fp"), py::arg("fn"));

  py::class_<FoldCounts>(m, "FoldCounts")
      .def_readonly("tp", &FoldCounts::tp)
      .def_readonly("fp", &FoldCounts::fp)
      .def_readonly("fn", &FoldCounts::fn)
      .def_readonly("tn", &FoldCounts::tn)
      .def_readonly("f1", &FoldCounts::f1)
      .def("total", &FoldCounts::total);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("variant", &EvalReport::variant)
      .def_readonly("model_id", &EvalReport::model_id)
      .def_readonly("input_fn", &EvalReport::input_fn)
      .def_readonly("category_rep", &EvalReport::category_rep)
      .def_readonly("filtered", &EvalReport::filtered)
      .def_readonly("seed", &EvalReport::seed)
      .def_readonly("chosen_width", &EvalReport::chosen_width)
      .def_readonly("per_fold", &EvalReport::per_fold)
      .def_readonly("micro_f1", &EvalReport::micro_f1)
      .def_readonly("macro_f1", &EvalReport::macro_f1)
      .def_readonly("complete", &EvalReport::complete)
      .def_readonly("error", &EvalReport::error);

  m.def(
      "evaluate_variant",
      [](const VariantDataset& vd, const FoldPlan& plan, const EmbeddingStore& store,
         const std::string& arch, const std::string& input_fn, int hidden_units,
         const std::string& category_rep, std::uint64_t seed, const std::vector<int>& grid,
         int jobs) {
        ModelConfig cfg = config_from_args(arch, input_fn, hidden_units, seed);
        return evaluate_variant(vd, plan, cfg, category_rep_from_name(category_rep), store,
                                grid, jobs);
      },
      py::arg("dataset"), py::arg("plan"), py::arg("store"), py::arg("arch") = "lr",
      py::arg("input_fn") = "conc", py::arg("hidden_units") = 0,
      py::arg("category_rep") = "concept", py::arg("seed") = 1,
      py::arg("grid") = std::vector<int>{}, py::arg("jobs") = 1);

  m.def("evaluate_baseline", &evaluate_baseline, py::arg("dataset"), py::arg("plan"),
        py::arg("baseline"), py::arg("prior"), py::arg("seed") = 1);
  m.def("nominal_positive_rate",
        [](const std::string& v) { return nominal_positive_rate(variant_from_name(v)); });

  m.def(
      "run_experiment1",
      [](const std::vector<PairRecord>& positives, const EmbeddingStore& store,
         std::uint64_t seed, double target_retention, std::size_t forced_k,
         const std::vector<std::string>& variants, const std::vector<std::string>& models,
         const std::vector<std::string>& input_fns, const std::vector<int>& grid,
         bool with_baselines, bool with_ablation, int jobs) {
        return run_experiment1(positives, store,
                               options_from_kwargs(seed, target_retention, forced_k,
                                                   variants, models, input_fns, grid,
                                                   with_baselines, with_ablation, 5, jobs));
      },
      py::arg("positives"), py::arg("store"), py::arg("seed") = 1,
      py::arg("target_retention") = 0.90, py::arg("forced_k") = 0,
      py::arg("variants") = std::vector<std::string>{},
      py::arg("models") = std::vector<std::string>{},
      py::arg("input_fns") = std::vector<std::string>{},
      py::arg("grid") = std::vector<int>{}, py::arg("with_baselines") = true,
      py::arg("with_ablation") = false, py::arg("jobs") = 1);

  m.def(
      "run_experiment2",
      [](const std::vector<PairRecord>& positives, const EmbeddingStore& store,
         std::uint64_t seed, double target_retention, std::size_t forced_k,
         const std::vector<std::string>& variants, const std::vector<std::string>& models,
         const std::vector<std::string>& input_fns, const std::vector<int>& grid,
         bool with_baselines, std::size_t min_entities, int jobs) {
        return run_experiment2(positives, store,
                               options_from_kwargs(seed, target_retention, forced_k,
                                                   variants, models, input_fns, grid,
                                                   with_baselines, false, min_entities,
                                                   jobs));
      },
      py::arg("positives"), py::arg("store"), py::arg("seed") = 1,
      py::arg("target_retention") = 0.90, py::arg("forced_k") = 0,
      py::arg("variants") = std::vector<std::string>{},
      py::arg("models") = std::vector<std::string>{},
      py::arg("input_fns") = std::vector<std::string>{},
      py::arg("grid") = std::vector<int>{}, py::arg("with_baselines") = true,
      py::arg("min_entities") = 5, py::arg("jobs") = 1);

  m.def("save_eval_reports", &save_eval_reports, py::arg("path"), py::arg("reports"));
  m.def("load_eval_reports", &load_eval_reports, py::arg("path"));
  m.def("write_eval_reports_csv", &write_eval_reports_csv, py::arg("path"),
        py::arg("reports"));
  m.def("write_summary_csv", &write_summary_csv, py::arg("path"), py::arg("reports"));

  py::class_<TokenPoint>(m, "TokenPoint")
      .def_readonly("token", &TokenPoint::token)
      .def_readonly("role", &TokenPoint::role)
      .def_readonly("onto_class", &TokenPoint::onto_class);

  m.def("collect_points", &collect_points, py::arg("positives"));
  m.def("point_matrix", &point_matrix, py::arg("points"), py::arg("store"));

  py::class_<Pca2dResult>(m, "Pca2dResult")
      .def_readonly("coords", &Pca2dResult::coords)
      .def_readonly("component1", &Pca2dResult::component1)
      .def_readonly("component2", &Pca2dResult::component2)
      .def_readonly("var_fraction1", &Pca2dResult::var_fraction1)
      .def_readonly("var_fraction2", &Pca2dResult::var_fraction2)
      .def_readonly("second_degenerate", &Pca2dResult::second_degenerate);

  m.def("pca_2d", &pca_2d, py::arg("matrix"));

  py::class_<ClusterSolution>(m, "ClusterSolution")
      .def_readonly("k", &ClusterSolution::k)
      .def_readonly("assignments", &ClusterSolution::assignments)
      .def_readonly("centers", &ClusterSolution::centers)
      .def_readonly("inertia", &ClusterSolution::inertia)
      .def_readonly("restarts_run", &ClusterSolution::restarts_run)
      .def_readonly("restart_inertias", &ClusterSolution::restart_inertias);

  m.def("kmeans", &kmeans, py::arg("matrix"), py::arg("k"), py::arg("restarts") = 10,
        py::arg("max_iter") = 10000, py::arg("tol") = 1.0, py::arg("seed") = 1,
        py::arg("jobs") = 1);

  py::class_<SimCell>(m, "SimCell")
      .def_readonly("mean", &SimCell::mean)
      .def_readonly("sd", &SimCell::sd)
      .def_readonly("n_pairs", &SimCell::n_pairs)
      .def_readonly("defined", &SimCell::defined)
      .def_readonly("sampled", &SimCell::sampled);

  py::class_<SimilarityTable>(m, "SimilarityTable")
      .def_readonly("entities_across", &SimilarityTable::entities_across)
      .def_readonly("entities_within", &SimilarityTable::entities_within)
      .def_readonly("categories_across", &SimilarityTable::categories_across)
      .def_readonly("centroids_across", &SimilarityTable::centroids_across)
      .def_readonly("entity_category_across", &SimilarityTable::entity_category_across)
      .def_readonly("entity_category_within", &SimilarityTable::entity_category_within)
      .def_readonly("entity_centroid_across", &SimilarityTable::entity_centroid_across)
      .def_readonly("entity_centroid_within", &SimilarityTable::entity_centroid_within)
      .def_readonly("category_centroid_across", &SimilarityTable::category_centroid_across)
      .def_readonly("category_centroid_within", &SimilarityTable::category_centroid_within)
      .def_readonly("pair_cap", &SimilarityTable::pair_cap)
      .def_readonly("cap_triggered", &SimilarityTable::cap_triggered);

  m.def("all_entity_centroids", &all_entity_centroids, py::arg("positives"),
        py::arg("store"));
  m.def("similarity_table", &similarity_table, py::arg("positives"), py::arg("store"),
        py::arg("centroids"), py::arg("pair_cap") = 2000000, py::arg("seed") = 1);

  m.def("derive_stream", py::overload_cast<std::uint64_t, std::string_view>(&derive_stream),
        py::arg("seed"), py::arg("name"));
}
