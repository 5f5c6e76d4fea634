#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "instadet/confounders.hpp"
#include "instadet/dataset.hpp"
#include "instadet/embedding_store.hpp"
#include "instadet/evaluation.hpp"
#include "instadet/fold_plan.hpp"
#include "instadet/geometry.hpp"
#include "instadet/manifest.hpp"
#include "instadet/rng.hpp"
#include "instadet/util.hpp"

namespace {

using namespace instadet;

struct GlobalOpts {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string data_dir;
};

// Relative paths resolve against --data-dir (or INSTADET_DATA_DIR).
std::string resolve(const GlobalOpts& g, const std::string& path) {
  if (path.empty() || path.front() == '/' || g.data_dir.empty() || g.data_dir == ".") {
    return path;
  }
  return g.data_dir + "/" + path;
}

EmbeddingStore load_store(const std::string& path, bool text) {
  return text ? EmbeddingStore::load_text(path) : EmbeddingStore::load_word2vec_binary(path);
}

std::vector<std::string> record_tokens_of(const std::vector<PairRecord>& records) {
  std::set<std::string> seen;
  for (const auto& r : records) {
    seen.insert(r.entity);
    seen.insert(r.category);
  }
  return {seen.begin(), seen.end()};
}

EmbeddingStore load_store_for(const std::string& path, bool text,
                              const std::vector<PairRecord>& records, bool rescale) {
  EmbeddingStore store = load_store(path, text);
  if (!rescale) return store;
  return store.rescale_columns(record_tokens_of(records));
}

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
  if (names.empty()) return all_variants();
  std::vector<Variant> out;
  for (const auto& n : names) {
    if (n == "all") return all_variants();
    out.push_back(variant_from_name(n));
  }
  return out;
}

std::string fmt(double v, int decimals = 4) { return format_double(v, decimals); }

struct BuildDatasetArgs {
  std::string pairs, embeddings, out, report;
  bool text = false;
  std::size_t rare_threshold = 50;
};

void cmd_build_dataset(const GlobalOpts& g, const BuildDatasetArgs& a) {
  std::string pairs = resolve(g, a.pairs), emb = resolve(g, a.embeddings);
  std::string out = resolve(g, a.out);
  auto raw = read_raw_pairs_tsv(pairs);
  auto store = load_store(emb, a.text);
  auto [records, report] = build_positive_set(raw, store, a.rare_threshold);

  auto manifest = make_manifest(
      "build-dataset",
      {{"pairs", pairs},
       {"embeddings", emb},
       {"text_embeddings", a.text ? "true" : "false"},
       {"rare_threshold", std::to_string(a.rare_threshold)}},
      g.seed, {pairs, emb});
  write_artifact(out, manifest, [&] { save_records_jsonl(out, records); });

  if (!a.report.empty()) {
    std::string rp = resolve(g, a.report);
    write_artifact(rp, manifest, [&] { write_file(rp, report.to_text()); });
  }
  std::cout << report.to_text();
  std::cout << "wrote " << records.size() << " positives to " << out << "\n";
}

struct GenVariantsArgs {
  std::string positives, out_dir;
  std::vector<std::string> variants;
};

void cmd_gen_variants(const GlobalOpts& g, const GenVariantsArgs& a) {
  std::string pos_path = resolve(g, a.positives);
  auto positives = load_records_jsonl(pos_path);
  std::string dir = resolve(g, a.out_dir);
  std::filesystem::create_directories(dir);

  for (Variant v : parse_variants(a.variants)) {
    auto vd = build_variant(positives, v,
                            derive_stream(g.seed, "variant", static_cast<std::uint64_t>(v)));
    std::string out = dir + "/variant_" + variant_name(v) + ".jsonl";
    auto manifest = make_manifest("gen-variants",
                                  {{"positives", pos_path}, {"variant", variant_name(v)}},
                                  g.seed, {pos_path});
    write_artifact(out, manifest, [&] { save_variant(out, vd); });
    std::cout << variant_name(v) << ": " << vd.records.size() << " records ("
              << vd.positive_count() << " positives, " << vd.skipped_positives
              << " skipped)\n";
  }
}

struct SplitArgs {
  std::string variant_file, out;
  double target_retention = 0.90;
  std::size_t forced_k = 0;
  bool no_filter = false;
};

void cmd_split(const GlobalOpts& g, const SplitArgs& a) {
  std::string vf = resolve(g, a.variant_file), out = resolve(g, a.out);
  auto vd = load_variant(vf);
  FoldPlan plan = build_fold_plan(vd.records, derive_stream(g.seed, "plan"),
                                  a.target_retention, a.forced_k, g.jobs);
  if (a.no_filter) plan = plan.without_filtering();

  auto manifest = make_manifest("split",
                                {{"variant_file", vf},
                                 {"target_retention", fmt(a.target_retention, 2)},
                                 {"forced_k", std::to_string(a.forced_k)},
                                 {"no_filter", a.no_filter ? "true" : "false"}},
                                g.seed, {vf});
  write_artifact(out, manifest, [&] { save_fold_plan(out, plan); });

  std::cout << "folds=" << plan.fold_count() << " retention=" << fmt(plan.retention)
            << " filtered=" << (plan.filtered ? "yes" : "no") << "\n";
  if (plan.retention_warning) {
    std::cout << "warning: no fold count met the retention target "
              << fmt(a.target_retention, 2) << "\n";
  }
}

struct ModelArgs {
  std::string variant_file, plan, embeddings, out, csv;
  std::string model = "lr";
  std::string input_fn = "conc";
  std::string category_rep = "concept";
  std::vector<int> grid;
  int width = 0;
  bool text = false;
  bool no_rescale = false;
};

void cmd_train(const GlobalOpts& g, const ModelArgs& a) {
  std::string vf = resolve(g, a.variant_file), pf = resolve(g, a.plan);
  std::string emb = resolve(g, a.embeddings), out = resolve(g, a.out);
  auto vd = load_variant(vf);
  auto plan = load_fold_plan(pf);
  auto store = load_store_for(emb, a.text, vd.records, !a.no_rescale);

  ModelConfig cfg;
  cfg.arch = arch_from_name(a.model);
  cfg.input_fn = input_fn_from_name(a.input_fn);
  cfg.seed = g.seed;
  CategoryRep rep = category_rep_from_name(a.category_rep);
  auto reps = build_category_reps(rep, vd.records, plan.base_train,
                                  gold_category_tokens(vd.records), store);

  auto Xtr = featurize_records(vd.records, plan.base_train, store, reps, cfg.input_fn);
  auto ytr = labels_of(vd.records, plan.base_train);
  auto Xval = featurize_records(vd.records, plan.base_val, store, reps, cfg.input_fn);
  auto yval = labels_of(vd.records, plan.base_val);

  TrainedModel model;
  if (a.width > 0 || cfg.arch == Arch::LR) {
    cfg.hidden_units = a.width;
    model = train_on_features(cfg, Xtr, ytr, Xval, yval);
  } else {
    auto grid = a.grid.empty() ? default_width_grid() : a.grid;
    auto search = hyperparam_search(cfg, Xtr, ytr, Xval, yval, grid, g.jobs);
    model = search.best;
    std::cout << "chosen width: " << search.best_width << "\n";
  }

  auto manifest = make_manifest("train",
                                {{"variant_file", vf},
                                 {"plan", pf},
                                 {"embeddings", emb},
                                 {"model", a.model},
                                 {"input_fn", a.input_fn},
                                 {"category_rep", a.category_rep},
                                 {"width", std::to_string(a.width)},
                                 {"rescale", a.no_rescale ? "false" : "true"}},
                                g.seed, {vf, pf, emb});
  write_artifact(out, manifest, [&] { save_model(out, model); });
  std::cout << "best_epoch=" << model.best_epoch << " val_loss=" << fmt(model.best_val_loss)
            << " -> " << out << "\n";
}

void cmd_eval(const GlobalOpts& g, const ModelArgs& a) {
  std::string vf = resolve(g, a.variant_file), pf = resolve(g, a.plan);
  std::string emb = resolve(g, a.embeddings), out = resolve(g, a.out);
  auto vd = load_variant(vf);
  auto plan = load_fold_plan(pf);
  auto store = load_store_for(emb, a.text, vd.records, !a.no_rescale);

  ModelConfig cfg;
  cfg.arch = arch_from_name(a.model);
  cfg.input_fn = input_fn_from_name(a.input_fn);
  cfg.seed = g.seed;
  CategoryRep rep = category_rep_from_name(a.category_rep);
  auto grid = a.grid.empty() ? default_width_grid() : a.grid;

  EvalReport report = evaluate_variant(vd, plan, cfg, rep, store, grid, g.jobs);

  auto manifest = make_manifest("eval",
                                {{"variant_file", vf},
                                 {"plan", pf},
                                 {"embeddings", emb},
                                 {"model", a.model},
                                 {"input_fn", a.input_fn},
                                 {"category_rep", a.category_rep},
                                 {"rescale", a.no_rescale ? "false" : "true"}},
                                g.seed, {vf, pf, emb});
  write_artifact(out, manifest, [&] { save_eval_reports(out, {report}); });
  if (!a.csv.empty()) {
    std::string csv = resolve(g, a.csv);
    write_artifact(csv, manifest, [&] { write_eval_reports_csv(csv, {report}); });
  }

  std::cout << "variant=" << report.variant << " model=" << report.model_id
            << " micro_f1=" << fmt(report.micro_f1) << " macro_f1=" << fmt(report.macro_f1)
            << " folds=" << report.per_fold.size() << " width=" << report.chosen_width
            << (report.complete ? "" : " PARTIAL: " + report.error) << "\n";
}

struct ExpArgs {
  std::string positives, embeddings, out_dir;
  std::vector<std::string> variants;
  std::vector<std::string> models;
  std::vector<std::string> input_fns;
  std::vector<int> grid;
  double target_retention = 0.90;
  std::size_t forced_k = 0;
  std::size_t min_entities = 5;
  bool text = false;
  bool no_rescale = false;
  bool no_baselines = false;
  bool ablation = false;
};

void cmd_exp(const GlobalOpts& g, const ExpArgs& a, int which) {
  std::string pos_path = resolve(g, a.positives), emb = resolve(g, a.embeddings);
  std::string dir = resolve(g, a.out_dir);
  auto positives = load_records_jsonl(pos_path);
  auto store = load_store_for(emb, a.text, positives, !a.no_rescale);
  std::filesystem::create_directories(dir);

  ExperimentOptions opt;
  opt.seed = g.seed;
  opt.jobs = g.jobs;
  opt.target_retention = a.target_retention;
  opt.forced_k = a.forced_k;
  opt.variants = parse_variants(a.variants);
  opt.with_baselines = !a.no_baselines;
  opt.with_ablation = a.ablation;
  opt.min_entities = a.min_entities;
  if (!a.grid.empty()) opt.grid = a.grid;
  if (!a.models.empty()) {
    opt.archs.clear();
    for (const auto& m : a.models) opt.archs.push_back(arch_from_name(m));
  }
  if (!a.input_fns.empty()) {
    opt.input_fns.clear();
    for (const auto& f : a.input_fns) opt.input_fns.push_back(input_fn_from_name(f));
  }

  auto reports = which == 1 ? run_experiment1(positives, store, opt)
                            : run_experiment2(positives, store, opt);

  std::map<std::string, std::string> flags{
      {"positives", pos_path},       {"embeddings", emb},
      {"target_retention", fmt(a.target_retention, 2)},
      {"forced_k", std::to_string(a.forced_k)},
      {"baselines", a.no_baselines ? "false" : "true"},
      {"ablation", a.ablation ? "true" : "false"},
      {"rescale", a.no_rescale ? "false" : "true"}};
  if (which == 2) flags["min_entities"] = std::to_string(a.min_entities);
  auto manifest = make_manifest(which == 1 ? "exp1" : "exp2", flags, g.seed, {pos_path, emb});

  std::string jsonl = dir + "/reports.jsonl";
  std::string csv = dir + "/reports.csv";
  std::string summary = dir + "/summary.csv";
  write_artifact(jsonl, manifest, [&] { save_eval_reports(jsonl, reports); });
  write_artifact(csv, manifest, [&] { write_eval_reports_csv(csv, reports); });
  write_artifact(summary, manifest, [&] { write_summary_csv(summary, reports); });

  for (const auto& r : reports) {
    std::cout << r.variant << " " << r.model_id
              << (r.input_fn.empty() ? "" : " " + r.input_fn)
              << (r.category_rep.empty() ? "" : " " + r.category_rep)
              << (r.filtered ? "" : " nofilter") << ": micro_f1=" << fmt(r.micro_f1)
              << (r.complete ? "" : " PARTIAL") << "\n";
  }
  std::cout << "summary: " << summary << "\n";
}

struct AnalyzeArgs {
  std::string mode;
  std::string positives, embeddings, out_dir;
  std::vector<int> ks{2};
  int restarts = 10;
  int max_iter = 10000;
  double tol = 1.0;
  std::size_t cap = 2000000;
  bool text = false;
  bool no_rescale = false;
};

void cmd_analyze(const GlobalOpts& g, const AnalyzeArgs& a) {
  std::string pos_path = resolve(g, a.positives), emb = resolve(g, a.embeddings);
  std::string dir = resolve(g, a.out_dir);
  auto positives = load_records_jsonl(pos_path);
  auto store = load_store_for(emb, a.text, positives, !a.no_rescale);
  std::filesystem::create_directories(dir);

  auto manifest = make_manifest(
      "analyze",
      {{"mode", a.mode}, {"positives", pos_path}, {"embeddings", emb},
       {"rescale", a.no_rescale ? "false" : "true"}},
      g.seed, {pos_path, emb});

  if (a.mode == "pca") {
    auto points = collect_points(positives);
    auto X = point_matrix(points, store);
    auto pca = pca_2d(X);
    std::string out = dir + "/pca_coords.csv";
    write_artifact(out, manifest, [&] { write_pca_csv(out, points, pca); });
    std::cout << "var_fraction1=" << fmt(pca.var_fraction1) << " var_fraction2="
              << fmt(pca.var_fraction2)
              << (pca.second_degenerate ? " (second component degenerate)" : "") << "\n";
    return;
  }
  if (a.mode == "kmeans") {
    auto points = collect_points(positives);
    auto X = point_matrix(points, store);
    for (int k : a.ks) {
      auto sol = kmeans(X, k, a.restarts, a.max_iter, a.tol,
                        derive_stream(g.seed, "analysis", static_cast<std::uint64_t>(k)),
                        g.jobs);
      std::string out = dir + "/clusters_k" + std::to_string(k) + ".csv";
      write_artifact(out, manifest, [&] { write_clusters_csv(out, points, sol); });
      std::string prof = a.ks.size() == 1
                             ? dir + "/cluster_profiles.csv"
                             : dir + "/cluster_profiles_k" + std::to_string(k) + ".csv";
      auto profiles = cluster_profile(sol, points);
      write_artifact(prof, manifest, [&] { write_cluster_profiles_csv(prof, profiles); });
      std::cout << "k=" << k << " inertia=" << fmt(sol.inertia) << " restarts="
                << sol.restarts_run << "\n";
    }
    return;
  }
  if (a.mode == "simtable") {
    auto centroids = all_entity_centroids(positives, store);
    auto table = similarity_table(positives, store, centroids, a.cap,
                                  derive_stream(g.seed, "simtable"));
    std::string out = dir + "/similarity_table.csv";
    write_artifact(out, manifest, [&] { write_similarity_csv(out, table); });
    std::cout << "entities_within mean=" << fmt(table.entities_within.mean)
              << " entity_centroid_within mean=" << fmt(table.entity_centroid_within.mean)
              << (table.cap_triggered ? " (pair cap triggered)" : "") << "\n";
    return;
  }
  throw std::runtime_error("unknown analyze mode: '" + a.mode +
                           "' (want pca, kmeans, or simtable)");
}

struct ReportArgs {
  std::string reports, out, csv;
};

void cmd_report(const GlobalOpts& g, const ReportArgs& a) {
  std::string in = resolve(g, a.reports), out = resolve(g, a.out);
  auto reports = load_eval_reports(in);
  auto manifest = make_manifest("report", {{"reports", in}}, g.seed, {in});
  write_artifact(out, manifest, [&] { write_summary_csv(out, reports); });
  if (!a.csv.empty()) {
    std::string csv = resolve(g, a.csv);
    write_artifact(csv, manifest, [&] { write_eval_reports_csv(csv, reports); });
  }
  std::cout << reports.size() << " reports -> " << out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"instantiation-detection pipeline"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GlobalOpts g;
  if (const char* env = std::getenv("INSTADET_DATA_DIR")) g.data_dir = env;
  app.add_option("--seed", g.seed, "master seed for all derived randomness");
  app.add_option("--jobs", g.jobs, "worker threads for folds, grid cells, restarts");
  app.add_option("--data-dir", g.data_dir,
                 "directory for relative paths (env INSTADET_DATA_DIR)");

  BuildDatasetArgs bd;
  auto* sub_bd = app.add_subcommand("build-dataset", "extract positive pairs");
  sub_bd->add_option("--pairs", bd.pairs, "raw relation TSV")->required();
  sub_bd->add_option("--embeddings", bd.embeddings, "embedding file")->required();
  sub_bd->add_flag("--text-embeddings", bd.text, "read embeddings as text");
  sub_bd->add_option("--rare-threshold", bd.rare_threshold,
                     "collapse classes with fewer datapoints into 'other'");
  sub_bd->add_option("--out", bd.out, "positives jsonl")->required();
  sub_bd->add_option("--report", bd.report, "class distribution report path");

  GenVariantsArgs gv;
  auto* sub_gv = app.add_subcommand("gen-variants", "attach confounders");
  sub_gv->add_option("--positives", gv.positives, "positives jsonl")->required();
  sub_gv->add_option("--variant", gv.variants, "variant names or 'all'");
  sub_gv->add_option("--out-dir", gv.out_dir, "output directory")->required();

  SplitArgs sp;
  auto* sub_sp = app.add_subcommand("split", "build a fold plan");
  sub_sp->add_option("--variant-file", sp.variant_file, "variant jsonl")->required();
  sub_sp->add_option("--out", sp.out, "fold plan json")->required();
  sub_sp->add_option("--target-retention", sp.target_retention, "mean retention target");
  sub_sp->add_option("--forced-k", sp.forced_k, "fixed fold count (0 = choose)");
  sub_sp->add_flag("--no-filter", sp.no_filter, "skip lexical overlap filtering");

  ModelArgs tr;
  auto* sub_tr = app.add_subcommand("train", "train one classifier on the base split");
  ModelArgs ev;
  auto* sub_ev = app.add_subcommand("eval", "train per fold and score a variant");
  for (auto [sub, args] : {std::pair{sub_tr, &tr}, std::pair{sub_ev, &ev}}) {
    sub->add_option("--variant-file", args->variant_file, "variant jsonl")->required();
    sub->add_option("--plan", args->plan, "fold plan json")->required();
    sub->add_option("--embeddings", args->embeddings, "embedding file")->required();
    sub->add_flag("--text-embeddings", args->text, "read embeddings as text");
    sub->add_option("--model", args->model, "lr, nn1, or nn2");
    sub->add_option("--input-fn", args->input_fn, "conc or diff");
    sub->add_option("--category-rep", args->category_rep, "concept or centroid");
    sub->add_option("--grid", args->grid, "hidden width grid")->delimiter(',');
    sub->add_flag("--no-rescale", args->no_rescale, "skip per-dataset rescaling");
    sub->add_option("--out", args->out, "output path")->required();
  }
  sub_tr->add_option("--width", tr.width, "fixed hidden width (0 = grid search)");
  sub_ev->add_option("--csv", ev.csv, "also render the report as csv");

  ExpArgs e1, e2;
  auto* sub_e1 = app.add_subcommand("exp1", "concept-based study over variants");
  auto* sub_e2 = app.add_subcommand("exp2", "centroid study with a min-entity filter");
  for (auto [sub, args] : {std::pair{sub_e1, &e1}, std::pair{sub_e2, &e2}}) {
    sub->add_option("--positives", args->positives, "positives jsonl")->required();
    sub->add_option("--embeddings", args->embeddings, "embedding file")->required();
    sub->add_flag("--text-embeddings", args->text, "read embeddings as text");
    sub->add_option("--out-dir", args->out_dir, "output directory")->required();
    sub->add_option("--variant", args->variants, "variant names or 'all'");
    sub->add_option("--model", args->models, "classifiers to run");
    sub->add_option("--input-fn", args->input_fns, "input functions to run");
    sub->add_option("--grid", args->grid, "hidden width grid")->delimiter(',');
    sub->add_option("--target-retention", args->target_retention, "mean retention target");
    sub->add_option("--forced-k", args->forced_k, "fixed fold count (0 = choose)");
    sub->add_flag("--no-baselines", args->no_baselines, "skip bl_pos and bl_freq");
    sub->add_flag("--ablation", args->ablation, "also run without overlap filtering");
    sub->add_flag("--no-rescale", args->no_rescale, "skip per-dataset rescaling");
  }
  sub_e2->add_option("--min-entities", e2.min_entities,
                     "minimum distinct entities per category");

  AnalyzeArgs an;
  auto* sub_an = app.add_subcommand("analyze", "geometry analyses over the positive set");
  sub_an->add_option("mode", an.mode, "pca, kmeans, or simtable")->required();
  sub_an->add_option("--positives", an.positives, "positives jsonl")->required();
  sub_an->add_option("--embeddings", an.embeddings, "embedding file")->required();
  sub_an->add_flag("--text-embeddings", an.text, "read embeddings as text");
  sub_an->add_option("--out-dir", an.out_dir, "output directory")->required();
  sub_an->add_option("--k", an.ks, "cluster counts for kmeans")->delimiter(',');
  sub_an->add_option("--restarts", an.restarts, "kmeans restarts");
  sub_an->add_option("--max-iter", an.max_iter, "kmeans iteration cap");
  sub_an->add_option("--tol", an.tol, "kmeans movement tolerance");
  sub_an->add_option("--cap", an.cap, "similarity pair sampling cap");
  sub_an->add_flag("--no-rescale", an.no_rescale, "skip per-dataset rescaling");

  ReportArgs rp;
  auto* sub_rp = app.add_subcommand("report", "pivot stored eval reports");
  sub_rp->add_option("--reports", rp.reports, "reports jsonl")->required();
  sub_rp->add_option("--out", rp.out, "summary csv")->required();
  sub_rp->add_option("--csv", rp.csv, "also rerender the per-report csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sub_bd->parsed()) cmd_build_dataset(g, bd);
    if (sub_gv->parsed()) cmd_gen_variants(g, gv);
    if (sub_sp->parsed()) cmd_split(g, sp);
    if (sub_tr->parsed()) cmd_train(g, tr);
    if (sub_ev->parsed()) cmd_eval(g, ev);
    if (sub_e1->parsed()) cmd_exp(g, e1, 1);
    if (sub_e2->parsed()) cmd_exp(g, e2, 2);
    if (sub_an->parsed()) cmd_analyze(g, an);
    if (sub_rp->parsed()) cmd_report(g, rp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
