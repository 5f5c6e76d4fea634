#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "instadet/geometry.hpp"
#include "instadet/rng.hpp"
#include "instadet/util.hpp"

using namespace instadet;

namespace {

PairRecord pos(const std::string& e, const std::string& c, const std::string& cls = "animal") {
  return {e, c, cls, Label::POSITIVE, NegType::NONE};
}

std::string temp_path(const std::string& name) {
  return std::string("/tmp/instadet_geo_") + name;
}

}  // namespace

TEST_CASE("pca recovers the direction of a line") {
  Eigen::MatrixXd X(5, 2);
  for (int i = 0; i < 5; ++i) {
    double t = i - 2;
    X(i, 0) = t;
    X(i, 1) = 2.0 * t;
  }
  Pca2dResult res = pca_2d(X);

  // Analytic covariance eigenvector: (1, 2) / sqrt(5).
  Vec expect(2);
  expect << 1.0 / std::sqrt(5.0), 2.0 / std::sqrt(5.0);
  CHECK(std::abs(res.component1.dot(expect)) > 1.0 - 1e-12);
  CHECK(res.component1[1] > 0.0);  // largest loading is positive
  CHECK(res.var_fraction1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.var_fraction2 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(res.second_degenerate);

  // Projection of (t, 2t) onto the line direction is t * sqrt(5).
  CHECK(res.coords(4, 0) == doctest::Approx(2.0 * std::sqrt(5.0)).epsilon(1e-9));
  CHECK(std::abs(res.coords(4, 1)) < 1e-9);

  CHECK_THROWS(pca_2d(Eigen::MatrixXd(2, 2)));      // too few vectors
  CHECK_THROWS(pca_2d(Eigen::MatrixXd::Zero(5, 1)));  // too few dimensions
}

TEST_CASE("pca is invariant under row reordering") {
  Rng rng(31);
  Eigen::MatrixXd X(40, 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double t = rng.gaussian();
    X(i, 0) = 3.0 * t + 0.1 * rng.gaussian();
    X(i, 1) = -t + 0.1 * rng.gaussian();
    X(i, 2) = 0.5 * rng.gaussian();
  }
  Pca2dResult a = pca_2d(X);

  std::vector<std::size_t> perm(40);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  Eigen::MatrixXd Y(40, 3);
  for (std::size_t i = 0; i < perm.size(); ++i)
    Y.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(perm[i]));
  Pca2dResult b = pca_2d(Y);

  CHECK((a.component1 - b.component1).norm() < 1e-9);
  CHECK((a.component2 - b.component2).norm() < 1e-9);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    CHECK((b.coords.row(static_cast<Eigen::Index>(i)) -
           a.coords.row(static_cast<Eigen::Index>(perm[i])))
              .norm() < 1e-9);
  }
}

TEST_CASE("pca on an isotropic cloud splits variance evenly") {
  Rng rng(57);
  Eigen::MatrixXd X(600, 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = rng.gaussian();
    X(i, 1) = rng.gaussian();
  }
  Pca2dResult res = pca_2d(X);
  CHECK(res.var_fraction1 + res.var_fraction2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.var_fraction1 < 0.6);
  CHECK(res.var_fraction2 > 0.4);
  CHECK_FALSE(res.second_degenerate);
}

TEST_CASE("pca projection never stretches pairwise distances") {
  Rng rng(91);
  Eigen::MatrixXd X(20, 5);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index d = 0; d < 5; ++d) X(i, d) = rng.gaussian();
  Pca2dResult res = pca_2d(X);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
      double orig = (X.row(i) - X.row(j)).norm();
      double proj = (res.coords.row(i) - res.coords.row(j)).norm();
      CHECK(proj <= orig + 1e-9);
    }
  }
}

TEST_CASE("kmeans recovers two separated blobs exactly") {
  Rng rng(13);
  Eigen::MatrixXd X(60, 3);
  for (int i = 0; i < 60; ++i) {
    double center = i < 30 ? 0.0 : 10.0;
    for (int d = 0; d < 3; ++d) X(i, d) = center + 0.5 * rng.gaussian();
  }
  ClusterSolution sol = kmeans(X, 2, 10, 10000, 1.0, 7);

  REQUIRE(sol.assignments.size() == 60);
  int a = sol.assignments[0];
  int b = sol.assignments[30];
  CHECK(a != b);
  for (int i = 0; i < 30; ++i) CHECK(sol.assignments[static_cast<std::size_t>(i)] == a);
  for (int i = 30; i < 60; ++i) CHECK(sol.assignments[static_cast<std::size_t>(i)] == b);

  REQUIRE(sol.restart_inertias.size() == 10);
  CHECK(sol.restarts_run == 10);
  double best = *std::min_element(sol.restart_inertias.begin(), sol.restart_inertias.end());
  CHECK(sol.inertia == best);
  for (double r : sol.restart_inertias) CHECK(sol.inertia <= r);

  ClusterSolution again = kmeans(X, 2, 10, 10000, 1.0, 7);
  CHECK(again.assignments == sol.assignments);
  CHECK(again.inertia == sol.inertia);

  ClusterSolution par = kmeans(X, 2, 10, 10000, 1.0, 7, 4);
  CHECK(par.assignments == sol.assignments);
  CHECK(par.inertia == sol.inertia);
}

TEST_CASE("kmeans with k equal to the distinct point count has zero inertia") {
  Eigen::MatrixXd X(6, 2);
  X << 0, 0, 1, 0, 0, 1, 5, 5, 9, 2, -3, 4;
  ClusterSolution sol = kmeans(X, 6, 3, 100, 0.0, 3);
  CHECK(sol.inertia == doctest::Approx(0.0).epsilon(1e-12));

  std::set<int> used(sol.assignments.begin(), sol.assignments.end());
  CHECK(used.size() == 6);
}

TEST_CASE("kmeans rejects k beyond the distinct points") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 1, 1, 1, 2, 2, 2, 2;  // two distinct rows
  CHECK_NOTHROW(kmeans(X, 2, 2, 10, 1.0, 1));
  CHECK_THROWS(kmeans(X, 3, 2, 10, 1.0, 1));
  CHECK_THROWS(kmeans(X, 0, 2, 10, 1.0, 1));
}

TEST_CASE("kmeans inertia is non-increasing in the iteration budget") {
  Rng rng(29);
  Eigen::MatrixXd X(50, 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = rng.gaussian();
    X(i, 1) = rng.gaussian();
  }
  double prev = std::numeric_limits<double>::infinity();
  for (int iters = 1; iters <= 5; ++iters) {
    ClusterSolution sol = kmeans(X, 4, 1, iters, 0.0, 11);
    CHECK(sol.inertia <= prev + 1e-9);
    prev = sol.inertia;
  }
}

TEST_CASE("collect_points keeps first roles and classes") {
  std::vector<PairRecord> records{
      pos("washington", "president", "person"),
      pos("washington", "city", "location"),  // entity already seen
      pos("lincoln", "president", "person"),  // category already seen
  };
  auto points = collect_points(records);
  REQUIRE(points.size() == 4);
  CHECK(points[0].token == "washington");
  CHECK(points[0].role == "entity");
  CHECK(points[0].onto_class == "person");
  CHECK(points[1].token == "president");
  CHECK(points[1].role == "category");
  CHECK(points[2].token == "city");
  CHECK(points[3].token == "lincoln");

  CHECK_THROWS(collect_points({}));

  auto store = EmbeddingStore::from_rows({"washington", "president", "city"},
                                         {{1, 0}, {0, 1}, {1, 1}});
  CHECK_THROWS(point_matrix(points, store));  // lincoln has no embedding

  auto small = collect_points({pos("washington", "president", "person")});
  Eigen::MatrixXd M = point_matrix(small, store);
  CHECK(M.rows() == 2);
  CHECK(M(0, 0) == 1.0);
  CHECK(M(1, 1) == 1.0);
}

TEST_CASE("cluster_profile histograms add up") {
  std::vector<TokenPoint> points{
      {"a", "entity", "person"},   {"b", "entity", "person"}, {"c", "category", "person"},
      {"d", "entity", "location"}, {"e", "category", "location"},
  };
  ClusterSolution sol;
  sol.k = 2;
  sol.assignments = {0, 0, 1, 1, 1};

  auto profiles = cluster_profile(sol, points);
  REQUIRE(profiles.size() == 2);
  CHECK(profiles[0].entity_count == 2);
  CHECK(profiles[0].category_count == 0);
  CHECK(profiles[0].class_counts.at("person") == 2);
  CHECK(profiles[1].entity_count == 1);
  CHECK(profiles[1].category_count == 2);
  CHECK(profiles[1].class_counts.at("location") == 2);

  std::size_t total = 0;
  for (const auto& p : profiles) total += p.entity_count + p.category_count;
  CHECK(total == points.size());

  sol.assignments = {0, 0};
  CHECK_THROWS(cluster_profile(sol, points));
}

TEST_CASE("all_entity_centroids averages distinct entities") {
  auto store = EmbeddingStore::from_rows({"a", "b", "c1"}, {{0, 2}, {2, 0}, {9, 9}});
  std::vector<PairRecord> records{pos("a", "c1"), pos("b", "c1"), pos("a", "c1")};
  auto reps = all_entity_centroids(records, store);
  REQUIRE(reps.count("c1") == 1);
  CHECK(reps.at("c1")[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(reps.at("c1")[1] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS(all_entity_centroids({pos("ghost", "c1")}, store));
}

TEST_CASE("similarity table on identical vectors is all ones") {
  std::vector<std::string> toks{"e1", "e2", "e3", "e4", "c1", "c2"};
  std::vector<std::vector<double>> rows(6, {1.0, 1.0});
  auto store = EmbeddingStore::from_rows(toks, rows);
  std::vector<PairRecord> records{pos("e1", "c1"), pos("e2", "c1"), pos("e3", "c2"),
                                  pos("e4", "c2")};
  auto centroids = all_entity_centroids(records, store);
  SimilarityTable t = similarity_table(records, store, centroids);

  CHECK_FALSE(t.cap_triggered);
  CHECK(t.pair_cap == 2000000);

  auto ones = [](const SimCell& cell, std::size_t n) {
    CHECK(cell.defined);
    CHECK(cell.n_pairs == n);
    CHECK(cell.mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cell.sd <= 1e-9);
    CHECK_FALSE(cell.sampled);
  };
  ones(t.entities_across, 4);   // cross-category entity pairs
  ones(t.entities_within, 2);   // one pair per category
  ones(t.categories_across, 1);
  ones(t.centroids_across, 1);
  ones(t.entity_category_across, 4);
  ones(t.entity_category_within, 4);
  ones(t.entity_centroid_across, 4);
  ones(t.entity_centroid_within, 4);
  ones(t.category_centroid_across, 2);
  ones(t.category_centroid_within, 2);
}

TEST_CASE("similarity table on orthogonal one-entity categories") {
  auto store = EmbeddingStore::from_rows(
      {"e1", "e2", "c1", "c2"},
      {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  std::vector<PairRecord> records{pos("e1", "c1"), pos("e2", "c2")};
  auto centroids = all_entity_centroids(records, store);  // c1 -> e1, c2 -> e2
  SimilarityTable t = similarity_table(records, store, centroids);

  CHECK(t.entities_across.n_pairs == 1);
  CHECK(t.entities_across.mean == doctest::Approx(0.0).epsilon(1e-12));
  // One-entity categories contribute nothing within.
  CHECK_FALSE(t.entities_within.defined);
  CHECK(t.entities_within.n_pairs == 0);

  CHECK(t.categories_across.mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.centroids_across.mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.entity_category_across.mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.entity_category_across.n_pairs == 2);
  CHECK(t.entity_centroid_across.mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.category_centroid_across.mean == doctest::Approx(0.0).epsilon(1e-12));

  // Each entity coincides with its own centroid here.
  CHECK(t.entity_centroid_within.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.entity_centroid_within.n_pairs == 2);
  CHECK(t.category_centroid_within.mean == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("similarity table sampling cap is deterministic") {
  Rng rng(83);
  std::vector<std::string> toks;
  std::vector<std::vector<double>> rows;
  std::vector<PairRecord> records;
  for (int c = 0; c < 3; ++c) {
    std::string cat = "cat" + std::to_string(c);
    toks.push_back(cat);
    rows.push_back({rng.gaussian(), rng.gaussian(), rng.gaussian()});
    for (int e = 0; e < 10; ++e) {
      std::string ent = "e" + std::to_string(c) + "_" + std::to_string(e);
      toks.push_back(ent);
      rows.push_back({rng.gaussian(), rng.gaussian(), rng.gaussian()});
      records.push_back(pos(ent, cat));
    }
  }
  auto store = EmbeddingStore::from_rows(toks, rows);
  auto centroids = all_entity_centroids(records, store);

  SimilarityTable capped = similarity_table(records, store, centroids, 10, 5);
  CHECK(capped.cap_triggered);
  CHECK(capped.entities_across.sampled);  // 435-pair universe over a 10 cap
  CHECK(capped.entities_across.n_pairs == 10);
  CHECK(capped.entities_within.sampled);  // 135 within pairs
  CHECK(capped.entities_within.n_pairs == 10);
  CHECK(capped.entities_across.mean >= -1.0);
  CHECK(capped.entities_across.mean <= 1.0);

  SimilarityTable again = similarity_table(records, store, centroids, 10, 5);
  CHECK(again.entities_across.mean == capped.entities_across.mean);
  CHECK(again.entities_within.mean == capped.entities_within.mean);
  CHECK(again.entity_category_across.mean == capped.entity_category_across.mean);

  SimilarityTable full = similarity_table(records, store, centroids, 2000000, 5);
  CHECK_FALSE(full.cap_triggered);
  CHECK(full.entities_across.n_pairs == 435 - 135);
  CHECK(full.entities_within.n_pairs == 135);
  CHECK(full.entity_category_within.n_pairs == 30);
  CHECK(full.category_centroid_within.n_pairs == 3);

  CHECK_THROWS(similarity_table(records, store, centroids, 0, 5));
}

TEST_CASE("similarity table rejects zero-norm vectors") {
  auto store = EmbeddingStore::from_rows({"e1", "c1"}, {{0, 0}, {1, 0}});
  std::vector<PairRecord> records{pos("e1", "c1")};
  CategoryRepMap centroids;
  centroids["c1"] = Vec::Zero(2);
  CHECK_THROWS(similarity_table(records, store, centroids));
}

TEST_CASE("csv emitters produce the documented shapes") {
  auto store = EmbeddingStore::from_rows(
      {"e1", "e2", "c1"}, {{1.0, 0.0, 0.5}, {0.0, 1.0, -0.5}, {1.0, 1.0, 0.0}});
  std::vector<PairRecord> records{pos("e1", "c1"), pos("e2", "c1")};
  auto points = collect_points(records);
  auto X = point_matrix(points, store);
  auto pca = pca_2d(X);

  std::string pca_path = temp_path("pca.csv");
  write_pca_csv(pca_path, points, pca);
  std::string content = read_file(pca_path);
  CHECK(content.rfind("token,role,class,x,y\n", 0) == 0);
  CHECK(std::count(content.begin(), content.end(), '\n') == 4);
  CHECK(content.find("e1,entity,animal,") != std::string::npos);
  CHECK(content.find("c1,category,animal,") != std::string::npos);

  auto sol = kmeans(X, 2, 3, 100, 0.0, 3);
  std::string cl_path = temp_path("clusters.csv");
  write_clusters_csv(cl_path, points, sol);
  std::string cl = read_file(cl_path);
  CHECK(cl.rfind("token,cluster\n", 0) == 0);
  CHECK(std::count(cl.begin(), cl.end(), '\n') == 4);

  auto profiles = cluster_profile(sol, points);
  std::string pr_path = temp_path("profiles.csv");
  write_cluster_profiles_csv(pr_path, profiles);
  std::string pr = read_file(pr_path);
  CHECK(pr.rfind("cluster,kind,key,count\n", 0) == 0);
  CHECK(pr.find(",role,entity,") != std::string::npos);
  CHECK(pr.find(",class,animal,") != std::string::npos);

  auto table = similarity_table(records, store, all_entity_centroids(records, store));
  std::string sim_path = temp_path("similarity.csv");
  write_similarity_csv(sim_path, table);
  std::string sim = read_file(sim_path);
  CHECK(sim.rfind("cell,mean,sd,n_pairs\n", 0) == 0);
  CHECK(std::count(sim.begin(), sim.end(), '\n') == 11);
  CHECK(sim.find("entities_within,") != std::string::npos);
  // One category: no across pairs for categories, rendered with empty stats.
  CHECK(sim.find("categories_across,,,0\n") != std::string::npos);

  // Byte-identical on a second emission.
  std::string sim_path2 = temp_path("similarity2.csv");
  write_similarity_csv(sim_path2, table);
  CHECK(read_file(sim_path) == read_file(sim_path2));

  std::remove(pca_path.c_str());
  std::remove(cl_path.c_str());
  std::remove(pr_path.c_str());
  std::remove(sim_path.c_str());
  std::remove(sim_path2.c_str());
}
