#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "instadet/classifier.hpp"
#include "instadet/dataset.hpp"
#include "instadet/embedding_store.hpp"

namespace instadet {

// One distinct token scheduled for projection or clustering: entities and
// categories from the positive set, first appearance wins for role and class.
struct TokenPoint {
  std::string token;
  std::string role;  // "entity" or "category"
  std::string onto_class;
};

std::vector<TokenPoint> collect_points(const std::vector<PairRecord>& positives);
Eigen::MatrixXd point_matrix(const std::vector<TokenPoint>& points,
                             const EmbeddingStore& store);

struct Pca2dResult {
  Eigen::MatrixXd coords;  // n x 2 projections onto the top components
  Vec component1;          // unit loading vectors, largest-|loading| positive
  Vec component2;
  double var_fraction1 = 0.0;  // eigenvalue / total variance
  double var_fraction2 = 0.0;
  bool second_degenerate = false;  // input rank < 2
};

// Mean-center, eigendecompose the covariance, keep the top two directions.
Pca2dResult pca_2d(const Eigen::MatrixXd& X);

struct ClusterSolution {
  int k = 0;
  std::vector<int> assignments;  // row -> cluster id
  Eigen::MatrixXd centers;       // k x dim
  double inertia = 0.0;          // sum of squared distances to assigned centers
  int restarts_run = 0;
  std::vector<double> restart_inertias;
};

// Lloyd's algorithm, k distinct data points as initial centers, best restart
// by inertia. Convergence when the summed squared center movement drops to
// tol or the iteration cap is hit; empty clusters re-seed from the point
// farthest from its center.
ClusterSolution kmeans(const Eigen::MatrixXd& X, int k, int restarts = 10,
                       int max_iter = 10000, double tol = 1.0, std::uint64_t seed = 1,
                       int jobs = 1);

struct ClusterProfile {
  int cluster = 0;
  std::size_t entity_count = 0;
  std::size_t category_count = 0;
  std::map<std::string, std::size_t> class_counts;
};

std::vector<ClusterProfile> cluster_profile(const ClusterSolution& solution,
                                            const std::vector<TokenPoint>& points);

struct SimCell {
  double mean = 0.0;
  double sd = 0.0;  // population deviation
  std::size_t n_pairs = 0;
  bool defined = false;
  bool sampled = false;  // the pair universe exceeded the cap
};

// Across pairs span different categories; within pairs share a gold
// category. Same-group cells never pair a token with itself.
struct SimilarityTable {
  SimCell entities_across, entities_within;
  SimCell categories_across;
  SimCell centroids_across;
  SimCell entity_category_across, entity_category_within;
  SimCell entity_centroid_across, entity_centroid_within;
  SimCell category_centroid_across, category_centroid_within;
  std::size_t pair_cap = 0;
  bool cap_triggered = false;
};

// Dimension-wise mean of each category's distinct entities, no split
// involved; the descriptive-statistics counterpart of the training centroids.
CategoryRepMap all_entity_centroids(const std::vector<PairRecord>& positives,
                                    const EmbeddingStore& store);

SimilarityTable similarity_table(const std::vector<PairRecord>& positives,
                                 const EmbeddingStore& store, const CategoryRepMap& centroids,
                                 std::size_t pair_cap = 2000000, std::uint64_t seed = 1);

void write_pca_csv(const std::string& path, const std::vector<TokenPoint>& points,
                   const Pca2dResult& pca);
void write_clusters_csv(const std::string& path, const std::vector<TokenPoint>& points,
                        const ClusterSolution& solution);
void write_cluster_profiles_csv(const std::string& path,
                                const std::vector<ClusterProfile>& profiles);
void write_similarity_csv(const std::string& path, const SimilarityTable& table);

}  // namespace instadet
