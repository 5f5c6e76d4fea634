#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "instadet/dataset.hpp"
#include "instadet/embedding_store.hpp"

namespace instadet {

enum class Arch { LR, NN_1HL, NN_2HL };
enum class InputFn { CONC, DIFF };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& s);
std::string input_fn_name(InputFn f);
InputFn input_fn_from_name(const std::string& s);
int hidden_layer_count(Arch a);

// Category token -> representation vector (a category's own embedding in
// concept mode, the mean of its entities in centroid mode).
using CategoryRepMap = std::unordered_map<std::string, Vec>;

struct ModelConfig {
  Arch arch = Arch::LR;
  int hidden_units = 0;  // per hidden layer; ignored for LR
  InputFn input_fn = InputFn::CONC;
  double dropout = 0.5;
  int max_epochs = 2000;
  int patience = 10;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

// CONC -> concatenation (2n), DIFF -> elementwise e - c (n).
Vec make_input(const Vec& e, const Vec& c_rep, InputFn fn);

// First slot is always the token's own embedding; the second resolves
// through the rep map, falling back to the token's own embedding for
// second members that are not categories (inverse and inst2inst negatives).
Vec featurize_record(const PairRecord& r, const EmbeddingStore& store,
                     const CategoryRepMap& reps, InputFn fn);
Eigen::MatrixXd featurize_records(const std::vector<PairRecord>& records,
                                  const std::vector<std::size_t>& idx,
                                  const EmbeddingStore& store, const CategoryRepMap& reps,
                                  InputFn fn);
// 1 = positive, 0 = negative.
std::vector<int> labels_of(const std::vector<PairRecord>& records,
                           const std::vector<std::size_t>& idx);

struct TrainedModel {
  ModelConfig config;
  int input_dim = 0;
  std::vector<Eigen::MatrixXd> weights;  // out x in, hidden layers then output
  std::vector<Eigen::VectorXd> biases;
  int stopped_epoch = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;

  // Dropout-free forward: rows of probabilities summing to 1.
  Eigen::MatrixXd predict_proba_batch(const Eigen::MatrixXd& X) const;
  Vec predict_proba(const Vec& x) const;
  int predict_label(const Vec& x) const;  // argmax; exact tie -> negative
};

// Glorot-uniform weights, zero biases, deterministic in config.seed.
TrainedModel init_model(const ModelConfig& config, int input_dim);

// Mean over rows of -log p(gold), log clamped at 1e-12.
double mean_cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& gold);

struct AdadeltaState {
  Eigen::ArrayXXd sq_grad;    // decayed mean of g^2
  Eigen::ArrayXXd sq_update;  // decayed mean of (delta x)^2
};
// In-place parameter update; rho = 0.95, eps = 1e-6.
void adadelta_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, AdadeltaState& state,
                   double rho = 0.95, double eps = 1e-6);

// Mini-batch Adadelta training with per-epoch shuffling, inverted dropout
// before each hidden layer, and early stopping on validation loss with
// best-epoch weight restoration.
TrainedModel train_on_features(const ModelConfig& config, const Eigen::MatrixXd& Xtr,
                               const std::vector<int>& ytr, const Eigen::MatrixXd& Xval,
                               const std::vector<int>& yval);

TrainedModel train(const ModelConfig& config, const std::vector<PairRecord>& records,
                   const std::vector<std::size_t>& train_idx,
                   const std::vector<std::size_t>& val_idx, const EmbeddingStore& store,
                   const CategoryRepMap& reps);

// {5, 10, 50, 100, ..., 800}: 18 cells.
std::vector<int> default_width_grid();

struct GridCell {
  int width = 0;
  double val_f1 = 0.0;
  double best_val_loss = 0.0;
  int stopped_epoch = 0;
  bool ok = false;
  std::string error;
};

struct SearchResult {
  TrainedModel best;
  int best_width = 0;
  std::vector<GridCell> cells;
};

// One model per width, selected by validation positive-class F1, ties to the
// smaller width. LR collapses to a single cell. Failed cells are recorded
// and skipped; all cells failing is an error.
SearchResult hyperparam_search(const ModelConfig& base, const Eigen::MatrixXd& Xtr,
                               const std::vector<int>& ytr, const Eigen::MatrixXd& Xval,
                               const std::vector<int>& yval,
                               const std::vector<int>& grid = default_width_grid(),
                               int jobs = 1);

// Optional gradient mutation applied between the analytic pass and the
// comparison; lets tests verify the harness notices a corrupted gradient.
using GradTweak =
    std::function<void(std::vector<Eigen::MatrixXd>&, std::vector<Eigen::VectorXd>&)>;

// Max relative error between analytic and central-difference gradients
// (h = 1e-4) over at most `max_params` randomly chosen parameters.
double gradient_check(const TrainedModel& model, const Eigen::MatrixXd& X,
                      const std::vector<int>& y, std::size_t max_params = 200,
                      std::uint64_t seed = 1, const GradTweak& tweak = nullptr);

void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

}  // namespace instadet
