#include "instadet/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "instadet/evaluation.hpp"
#include "instadet/rng.hpp"
#include "instadet/util.hpp"
#include "nlohmann/json.hpp"

namespace instadet {

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::LR: return "lr";
    case Arch::NN_1HL: return "nn1";
    case Arch::NN_2HL: return "nn2";
  }
  throw std::logic_error("unreachable arch");
}

Arch arch_from_name(const std::string& s) {
  if (s == "lr") return Arch::LR;
  if (s == "nn1") return Arch::NN_1HL;
  if (s == "nn2") return Arch::NN_2HL;
  throw std::runtime_error("unknown arch: '" + s + "' (want lr, nn1, or nn2)");
}

std::string input_fn_name(InputFn f) { return f == InputFn::CONC ? "conc" : "diff"; }

InputFn input_fn_from_name(const std::string& s) {
  if (s == "conc") return InputFn::CONC;
  if (s == "diff") return InputFn::DIFF;
  throw std::runtime_error("unknown input function: '" + s + "' (want conc or diff)");
}

int hidden_layer_count(Arch a) {
  switch (a) {
    case Arch::LR: return 0;
    case Arch::NN_1HL: return 1;
    case Arch::NN_2HL: return 2;
  }
  throw std::logic_error("unreachable arch");
}

Vec make_input(const Vec& e, const Vec& c_rep, InputFn fn) {
  if (e.size() != c_rep.size()) {
    throw std::runtime_error("make_input: dimension mismatch (" + std::to_string(e.size()) +
                             " vs " + std::to_string(c_rep.size()) + ")");
  }
  if (fn == InputFn::CONC) {
    Vec x(e.size() * 2);
    x << e, c_rep;
    return x;
  }
  return e - c_rep;
}

Vec featurize_record(const PairRecord& r, const EmbeddingStore& store,
                     const CategoryRepMap& reps, InputFn fn) {
  auto e = store.lookup(r.entity);
  if (!e) throw std::runtime_error("featurize: token not in store: '" + r.entity + "'");
  auto rep_it = reps.find(r.category);
  if (rep_it != reps.end()) return make_input(*e, rep_it->second, fn);
  auto c = store.lookup(r.category);
  if (!c) throw std::runtime_error("featurize: token not in store: '" + r.category + "'");
  return make_input(*e, *c, fn);
}

Eigen::MatrixXd featurize_records(const std::vector<PairRecord>& records,
                                  const std::vector<std::size_t>& idx,
                                  const EmbeddingStore& store, const CategoryRepMap& reps,
                                  InputFn fn) {
  if (idx.empty()) throw std::runtime_error("featurize_records: empty index set");
  Vec first = featurize_record(records.at(idx[0]), store, reps, fn);
  Eigen::MatrixXd X(idx.size(), first.size());
  X.row(0) = first.transpose();
  for (std::size_t i = 1; i < idx.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) =
        featurize_record(records.at(idx[i]), store, reps, fn).transpose();
  }
  return X;
}

std::vector<int> labels_of(const std::vector<PairRecord>& records,
                           const std::vector<std::size_t>& idx) {
  std::vector<int> y;
  y.reserve(idx.size());
  for (std::size_t i : idx) y.push_back(records.at(i).label == Label::POSITIVE ? 1 : 0);
  return y;
}

namespace {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double m = z.row(i).maxCoeff();
    Eigen::ArrayXXd ex = (z.row(i).array() - m).exp();
    p.row(i) = (ex / ex.sum()).matrix();
  }
  return p;
}

std::vector<int> layer_widths(const ModelConfig& cfg, int input_dim) {
  std::vector<int> dims = {input_dim};
  for (int l = 0; l < hidden_layer_count(cfg.arch); ++l) dims.push_back(cfg.hidden_units);
  dims.push_back(2);
  return dims;
}

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> inputs;  // masked input fed to each layer
  std::vector<Eigen::MatrixXd> activations;  // tanh outputs per hidden layer
  Eigen::MatrixXd probs;
};

// masks: one per hidden layer, applied to that layer's input; empty = no
// dropout (inference and gradient checking).
ForwardTrace forward_pass(const TrainedModel& m, const Eigen::MatrixXd& X,
                          const std::vector<Eigen::MatrixXd>* masks) {
  ForwardTrace t;
  const std::size_t n_layers = m.weights.size();
  Eigen::MatrixXd a = X;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd in = a;
    if (masks && l + 1 < n_layers) in = in.cwiseProduct((*masks)[l]);
    t.inputs.push_back(in);
    Eigen::MatrixXd z =
        (in * m.weights[l].transpose()).rowwise() + m.biases[l].transpose();
    if (l + 1 < n_layers) {
      a = z.array().tanh().matrix();
      t.activations.push_back(a);
    } else {
      t.probs = softmax_rows(z);
    }
  }
  return t;
}

struct Gradients {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
  double loss = 0.0;
};

Gradients backward_pass(const TrainedModel& m, const ForwardTrace& t, const Eigen::MatrixXd& X,
                        const std::vector<int>& y,
                        const std::vector<Eigen::MatrixXd>* masks) {
  const std::size_t n_layers = m.weights.size();
  const double n = static_cast<double>(X.rows());

  Gradients g;
  g.dW.resize(n_layers);
  g.db.resize(n_layers);
  g.loss = mean_cross_entropy(t.probs, y);

  Eigen::MatrixXd dZ = t.probs;
  for (Eigen::Index i = 0; i < dZ.rows(); ++i) dZ(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  dZ /= n;

  for (std::size_t l = n_layers; l-- > 0;) {
    g.dW[l] = dZ.transpose() * t.inputs[l];
    g.db[l] = dZ.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd dIn = dZ * m.weights[l];
    // Only hidden layers have a dropout mask on their input; the output
    // layer's input is unmasked.
    if (masks && l + 2 <= n_layers) dIn = dIn.cwiseProduct((*masks)[l]);
    const Eigen::MatrixXd& a = t.activations[l - 1];
    dZ = dIn.cwiseProduct((1.0 - a.array().square()).matrix());
  }
  return g;
}

}  // namespace

Eigen::MatrixXd TrainedModel::predict_proba_batch(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim) {
    throw std::runtime_error("predict: input has " + std::to_string(X.cols()) +
                             " features, model expects " + std::to_string(input_dim));
  }
  return forward_pass(*this, X, nullptr).probs;
}

Vec TrainedModel::predict_proba(const Vec& x) const {
  Eigen::MatrixXd X = x.transpose();
  return predict_proba_batch(X).row(0).transpose();
}

int TrainedModel::predict_label(const Vec& x) const {
  Vec p = predict_proba(x);
  return p[1] > p[0] ? 1 : 0;
}

TrainedModel init_model(const ModelConfig& config, int input_dim) {
  if (input_dim <= 0) throw std::runtime_error("init_model: non-positive input dimension");
  if (hidden_layer_count(config.arch) > 0 && config.hidden_units <= 0) {
    throw std::runtime_error("init_model: hidden architecture needs positive hidden_units");
  }
  TrainedModel m;
  m.config = config;
  m.input_dim = input_dim;
  auto dims = layer_widths(config, input_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    int fan_in = dims[l], fan_out = dims[l + 1];
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(derive_stream(config.seed, "init", l));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return m;
}

double mean_cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& gold) {
  if (probs.rows() == 0) throw std::runtime_error("mean_cross_entropy: empty batch");
  if (static_cast<std::size_t>(probs.rows()) != gold.size()) {
    throw std::runtime_error("mean_cross_entropy: probs/gold size mismatch");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    int g = gold[static_cast<std::size_t>(i)];
    if (g < 0 || g >= probs.cols()) throw std::runtime_error("mean_cross_entropy: bad gold label");
    sum += -std::log(std::max(probs(i, g), 1e-12));
  }
  return sum / static_cast<double>(probs.rows());
}

void adadelta_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, AdadeltaState& state,
                   double rho, double eps) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw std::runtime_error("adadelta_step: shape mismatch");
  }
  if (!grad.allFinite()) throw std::runtime_error("adadelta_step: non-finite gradient");
  if (state.sq_grad.size() == 0) {
    state.sq_grad = Eigen::ArrayXXd::Zero(param.rows(), param.cols());
    state.sq_update = Eigen::ArrayXXd::Zero(param.rows(), param.cols());
  }
  state.sq_grad = rho * state.sq_grad + (1.0 - rho) * grad.array().square();
  Eigen::ArrayXXd update = -((state.sq_update + eps).sqrt() / (state.sq_grad + eps).sqrt()) *
                           grad.array();
  state.sq_update = rho * state.sq_update + (1.0 - rho) * update.square();
  param.array() += update;
}

TrainedModel train_on_features(const ModelConfig& config, const Eigen::MatrixXd& Xtr,
                               const std::vector<int>& ytr, const Eigen::MatrixXd& Xval,
                               const std::vector<int>& yval) {
  if (Xtr.rows() == 0) throw std::runtime_error("train: empty training set");
  if (Xval.rows() == 0) throw std::runtime_error("train: empty validation set");
  if (static_cast<std::size_t>(Xtr.rows()) != ytr.size() ||
      static_cast<std::size_t>(Xval.rows()) != yval.size()) {
    throw std::runtime_error("train: features/labels size mismatch");
  }
  for (int v : ytr) {
    if (v != 0 && v != 1) throw std::runtime_error("train: labels must be 0 or 1");
  }

  TrainedModel model = init_model(config, static_cast<int>(Xtr.cols()));
  const std::size_t n_layers = model.weights.size();
  const int n_hidden = hidden_layer_count(config.arch);
  const double keep = 1.0 - config.dropout;

  std::vector<AdadeltaState> w_state(n_layers), b_state(n_layers);
  std::vector<Eigen::MatrixXd> best_w = model.weights;
  std::vector<Eigen::VectorXd> best_b = model.biases;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0, since_best = 0, epoch = 0;

  const std::size_t n = static_cast<std::size_t>(Xtr.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_stream(config.seed, "epoch", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    Rng drop_rng(derive_stream(config.seed, "dropout", static_cast<std::uint64_t>(epoch)));

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t bn = std::min<std::size_t>(config.batch_size, n - start);
      Eigen::MatrixXd Xb(bn, Xtr.cols());
      std::vector<int> yb(bn);
      for (std::size_t i = 0; i < bn; ++i) {
        Xb.row(static_cast<Eigen::Index>(i)) = Xtr.row(static_cast<Eigen::Index>(order[start + i]));
        yb[i] = ytr[order[start + i]];
      }

      std::vector<Eigen::MatrixXd> masks;
      const std::vector<Eigen::MatrixXd>* masks_ptr = nullptr;
      if (n_hidden > 0 && config.dropout > 0.0) {
        auto dims = layer_widths(config, model.input_dim);
        for (int l = 0; l < n_hidden; ++l) {
          Eigen::MatrixXd mask(bn, dims[static_cast<std::size_t>(l)]);
          for (Eigen::Index i = 0; i < mask.rows(); ++i) {
            for (Eigen::Index j = 0; j < mask.cols(); ++j) {
              mask(i, j) = drop_rng.real01() < keep ? 1.0 / keep : 0.0;
            }
          }
          masks.push_back(std::move(mask));
        }
        masks_ptr = &masks;
      }

      auto trace = forward_pass(model, Xb, masks_ptr);
      auto grads = backward_pass(model, trace, Xb, yb, masks_ptr);
      if (!std::isfinite(grads.loss)) {
        throw std::runtime_error("train: non-finite training loss at epoch " +
                                 std::to_string(epoch));
      }
      for (std::size_t l = 0; l < n_layers; ++l) {
        adadelta_step(model.weights[l], grads.dW[l], w_state[l]);
        Eigen::MatrixXd bg = grads.db[l];
        Eigen::MatrixXd bp = model.biases[l];
        adadelta_step(bp, bg, b_state[l]);
        model.biases[l] = bp;
      }
    }

    double val_loss = mean_cross_entropy(model.predict_proba_batch(Xval), yval);
    if (!std::isfinite(val_loss)) {
      throw std::runtime_error("train: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    }
    if (val_loss < best_val) {
      best_val = val_loss;
      best_epoch = epoch;
      best_w = model.weights;
      best_b = model.biases;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= config.patience) break;
  }

  model.weights = std::move(best_w);
  model.biases = std::move(best_b);
  model.stopped_epoch = std::min(epoch, config.max_epochs);
  model.best_epoch = best_epoch;
  model.best_val_loss = best_val;
  return model;
}

TrainedModel train(const ModelConfig& config, const std::vector<PairRecord>& records,
                   const std::vector<std::size_t>& train_idx,
                   const std::vector<std::size_t>& val_idx, const EmbeddingStore& store,
                   const CategoryRepMap& reps) {
  if (train_idx.empty()) throw std::runtime_error("train: empty training set");
  if (val_idx.empty()) throw std::runtime_error("train: empty validation set");
  auto Xtr = featurize_records(records, train_idx, store, reps, config.input_fn);
  auto Xval = featurize_records(records, val_idx, store, reps, config.input_fn);
  return train_on_features(config, Xtr, labels_of(records, train_idx), Xval,
                           labels_of(records, val_idx));
}

std::vector<int> default_width_grid() {
  std::vector<int> grid = {5, 10};
  for (int w = 50; w <= 800; w += 50) grid.push_back(w);
  return grid;
}

SearchResult hyperparam_search(const ModelConfig& base, const Eigen::MatrixXd& Xtr,
                               const std::vector<int>& ytr, const Eigen::MatrixXd& Xval,
                               const std::vector<int>& yval, const std::vector<int>& grid,
                               int jobs) {
  std::vector<int> widths = grid;
  if (base.arch == Arch::LR) widths = {0};  // no width dimension to search
  if (widths.empty()) throw std::runtime_error("hyperparam_search: empty grid");

  struct Cell {
    GridCell report;
    TrainedModel model;
  };
  std::vector<Cell> cells(widths.size());

  parallel_for(widths.size(), jobs, [&](std::size_t i) {
    ModelConfig cfg = base;
    cfg.hidden_units = widths[i];
    cfg.seed = derive_stream(base.seed, "grid", static_cast<std::uint64_t>(widths[i]));
    cells[i].report.width = widths[i];
    try {
      cells[i].model = train_on_features(cfg, Xtr, ytr, Xval, yval);
      auto probs = cells[i].model.predict_proba_batch(Xval);
      std::size_t tp = 0, fp = 0, fn = 0;
      for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        int pred = probs(r, 1) > probs(r, 0) ? 1 : 0;
        int gold = yval[static_cast<std::size_t>(r)];
        if (pred == 1 && gold == 1) ++tp;
        if (pred == 1 && gold == 0) ++fp;
        if (pred == 0 && gold == 1) ++fn;
      }
      cells[i].report.val_f1 = f1_positive(tp, fp, fn);
      cells[i].report.best_val_loss = cells[i].model.best_val_loss;
      cells[i].report.stopped_epoch = cells[i].model.stopped_epoch;
      cells[i].report.ok = true;
    } catch (const std::exception& e) {
      cells[i].report.ok = false;
      cells[i].report.error = e.what();
    }
  });

  SearchResult result;
  int best_i = -1;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    result.cells.push_back(cells[i].report);
    if (!cells[i].report.ok) continue;
    if (best_i < 0 || cells[i].report.val_f1 > result.cells[static_cast<std::size_t>(best_i)].val_f1) {
      // Grid is scanned in ascending width order, so ties keep the smaller.
      best_i = static_cast<int>(i);
    }
  }
  if (best_i < 0) throw std::runtime_error("hyperparam_search: every grid cell failed");
  result.best = std::move(cells[static_cast<std::size_t>(best_i)].model);
  result.best_width = widths[static_cast<std::size_t>(best_i)];
  return result;
}

double gradient_check(const TrainedModel& model, const Eigen::MatrixXd& X,
                      const std::vector<int>& y, std::size_t max_params, std::uint64_t seed,
                      const GradTweak& tweak) {
  auto trace = forward_pass(model, X, nullptr);
  auto analytic = backward_pass(model, trace, X, y, nullptr);
  if (tweak) tweak(analytic.dW, analytic.db);

  std::size_t total = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    total += static_cast<std::size_t>(model.weights[l].size());
    total += static_cast<std::size_t>(model.biases[l].size());
  }

  Rng rng(derive_stream(seed, "gradcheck"));
  std::vector<std::size_t> picks;
  if (total <= max_params) {
    picks.resize(total);
    std::iota(picks.begin(), picks.end(), 0);
  } else {
    picks = rng.sample_distinct(max_params, total);
  }

  TrainedModel probe = model;
  const double h = 1e-4;
  auto loss_at = [&]() { return mean_cross_entropy(probe.predict_proba_batch(X), y); };

  double max_rel = 0.0;
  for (std::size_t flat : picks) {
    // Locate the parameter: weights then biases, layer by layer.
    std::size_t off = flat;
    double* slot = nullptr;
    double ga = 0.0;
    for (std::size_t l = 0; l < probe.weights.size(); ++l) {
      std::size_t wn = static_cast<std::size_t>(probe.weights[l].size());
      if (off < wn) {
        slot = probe.weights[l].data() + off;
        ga = analytic.dW[l].data()[off];
        break;
      }
      off -= wn;
      std::size_t bn = static_cast<std::size_t>(probe.biases[l].size());
      if (off < bn) {
        slot = probe.biases[l].data() + off;
        ga = analytic.db[l].data()[off];
        break;
      }
      off -= bn;
    }
    if (!slot) throw std::logic_error("gradient_check: flat index out of range");

    double saved = *slot;
    *slot = saved + h;
    double lp = loss_at();
    *slot = saved - h;
    double lm = loss_at();
    *slot = saved;
    double gn = (lp - lm) / (2.0 * h);
    double rel = std::fabs(ga - gn) / std::max(std::fabs(ga) + std::fabs(gn), 1e-8);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

void save_model(const std::string& path, const TrainedModel& model) {
  nlohmann::json j;
  j["arch"] = arch_name(model.config.arch);
  j["input_fn"] = input_fn_name(model.config.input_fn);
  j["hidden_units"] = model.config.hidden_units;
  j["dropout"] = model.config.dropout;
  j["max_epochs"] = model.config.max_epochs;
  j["patience"] = model.config.patience;
  j["batch_size"] = model.config.batch_size;
  j["seed"] = model.config.seed;
  j["input_dim"] = model.input_dim;
  j["stopped_epoch"] = model.stopped_epoch;
  j["best_epoch"] = model.best_epoch;
  j["best_val_loss"] = model.best_val_loss;
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const auto& w = model.weights[l];
    std::vector<double> flat(static_cast<std::size_t>(w.size()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index jj = 0; jj < w.cols(); ++jj) {
        flat[static_cast<std::size_t>(i * w.cols() + jj)] = w(i, jj);  // row-major
      }
    }
    std::vector<double> bias(model.biases[l].data(),
                             model.biases[l].data() + model.biases[l].size());
    layers.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"w", flat}, {"b", bias}});
  }
  j["layers"] = std::move(layers);
  write_file(path, j.dump() + "\n");
}

TrainedModel load_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad model checkpoint: " + e.what());
  }
  TrainedModel m;
  m.config.arch = arch_from_name(j.at("arch").get<std::string>());
  m.config.input_fn = input_fn_from_name(j.at("input_fn").get<std::string>());
  m.config.hidden_units = j.at("hidden_units").get<int>();
  m.config.dropout = j.at("dropout").get<double>();
  m.config.max_epochs = j.at("max_epochs").get<int>();
  m.config.patience = j.at("patience").get<int>();
  m.config.batch_size = j.at("batch_size").get<int>();
  m.config.seed = j.at("seed").get<std::uint64_t>();
  m.input_dim = j.at("input_dim").get<int>();
  m.stopped_epoch = j.at("stopped_epoch").get<int>();
  m.best_epoch = j.at("best_epoch").get<int>();
  m.best_val_loss = j.at("best_val_loss").get<double>();
  for (const auto& layer : j.at("layers")) {
    Eigen::Index rows = layer.at("rows").get<Eigen::Index>();
    Eigen::Index cols = layer.at("cols").get<Eigen::Index>();
    auto flat = layer.at("w").get<std::vector<double>>();
    auto bias = layer.at("b").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols ||
        static_cast<Eigen::Index>(bias.size()) != rows) {
      throw std::runtime_error(path + ": layer shape does not match payload");
    }
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index jj = 0; jj < cols; ++jj) {
        w(i, jj) = flat[static_cast<std::size_t>(i * cols + jj)];
      }
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::Map<Eigen::VectorXd>(bias.data(), rows));
  }
  const int expect_layers = hidden_layer_count(m.config.arch) + 1;
  if (static_cast<int>(m.weights.size()) != expect_layers) {
    throw std::runtime_error(path + ": layer count does not match architecture");
  }
  auto dims = layer_widths(m.config, m.input_dim);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    if (m.weights[l].rows() != dims[l + 1] || m.weights[l].cols() != dims[l]) {
      throw std::runtime_error(path + ": layer " + std::to_string(l) +
                               " shape does not match the declared topology");
    }
  }
  return m;
}

}  // namespace instadet
