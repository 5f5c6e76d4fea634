#include "instadet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "instadet/rng.hpp"
#include "instadet/util.hpp"

namespace instadet {

std::vector<TokenPoint> collect_points(const std::vector<PairRecord>& positives) {
  std::vector<TokenPoint> points;
  std::unordered_set<std::string> seen;
  for (const auto& r : positives) {
    if (r.label != Label::POSITIVE) continue;
    if (seen.insert(r.entity).second) points.push_back({r.entity, "entity", r.onto_class});
    if (seen.insert(r.category).second)
      points.push_back({r.category, "category", r.onto_class});
  }
  if (points.empty()) throw std::runtime_error("collect_points: no positive records");
  return points;
}

Eigen::MatrixXd point_matrix(const std::vector<TokenPoint>& points,
                             const EmbeddingStore& store) {
  if (points.empty()) throw std::runtime_error("point_matrix: no points");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(points.size()),
                    static_cast<Eigen::Index>(store.dim()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto v = store.lookup(points[i].token);
    if (!v) throw std::runtime_error("point_matrix: no embedding for '" + points[i].token + "'");
    X.row(static_cast<Eigen::Index>(i)) = v->transpose();
  }
  return X;
}

Pca2dResult pca_2d(const Eigen::MatrixXd& X) {
  if (X.rows() < 3) throw std::runtime_error("pca_2d: need at least 3 vectors");
  if (X.cols() < 2) throw std::runtime_error("pca_2d: need at least 2 dimensions");

  Eigen::RowVectorXd mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - mean;
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(X.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca_2d: eigensolver failed");

  const auto& values = solver.eigenvalues();  // ascending
  const Eigen::Index last = values.size() - 1;
  double total = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) total += std::max(values[i], 0.0);

  Pca2dResult res;
  res.component1 = solver.eigenvectors().col(last);
  res.component2 = solver.eigenvectors().col(last - 1);
  double l1 = std::max(values[last], 0.0);
  double l2 = std::max(values[last - 1], 0.0);
  res.var_fraction1 = total > 0.0 ? l1 / total : 0.0;
  res.var_fraction2 = total > 0.0 ? l2 / total : 0.0;
  res.second_degenerate = l2 <= 1e-10 * std::max(l1, 1e-300);

  // Fix the sign so the largest-magnitude loading is positive.
  for (Vec* comp : {&res.component1, &res.component2}) {
    Eigen::Index at = 0;
    comp->cwiseAbs().maxCoeff(&at);
    if ((*comp)[at] < 0.0) *comp = -*comp;
  }

  res.coords.resize(X.rows(), 2);
  res.coords.col(0) = centered * res.component1;
  res.coords.col(1) = centered * res.component2;
  return res;
}

namespace {

std::vector<std::size_t> distinct_row_reps(const Eigen::MatrixXd& X) {
  std::set<std::vector<double>> seen;
  std::vector<std::size_t> reps;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::vector<double> key(X.row(i).begin(), X.row(i).end());
    if (seen.insert(std::move(key)).second) reps.push_back(static_cast<std::size_t>(i));
  }
  return reps;
}

void assign_nearest(const Eigen::MatrixXd& X, const Eigen::MatrixXd& centers,
                    std::vector<int>& assign, std::vector<double>& dist2) {
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int best = 0;
    double best_d = (X.row(i) - centers.row(0)).squaredNorm();
    for (Eigen::Index c = 1; c < centers.rows(); ++c) {
      double d = (X.row(i) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    assign[static_cast<std::size_t>(i)] = best;
    dist2[static_cast<std::size_t>(i)] = best_d;
  }
}

struct LloydRun {
  std::vector<int> assignments;
  Eigen::MatrixXd centers;
  double inertia = 0.0;
};

LloydRun lloyd(const Eigen::MatrixXd& X, int k, int max_iter, double tol, Rng& rng,
               const std::vector<std::size_t>& reps) {
  auto pick = rng.sample_distinct(static_cast<std::size_t>(k), reps.size());
  Eigen::MatrixXd centers(k, X.cols());
  for (int c = 0; c < k; ++c)
    centers.row(c) = X.row(static_cast<Eigen::Index>(reps[pick[static_cast<std::size_t>(c)]]));

  std::vector<int> assign(static_cast<std::size_t>(X.rows()), 0);
  std::vector<double> dist2(static_cast<std::size_t>(X.rows()), 0.0);

  for (int iter = 0; iter < max_iter; ++iter) {
    assign_nearest(X, centers, assign, dist2);

    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, X.cols());
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      next.row(assign[static_cast<std::size_t>(i)]) += X.row(i);
      ++sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    std::vector<char> grabbed(static_cast<std::size_t>(X.rows()), 0);
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its center.
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (grabbed[static_cast<std::size_t>(i)]) continue;
        if (dist2[static_cast<std::size_t>(i)] > far_d) {
          far_d = dist2[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      next.row(c) = X.row(far);
      grabbed[static_cast<std::size_t>(far)] = 1;
    }

    double movement = (next - centers).rowwise().squaredNorm().sum();
    centers = std::move(next);
    if (movement <= tol) break;
  }

  assign_nearest(X, centers, assign, dist2);
  LloydRun run;
  run.assignments = std::move(assign);
  run.centers = std::move(centers);
  for (double d : dist2) run.inertia += d;
  return run;
}

}  // namespace

ClusterSolution kmeans(const Eigen::MatrixXd& X, int k, int restarts, int max_iter,
                       double tol, std::uint64_t seed, int jobs) {
  if (X.rows() == 0) throw std::runtime_error("kmeans: empty input");
  if (k <= 0) throw std::runtime_error("kmeans: k must be positive");
  if (restarts <= 0) throw std::runtime_error("kmeans: restarts must be positive");
  auto reps = distinct_row_reps(X);
  if (static_cast<std::size_t>(k) > reps.size()) {
    throw std::runtime_error("kmeans: k = " + std::to_string(k) + " exceeds the " +
                             std::to_string(reps.size()) + " distinct points");
  }

  std::vector<LloydRun> runs(static_cast<std::size_t>(restarts));
  parallel_for(static_cast<std::size_t>(restarts), jobs, [&](std::size_t r) {
    Rng rng(derive_stream(seed, "kmeans", r));
    runs[r] = lloyd(X, k, max_iter, tol, rng, reps);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }

  ClusterSolution sol;
  sol.k = k;
  sol.assignments = std::move(runs[best].assignments);
  sol.centers = std::move(runs[best].centers);
  sol.inertia = runs[best].inertia;
  sol.restarts_run = restarts;
  for (const auto& run : runs) sol.restart_inertias.push_back(run.inertia);
  return sol;
}

std::vector<ClusterProfile> cluster_profile(const ClusterSolution& solution,
                                            const std::vector<TokenPoint>& points) {
  if (solution.assignments.size() != points.size()) {
    throw std::runtime_error("cluster_profile: assignments do not cover the points");
  }
  std::vector<ClusterProfile> profiles(static_cast<std::size_t>(solution.k));
  for (std::size_t c = 0; c < profiles.size(); ++c) profiles[c].cluster = static_cast<int>(c);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& p = profiles[static_cast<std::size_t>(solution.assignments[i])];
    if (points[i].role == "entity") {
      ++p.entity_count;
    } else {
      ++p.category_count;
    }
    ++p.class_counts[points[i].onto_class];
  }
  return profiles;
}

CategoryRepMap all_entity_centroids(const std::vector<PairRecord>& positives,
                                    const EmbeddingStore& store) {
  std::unordered_map<std::string, std::set<std::string>> members;
  for (const auto& r : positives) {
    if (r.label != Label::POSITIVE) continue;
    members[r.category].insert(r.entity);
  }
  CategoryRepMap reps;
  for (const auto& [cat, ents] : members) {
    Vec sum = Vec::Zero(static_cast<Eigen::Index>(store.dim()));
    for (const auto& e : ents) {
      auto v = store.lookup(e);
      if (!v) throw std::runtime_error("centroid: no embedding for entity '" + e + "'");
      sum += *v;
    }
    reps[cat] = sum / static_cast<double>(ents.size());
  }
  return reps;
}

namespace {

struct CellAcc {
  double sum = 0.0;
  double sumsq = 0.0;
  std::size_t n = 0;

  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }

  SimCell finish(bool sampled) const {
    SimCell cell;
    cell.n_pairs = n;
    cell.defined = n > 0;
    cell.sampled = sampled;
    if (n > 0) {
      cell.mean = sum / static_cast<double>(n);
      cell.sd = std::sqrt(std::max(0.0, sumsq / static_cast<double>(n) - cell.mean * cell.mean));
    }
    return cell;
  }
};

Vec unit_or_throw(const Vec& v, const std::string& what) {
  double n = v.norm();
  if (n == 0.0) throw std::runtime_error("similarity_table: zero-norm vector for " + what);
  return v / n;
}

// Across cells enumerate the full pair universe when it fits under the cap
// and fall back to uniform with-replacement sampling otherwise.
template <typename Unrank, typename Draw, typename Accept, typename Value>
SimCell across_cell(std::size_t universe, std::size_t cap, const Unrank& unrank,
                    const Draw& draw, const Accept& accept, const Value& value) {
  CellAcc acc;
  if (universe <= cap) {
    for (std::size_t r = 0; r < universe; ++r) {
      auto [a, b] = unrank(r);
      if (accept(a, b)) acc.add(value(a, b));
    }
    return acc.finish(false);
  }
  const std::size_t budget = cap * 20;
  for (std::size_t t = 0; t < budget && acc.n < cap; ++t) {
    auto [a, b] = draw();
    if (accept(a, b)) acc.add(value(a, b));
  }
  return acc.finish(true);
}

SimCell listed_cell(std::vector<double>& values, std::size_t cap, Rng& rng) {
  bool sampled = values.size() > cap;
  if (sampled) {
    for (std::size_t i = 0; i < cap; ++i) {
      std::size_t j = i + rng.below(values.size() - i);
      std::swap(values[i], values[j]);
    }
    values.resize(cap);
  }
  CellAcc acc;
  for (double v : values) acc.add(v);
  return acc.finish(sampled);
}

}  // namespace

SimilarityTable similarity_table(const std::vector<PairRecord>& positives,
                                 const EmbeddingStore& store, const CategoryRepMap& centroids,
                                 std::size_t pair_cap, std::uint64_t seed) {
  if (pair_cap == 0) throw std::runtime_error("similarity_table: pair cap must be positive");

  // Distinct entities and categories in first-appearance order.
  std::vector<std::string> entities, categories;
  std::unordered_map<std::string, std::size_t> ent_index, cat_index;
  for (const auto& r : positives) {
    if (r.label != Label::POSITIVE) continue;
    if (!ent_index.count(r.entity)) {
      ent_index[r.entity] = entities.size();
      entities.push_back(r.entity);
    }
    if (!cat_index.count(r.category)) {
      cat_index[r.category] = categories.size();
      categories.push_back(r.category);
    }
  }
  if (entities.empty()) throw std::runtime_error("similarity_table: no positive records");

  std::vector<std::set<std::size_t>> gold(entities.size());
  for (const auto& r : positives) {
    if (r.label != Label::POSITIVE) continue;
    gold[ent_index[r.entity]].insert(cat_index[r.category]);
  }

  std::vector<Vec> E, C;
  for (const auto& e : entities) {
    auto v = store.lookup(e);
    if (!v) throw std::runtime_error("similarity_table: no embedding for '" + e + "'");
    E.push_back(unit_or_throw(*v, "entity '" + e + "'"));
  }
  for (const auto& c : categories) {
    auto v = store.lookup(c);
    if (!v) throw std::runtime_error("similarity_table: no embedding for '" + c + "'");
    C.push_back(unit_or_throw(*v, "category '" + c + "'"));
  }

  // Categories that have a centroid, in category order.
  std::vector<std::size_t> cen_cat;  // centroid slot -> category index
  std::vector<Vec> Cen;
  std::vector<std::ptrdiff_t> cen_of_cat(categories.size(), -1);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    auto it = centroids.find(categories[c]);
    if (it == centroids.end()) continue;
    cen_of_cat[c] = static_cast<std::ptrdiff_t>(Cen.size());
    cen_cat.push_back(c);
    Cen.push_back(unit_or_throw(it->second, "centroid of '" + categories[c] + "'"));
  }

  auto shares = [&](std::size_t e1, std::size_t e2) {
    const auto &a = gold[e1], &b = gold[e2];
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& big = a.size() <= b.size() ? b : a;
    for (std::size_t c : small)
      if (big.count(c)) return true;
    return false;
  };

  SimilarityTable table;
  table.pair_cap = pair_cap;
  const std::size_t nE = entities.size(), nC = categories.size(), nZ = Cen.size();

  auto tri_unrank = [](std::size_t n) {
    return [n](std::size_t r) {
      // Row-by-row walk of the strict upper triangle.
      std::size_t i = 0, row = n - 1;
      while (r >= row) {
        r -= row;
        ++i;
        --row;
      }
      return std::make_pair(i, i + 1 + r);
    };
  };
  auto rect_unrank = [](std::size_t cols) {
    return [cols](std::size_t r) { return std::make_pair(r / cols, r % cols); };
  };

  // entities across / within
  {
    Rng rng(derive_stream(seed, "simcell", 0));
    auto draw = [&]() {
      std::size_t a = rng.below(nE), b = rng.below(nE);
      while (b == a) b = rng.below(nE);
      return std::make_pair(std::min(a, b), std::max(a, b));
    };
    table.entities_across = across_cell(
        nE >= 2 ? nE * (nE - 1) / 2 : 0, pair_cap, tri_unrank(nE), draw,
        [&](std::size_t a, std::size_t b) { return !shares(a, b); },
        [&](std::size_t a, std::size_t b) { return E[a].dot(E[b]); });

    std::vector<double> within;
    std::unordered_set<std::uint64_t> seen;
    std::vector<std::vector<std::size_t>> by_cat(nC);
    for (std::size_t e = 0; e < nE; ++e)
      for (std::size_t c : gold[e]) by_cat[c].push_back(e);
    for (const auto& group : by_cat) {
      for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t j = i + 1; j < group.size(); ++j) {
          std::uint64_t key = static_cast<std::uint64_t>(std::min(group[i], group[j])) * nE +
                              std::max(group[i], group[j]);
          if (seen.insert(key).second) within.push_back(E[group[i]].dot(E[group[j]]));
        }
      }
    }
    Rng wrng(derive_stream(seed, "simcell", 1));
    table.entities_within = listed_cell(within, pair_cap, wrng);
  }

  // categories across
  {
    Rng rng(derive_stream(seed, "simcell", 2));
    auto draw = [&]() {
      std::size_t a = rng.below(nC), b = rng.below(nC);
      while (b == a) b = rng.below(nC);
      return std::make_pair(std::min(a, b), std::max(a, b));
    };
    table.categories_across = across_cell(
        nC >= 2 ? nC * (nC - 1) / 2 : 0, pair_cap, tri_unrank(nC), draw,
        [](std::size_t, std::size_t) { return true; },
        [&](std::size_t a, std::size_t b) { return C[a].dot(C[b]); });
  }

  // centroids across
  {
    Rng rng(derive_stream(seed, "simcell", 3));
    auto draw = [&]() {
      std::size_t a = rng.below(nZ), b = rng.below(nZ);
      while (b == a) b = rng.below(nZ);
      return std::make_pair(std::min(a, b), std::max(a, b));
    };
    table.centroids_across = across_cell(
        nZ >= 2 ? nZ * (nZ - 1) / 2 : 0, pair_cap, tri_unrank(nZ), draw,
        [](std::size_t, std::size_t) { return true; },
        [&](std::size_t a, std::size_t b) { return Cen[a].dot(Cen[b]); });
  }

  // entity-category across / within
  {
    Rng rng(derive_stream(seed, "simcell", 4));
    auto draw = [&]() { return std::make_pair(rng.below(nE), rng.below(nC)); };
    table.entity_category_across = across_cell(
        nE * nC, pair_cap, rect_unrank(nC), draw,
        [&](std::size_t e, std::size_t c) { return !gold[e].count(c); },
        [&](std::size_t e, std::size_t c) { return E[e].dot(C[c]); });

    std::vector<double> within;
    for (std::size_t e = 0; e < nE; ++e)
      for (std::size_t c : gold[e]) within.push_back(E[e].dot(C[c]));
    Rng wrng(derive_stream(seed, "simcell", 5));
    table.entity_category_within = listed_cell(within, pair_cap, wrng);
  }

  // entity-centroid across / within
  {
    Rng rng(derive_stream(seed, "simcell", 6));
    auto draw = [&]() { return std::make_pair(rng.below(nE), rng.below(nZ)); };
    table.entity_centroid_across = across_cell(
        nE * nZ, pair_cap, rect_unrank(nZ), draw,
        [&](std::size_t e, std::size_t z) { return !gold[e].count(cen_cat[z]); },
        [&](std::size_t e, std::size_t z) { return E[e].dot(Cen[z]); });

    std::vector<double> within;
    for (std::size_t e = 0; e < nE; ++e) {
      for (std::size_t c : gold[e]) {
        if (cen_of_cat[c] >= 0) within.push_back(E[e].dot(Cen[static_cast<std::size_t>(cen_of_cat[c])]));
      }
    }
    Rng wrng(derive_stream(seed, "simcell", 7));
    table.entity_centroid_within = listed_cell(within, pair_cap, wrng);
  }

  // category-centroid across / within
  {
    Rng rng(derive_stream(seed, "simcell", 8));
    auto draw = [&]() { return std::make_pair(rng.below(nC), rng.below(nZ)); };
    table.category_centroid_across = across_cell(
        nC * nZ, pair_cap, rect_unrank(nZ), draw,
        [&](std::size_t c, std::size_t z) { return cen_cat[z] != c; },
        [&](std::size_t c, std::size_t z) { return C[c].dot(Cen[z]); });

    std::vector<double> within;
    for (std::size_t c = 0; c < nC; ++c) {
      if (cen_of_cat[c] >= 0) within.push_back(C[c].dot(Cen[static_cast<std::size_t>(cen_of_cat[c])]));
    }
    Rng wrng(derive_stream(seed, "simcell", 9));
    table.category_centroid_within = listed_cell(within, pair_cap, wrng);
  }

  for (const SimCell* cell :
       {&table.entities_across, &table.entities_within, &table.categories_across,
        &table.centroids_across, &table.entity_category_across, &table.entity_category_within,
        &table.entity_centroid_across, &table.entity_centroid_within,
        &table.category_centroid_across, &table.category_centroid_within}) {
    if (cell->sampled) table.cap_triggered = true;
  }
  return table;
}

void write_pca_csv(const std::string& path, const std::vector<TokenPoint>& points,
                   const Pca2dResult& pca) {
  if (static_cast<Eigen::Index>(points.size()) != pca.coords.rows()) {
    throw std::runtime_error("write_pca_csv: points and coordinates disagree");
  }
  std::ostringstream out;
  out << "token,role,class,x,y\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << points[i].token << ',' << points[i].role << ',' << points[i].onto_class << ','
        << format_double(pca.coords(static_cast<Eigen::Index>(i), 0), 6) << ','
        << format_double(pca.coords(static_cast<Eigen::Index>(i), 1), 6) << '\n';
  }
  write_file(path, out.str());
}

void write_clusters_csv(const std::string& path, const std::vector<TokenPoint>& points,
                        const ClusterSolution& solution) {
  if (solution.assignments.size() != points.size()) {
    throw std::runtime_error("write_clusters_csv: assignments do not cover the points");
  }
  std::ostringstream out;
  out << "token,cluster\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << points[i].token << ',' << solution.assignments[i] << '\n';
  }
  write_file(path, out.str());
}

void write_cluster_profiles_csv(const std::string& path,
                                const std::vector<ClusterProfile>& profiles) {
  std::ostringstream out;
  out << "cluster,kind,key,count\n";
  for (const auto& p : profiles) {
    out << p.cluster << ",role,entity," << p.entity_count << '\n';
    out << p.cluster << ",role,category," << p.category_count << '\n';
    for (const auto& [cls, count] : p.class_counts) {
      out << p.cluster << ",class," << cls << ',' << count << '\n';
    }
  }
  write_file(path, out.str());
}

void write_similarity_csv(const std::string& path, const SimilarityTable& table) {
  std::ostringstream out;
  out << "cell,mean,sd,n_pairs\n";
  auto row = [&](const char* name, const SimCell& cell) {
    out << name << ',';
    if (cell.defined) {
      out << format_double(cell.mean, 6) << ',' << format_double(cell.sd, 6);
    } else {
      out << ',';
    }
    out << ',' << cell.n_pairs << '\n';
  };
  row("entities_across", table.entities_across);
  row("entities_within", table.entities_within);
  row("categories_across", table.categories_across);
  row("centroids_across", table.centroids_across);
  row("entity_category_across", table.entity_category_across);
  row("entity_category_within", table.entity_category_within);
  row("entity_centroid_across", table.entity_centroid_across);
  row("entity_centroid_within", table.entity_centroid_within);
  row("category_centroid_across", table.category_centroid_across);
  row("category_centroid_within", table.category_centroid_within);
  write_file(path, out.str());
}

}  // namespace instadet
