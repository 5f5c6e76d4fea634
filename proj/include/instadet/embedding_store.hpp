#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace instadet {

using Vec = Eigen::VectorXd;

// Immutable vocabulary -> dense vector map. Values are stored as float32
// (the on-disk precision of the word2vec binary format); all math downstream
// runs in double. Tokens are normalized at ingest: lowercase, internal
// whitespace replaced by underscore.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  static EmbeddingStore load_word2vec_binary(const std::string& path);
  static EmbeddingStore load_text(const std::string& path);
  // Build from in-memory rows (tests, python bindings).
  static EmbeddingStore from_rows(const std::vector<std::string>& tokens,
                                  const std::vector<std::vector<double>>& rows);

  void save_word2vec_binary(const std::string& path) const;
  void save_text(const std::string& path) const;
  // "<path>.meta.json": dimension, vocab size, rescale flag and subset hash.
  void write_metadata_sidecar(const std::string& path) const;

  int dim() const { return dim_; }
  std::size_t size() const { return vocab_.size(); }
  bool rescaled() const { return rescaled_; }
  const std::string& rescale_subset_hash() const { return rescale_subset_hash_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  bool contains(std::string_view token) const;
  // MISS (out of vocabulary) is a normal outcome, not an error: the dataset
  // builder uses it as a coverage filter.
  std::optional<Vec> lookup(std::string_view token) const;
  Vec row(std::size_t i) const;
  std::span<const float> row_f32(std::size_t i) const;

  // Returns a new store restricted to `subset` (empty subset list = ALL
  // tokens), with every column divided by its max-abs over the subset rows.
  // All-zero columns are left unchanged. Throws if already rescaled, if the
  // subset is explicitly empty-by-filtering, or if a subset token is missing.
  EmbeddingStore rescale_columns(const std::vector<std::string>& subset) const;
  EmbeddingStore rescale_all() const { return rescale_columns({}); }

 private:
  void index_vocab();
  void set_rescaled(bool flag, std::string hash) {
    rescaled_ = flag;
    rescale_subset_hash_ = std::move(hash);
  }
  void try_adopt_sidecar(const std::string& path);

  int dim_ = 0;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> data_;  // row-major, vocab.size() x dim
  bool rescaled_ = false;
  std::string rescale_subset_hash_;
};

// dot(a,b) / (|a||b|). Throws on a zero-norm input.
double cosine(const Vec& a, const Vec& b);

// Dimension-wise mean of the tokens' vectors. Throws on an empty list or a
// missing token.
Vec centroid(const EmbeddingStore& store, const std::vector<std::string>& tokens);
Vec centroid_of(const std::vector<Vec>& vectors);

}  // namespace instadet
