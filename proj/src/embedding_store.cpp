#include "instadet/embedding_store.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "instadet/util.hpp"
#include "nlohmann/json.hpp"

namespace instadet {

namespace {

// word2vec binaries are little-endian float32; refuse to run elsewhere
// rather than silently loading garbage.
void require_little_endian() {
  const std::uint32_t probe = 1;
  unsigned char byte0;
  std::memcpy(&byte0, &probe, 1);
  if (byte0 != 1) throw std::runtime_error("word2vec binary io requires a little-endian host");
}

}  // namespace

void EmbeddingStore::index_vocab() {
  index_.clear();
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    auto [it, fresh] = index_.emplace(vocab_[i], i);
    if (!fresh) throw std::runtime_error("duplicate token in vocabulary: '" + vocab_[i] + "'");
  }
}

EmbeddingStore EmbeddingStore::load_word2vec_binary(const std::string& path) {
  require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);

  // Header: "<vocab_count> <dim>\n" in ascii.
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error(path + ": missing header line");
  std::istringstream hs(header);
  long long vocab_count = -1, dim = -1;
  if (!(hs >> vocab_count >> dim) || vocab_count < 0 || dim <= 0) {
    throw std::runtime_error(path + ": malformed header '" + header + "' (want '<vocab> <dim>')");
  }

  EmbeddingStore store;
  store.dim_ = static_cast<int>(dim);
  store.vocab_.reserve(static_cast<std::size_t>(vocab_count));
  store.data_.reserve(static_cast<std::size_t>(vocab_count) * static_cast<std::size_t>(dim));

  for (long long w = 0; w < vocab_count; ++w) {
    std::string raw;
    char c;
    // Token runs to the first space. Tolerate leading newlines some writers
    // emit between records.
    while (in.get(c)) {
      if (c == ' ') break;
      if (c == '\n' && raw.empty()) continue;
      raw.push_back(c);
    }
    if (!in) {
      throw std::runtime_error(path + ": truncated at token " + std::to_string(w) + " of " +
                               std::to_string(vocab_count) + " (byte offset " +
                               std::to_string(static_cast<long long>(in.tellg())) + ")");
    }
    std::vector<float> vec(static_cast<std::size_t>(dim));
    in.read(reinterpret_cast<char*>(vec.data()),
            static_cast<std::streamsize>(sizeof(float) * vec.size()));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(float) * vec.size())) {
      throw std::runtime_error(path + ": truncated vector payload for token '" + raw +
                               "' (record " + std::to_string(w) + ")");
    }
    store.vocab_.push_back(normalize_token(raw));
    store.data_.insert(store.data_.end(), vec.begin(), vec.end());
  }
  store.index_vocab();
  store.try_adopt_sidecar(path);
  return store;
}

EmbeddingStore EmbeddingStore::load_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);

  EmbeddingStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string raw;
    ls >> raw;
    // Optional "<vocab> <dim>" count header on the first line.
    if (lineno == 1) {
      long long maybe_dim;
      std::istringstream probe(line);
      long long a;
      if ((probe >> a >> maybe_dim) && probe.eof() && a > 0 && maybe_dim > 0) continue;
    }
    std::vector<float> vec;
    double v;
    while (ls >> v) vec.push_back(static_cast<float>(v));
    if (vec.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": no values for token '" +
                               raw + "'");
    }
    if (store.dim_ == 0) {
      store.dim_ = static_cast<int>(vec.size());
    } else if (static_cast<int>(vec.size()) != store.dim_) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(store.dim_) + " values, found " +
                               std::to_string(vec.size()));
    }
    store.vocab_.push_back(normalize_token(raw));
    store.data_.insert(store.data_.end(), vec.begin(), vec.end());
  }
  if (store.vocab_.empty()) throw std::runtime_error(path + ": no embeddings found");
  store.index_vocab();
  store.try_adopt_sidecar(path);
  return store;
}

EmbeddingStore EmbeddingStore::from_rows(const std::vector<std::string>& tokens,
                                         const std::vector<std::vector<double>>& rows) {
  if (tokens.size() != rows.size()) throw std::runtime_error("from_rows: tokens/rows size mismatch");
  if (tokens.empty()) throw std::runtime_error("from_rows: empty input");
  EmbeddingStore store;
  store.dim_ = static_cast<int>(rows.front().size());
  if (store.dim_ == 0) throw std::runtime_error("from_rows: zero-dimensional vectors");
  store.vocab_.reserve(tokens.size());
  store.data_.reserve(tokens.size() * rows.front().size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != store.dim_) {
      throw std::runtime_error("from_rows: row " + std::to_string(i) + " has " +
                               std::to_string(rows[i].size()) + " values, expected " +
                               std::to_string(store.dim_));
    }
    store.vocab_.push_back(normalize_token(tokens[i]));
    for (double v : rows[i]) store.data_.push_back(static_cast<float>(v));
  }
  store.index_vocab();
  return store;
}

void EmbeddingStore::save_word2vec_binary(const std::string& path) const {
  require_little_endian();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path);
  out << vocab_.size() << ' ' << dim_ << '\n';
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    out << vocab_[i] << ' ';
    out.write(reinterpret_cast<const char*>(data_.data() + i * static_cast<std::size_t>(dim_)),
              static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(dim_)));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
  write_metadata_sidecar(path);
}

void EmbeddingStore::save_text(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path);
  out << vocab_.size() << ' ' << dim_ << '\n';
  char buf[64];
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    out << vocab_[i];
    for (int d = 0; d < dim_; ++d) {
      // %.9g round-trips float32 exactly.
      std::snprintf(buf, sizeof(buf), "%.9g",
                    static_cast<double>(data_[i * static_cast<std::size_t>(dim_) +
                                              static_cast<std::size_t>(d)]));
      out << ' ' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
  write_metadata_sidecar(path);
}

void EmbeddingStore::write_metadata_sidecar(const std::string& path) const {
  nlohmann::json meta;
  meta["dim"] = dim_;
  meta["vocab_size"] = vocab_.size();
  meta["rescaled"] = rescaled_;
  meta["rescale_subset_hash"] = rescale_subset_hash_;
  write_file(path + ".meta.json", meta.dump(2) + "\n");
}

void EmbeddingStore::try_adopt_sidecar(const std::string& path) {
  const std::string meta_path = path + ".meta.json";
  if (!std::filesystem::exists(meta_path)) return;
  try {
    auto meta = nlohmann::json::parse(read_file(meta_path));
    if (meta.value("rescaled", false)) {
      rescaled_ = true;
      rescale_subset_hash_ = meta.value("rescale_subset_hash", std::string{});
    }
  } catch (const std::exception&) {
    // A corrupt sidecar must not block loading the embeddings themselves.
  }
}

bool EmbeddingStore::contains(std::string_view token) const {
  return index_.count(normalize_token(token)) > 0;
}

std::optional<Vec> EmbeddingStore::lookup(std::string_view token) const {
  auto it = index_.find(normalize_token(token));
  if (it == index_.end()) return std::nullopt;
  return row(it->second);
}

Vec EmbeddingStore::row(std::size_t i) const {
  if (i >= vocab_.size()) throw std::out_of_range("embedding row index out of range");
  Vec v(dim_);
  const float* src = data_.data() + i * static_cast<std::size_t>(dim_);
  for (int d = 0; d < dim_; ++d) v[d] = static_cast<double>(src[d]);
  return v;
}

std::span<const float> EmbeddingStore::row_f32(std::size_t i) const {
  if (i >= vocab_.size()) throw std::out_of_range("embedding row index out of range");
  return {data_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
}

EmbeddingStore EmbeddingStore::rescale_columns(const std::vector<std::string>& subset) const {
  if (rescaled_) throw std::runtime_error("store is already rescaled");

  std::vector<std::size_t> rows;
  if (subset.empty()) {
    rows.resize(vocab_.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  } else {
    rows.reserve(subset.size());
    std::vector<bool> seen(vocab_.size(), false);
    for (const auto& tok : subset) {
      auto it = index_.find(normalize_token(tok));
      if (it == index_.end()) throw std::runtime_error("rescale subset token not in store: '" + tok + "'");
      if (!seen[it->second]) {
        seen[it->second] = true;
        rows.push_back(it->second);
      }
    }
  }
  if (rows.empty()) throw std::runtime_error("rescale subset resolves to zero rows");

  std::vector<float> maxabs(static_cast<std::size_t>(dim_), 0.0f);
  for (std::size_t r : rows) {
    const float* src = data_.data() + r * static_cast<std::size_t>(dim_);
    for (int d = 0; d < dim_; ++d) {
      float a = std::fabs(src[d]);
      if (a > maxabs[static_cast<std::size_t>(d)]) maxabs[static_cast<std::size_t>(d)] = a;
    }
  }

  EmbeddingStore out;
  out.dim_ = dim_;
  out.vocab_.reserve(rows.size());
  out.data_.reserve(rows.size() * static_cast<std::size_t>(dim_));
  for (std::size_t r : rows) {
    out.vocab_.push_back(vocab_[r]);
    const float* src = data_.data() + r * static_cast<std::size_t>(dim_);
    for (int d = 0; d < dim_; ++d) {
      float m = maxabs[static_cast<std::size_t>(d)];
      out.data_.push_back(m > 0.0f ? src[d] / m : src[d]);
    }
  }
  out.index_vocab();

  std::string joined;
  for (std::size_t r : rows) {
    joined += vocab_[r];
    joined += '\n';
  }
  out.set_rescaled(true, fnv1a64_hex(joined));
  return out;
}

double cosine(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::runtime_error("cosine: dimension mismatch");
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw std::runtime_error("cosine: zero-norm vector");
  return a.dot(b) / (na * nb);
}

Vec centroid(const EmbeddingStore& store, const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw std::runtime_error("centroid: empty token list");
  Vec acc = Vec::Zero(store.dim());
  for (const auto& tok : tokens) {
    auto v = store.lookup(tok);
    if (!v) throw std::runtime_error("centroid: token not in store: '" + tok + "'");
    acc += *v;
  }
  return acc / static_cast<double>(tokens.size());
}

Vec centroid_of(const std::vector<Vec>& vectors) {
  if (vectors.empty()) throw std::runtime_error("centroid: empty vector list");
  Vec acc = Vec::Zero(vectors.front().size());
  for (const auto& v : vectors) {
    if (v.size() != acc.size()) throw std::runtime_error("centroid: dimension mismatch");
    acc += v;
  }
  return acc / static_cast<double>(vectors.size());
}

}  // namespace instadet
