#include "mtxplain/embed.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "mtxplain/error.h"
#include "mtxplain/linalg.h"
#include "mtxplain/rng.h"

namespace mtx {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0' && std::isfinite(out);
}

}  // namespace

OovPolicy parse_oov_policy(const std::string& name) {
  if (name == "zeros") return OovPolicy::kZeros;
  if (name == "random") return OovPolicy::kRandom;
  throw ConfigError("unknown OOV policy '" + name + "' (expected zeros|random)");
}

std::string oov_policy_name(OovPolicy policy) {
  return policy == OovPolicy::kZeros ? "zeros" : "random";
}

EmbeddingTable::EmbeddingTable(size_t dim, OovPolicy oov, uint64_t oov_seed)
    : dim_(dim), oov_(oov), oov_seed_(oov_seed) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
}

bool EmbeddingTable::add(const std::string& token, std::span<const double> vector) {
  if (vector.size() != dim_) {
    throw DimensionError("embedding for '" + token + "' has " +
                         std::to_string(vector.size()) + " values, expected " +
                         std::to_string(dim_));
  }
  if (index_.count(token)) return false;
  index_[token] = tokens_.size();
  tokens_.push_back(token);
  matrix_.insert(matrix_.end(), vector.begin(), vector.end());
  return true;
}

std::optional<size_t> EmbeddingTable::index(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> EmbeddingTable::row(size_t i) const {
  return std::span<const double>(matrix_).subspan(i * dim_, dim_);
}

std::vector<double> EmbeddingTable::lookup(const std::string& token) const {
  if (auto i = index(token)) {
    auto r = row(*i);
    return {r.begin(), r.end()};
  }
  std::vector<double> out(dim_, 0.0);
  if (oov_ == OovPolicy::kRandom) {
    // uniform(-a, a) with a = 1/sqrt(dim), seeded by (seed, token).
    Rng rng(mix64(oov_seed_) ^ fnv1a(token));
    const double a = 1.0 / std::sqrt(static_cast<double>(dim_));
    for (double& v : out) v = rng.uniform(-a, a);
  }
  return out;
}

EmbeddingTable load_embeddings(const std::string& path, std::optional<size_t> limit,
                               LoadReport* report, OovPolicy oov, uint64_t oov_seed) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open embeddings file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path + "' is empty");
  auto header = split_ws(line);
  double count_d = 0.0;
  double dim_d = 0.0;
  if (header.size() != 2 || !parse_double(header[0], count_d) ||
      !parse_double(header[1], dim_d) || dim_d < 1 || count_d < 0 ||
      dim_d != std::floor(dim_d) || count_d != std::floor(count_d)) {
    throw FormatError("'" + path + "': malformed header, expected \"count dim\"");
  }
  const size_t dim = static_cast<size_t>(dim_d);
  EmbeddingTable table(dim, oov, oov_seed);
  LoadReport local;
  size_t seen = 0;
  std::vector<double> values(dim);
  while (std::getline(in, line)) {
    if (limit && table.size() >= *limit) break;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++seen;
    auto fields = split_ws(line);
    bool ok = fields.size() == dim + 1;
    for (size_t i = 0; ok && i < dim; ++i) ok = parse_double(fields[i + 1], values[i]);
    if (!ok || !table.add(fields[0], values)) {
      ++local.skipped_lines;
      continue;
    }
  }
  if (seen > 0 && 2 * local.skipped_lines > seen) {
    throw FormatError("'" + path + "': " + std::to_string(local.skipped_lines) +
                      " of " + std::to_string(seen) +
                      " lines do not match the declared dimension " +
                      std::to_string(dim));
  }
  local.loaded = table.size();
  if (report) *report = local;
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write embeddings file '" + path + "'");
  out << table.size() << " " << table.dim() << "\n";
  out << std::setprecision(17);
  for (size_t i = 0; i < table.size(); ++i) {
    out << table.tokens()[i];
    for (double v : table.row(i)) out << " " << v;
    out << "\n";
  }
  if (!out) throw FormatError("failed writing '" + path + "'");
}

EmbeddedSequence embed_sequence(const EmbeddingTable& table,
                                std::span<const std::string> tokens, size_t n) {
  if (n == 0) throw ConfigError("sequence length must be positive");
  const size_t dim = table.dim();
  EmbeddedSequence seq{Tensor::zeros({n, dim}), Mask(n, 0), tokens.empty()};
  auto d = seq.values.mutable_data();
  for (size_t i = 0; i < std::min(n, tokens.size()); ++i) {
    auto v = table.lookup(tokens[i]);
    std::copy(v.begin(), v.end(), d.begin() + i * dim);
    seq.mask[i] = 1;
  }
  return seq;
}

void ContextualStore::add(const std::string& id, std::vector<std::vector<double>> rows) {
  for (const auto& r : rows) {
    if (dim_ == 0) dim_ = r.size();
    if (r.size() != dim_ || dim_ == 0) {
      throw FormatError("contextual vectors for '" + id + "' have width " +
                        std::to_string(r.size()) + ", expected " +
                        std::to_string(dim_));
    }
  }
  vectors_[id] = std::move(rows);
}

EmbeddedSequence ContextualStore::embed(const std::string& id, size_t n) const {
  auto it = vectors_.find(id);
  if (it == vectors_.end()) throw DataError("no contextual vectors for id '" + id + "'");
  if (n == 0) throw ConfigError("sequence length must be positive");
  if (dim_ == 0) throw DataError("contextual vectors for '" + id + "' are empty");
  const auto& rows = it->second;
  EmbeddedSequence seq{Tensor::zeros({n, dim_}), Mask(n, 0), rows.empty()};
  auto d = seq.values.mutable_data();
  for (size_t i = 0; i < std::min(n, rows.size()); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), d.begin() + i * dim_);
    seq.mask[i] = 1;
  }
  return seq;
}

ContextualStore load_contextual(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open contextual vectors file '" + path + "'");
  ContextualStore store;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      store.add(j.at("id").get<std::string>(),
                j.at("vectors").get<std::vector<std::vector<double>>>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("'" + path + "' line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

BilingualDictionary load_dictionary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dictionary '" + path + "'");
  BilingualDictionary dict;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty() || fields[0][0] == '#') continue;
    if (fields.size() != 2) {
      throw FormatError("'" + path + "' line " + std::to_string(line_no) +
                        ": expected \"source target\"");
    }
    dict.pairs.emplace_back(fields[0], fields[1]);
  }
  return dict;
}

EmbeddingTable normalize_embeddings(const EmbeddingTable& table) {
  const size_t dim = table.dim();
  const size_t n = table.size();
  std::vector<double> m(table.matrix().begin(), table.matrix().end());
  auto unit_rows = [&] {
    for (size_t i = 0; i < n; ++i) {
      double norm = 0.0;
      for (size_t c = 0; c < dim; ++c) norm += m[i * dim + c] * m[i * dim + c];
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      for (size_t c = 0; c < dim; ++c) m[i * dim + c] /= norm;
    }
  };
  unit_rows();
  if (n > 0) {
    std::vector<double> centroid(dim, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t c = 0; c < dim; ++c) centroid[c] += m[i * dim + c];
    for (double& v : centroid) v /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i)
      for (size_t c = 0; c < dim; ++c) m[i * dim + c] -= centroid[c];
  }
  unit_rows();
  EmbeddingTable out(dim, table.oov_policy(), table.oov_seed());
  for (size_t i = 0; i < n; ++i) {
    out.add(table.tokens()[i], std::span<const double>(m).subspan(i * dim, dim));
  }
  return out;
}

Alignment procrustes_align(const EmbeddingTable& source, const EmbeddingTable& target,
                           const BilingualDictionary& dictionary) {
  if (source.dim() != target.dim()) {
    throw DimensionError("cannot align embeddings of width " +
                         std::to_string(source.dim()) + " and " +
                         std::to_string(target.dim()));
  }
  const size_t dim = source.dim();
  EmbeddingTable src = normalize_embeddings(source);
  EmbeddingTable tgt = normalize_embeddings(target);

  std::vector<double> x;
  std::vector<double> y;
  size_t used = 0;
  for (const auto& [s, t] : dictionary.pairs) {
    auto si = src.index(s);
    auto ti = tgt.index(t);
    if (!si || !ti) continue;
    auto xs = src.row(*si);
    auto ys = tgt.row(*ti);
    x.insert(x.end(), xs.begin(), xs.end());
    y.insert(y.end(), ys.begin(), ys.end());
    ++used;
  }
  if (used < 2) {
    throw DataError("alignment needs at least 2 dictionary pairs present in both "
                    "tables, found " + std::to_string(used));
  }
  Tensor xm = Tensor::from({used, dim}, std::move(x));
  Tensor ym = Tensor::from({used, dim}, std::move(y));
  Svd svd = svd_small(matmul(transpose(xm), ym));
  Alignment result{matmul(svd.u, svd.vt), EmbeddingTable(dim, source.oov_policy(),
                                                         source.oov_seed()),
                   used, 0.0, 0.0};

  auto sq_dist = [](const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
  };
  result.distance_identity = sq_dist(xm, ym);
  result.distance_mapped = sq_dist(matmul(xm, result.mapping), ym);

  if (src.size() > 0) {
    Tensor all = Tensor::from({src.size(), dim},
                              std::vector<double>(src.matrix().begin(), src.matrix().end()));
    Tensor mapped = matmul(all, result.mapping);
    for (size_t i = 0; i < src.size(); ++i) {
      result.mapped_source.add(src.tokens()[i], mapped.data().subspan(i * dim, dim));
    }
  }
  return result;
}

}  // namespace mtx
