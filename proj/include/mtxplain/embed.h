#ifndef MTXPLAIN_EMBED_H_
#define MTXPLAIN_EMBED_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mtxplain/ops.h"
#include "mtxplain/tensor.h"

namespace mtx {

enum class OovPolicy { kZeros, kRandom };

OovPolicy parse_oov_policy(const std::string& name);
std::string oov_policy_name(OovPolicy policy);

// Token -> fixed-width vector. Read-only once populated.
class EmbeddingTable {
 public:
  EmbeddingTable(size_t dim, OovPolicy oov = OovPolicy::kRandom,
                 uint64_t oov_seed = 0);

  // Returns false (and stores nothing) for a duplicate token.
  bool add(const std::string& token, std::span<const double> vector);

  size_t dim() const { return dim_; }
  size_t size() const { return tokens_.size(); }
  OovPolicy oov_policy() const { return oov_; }
  uint64_t oov_seed() const { return oov_seed_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::span<const double> matrix() const { return matrix_; }

  std::optional<size_t> index(const std::string& token) const;
  std::span<const double> row(size_t i) const;
  // Known tokens return their row; unknown ones follow the OOV policy.
  // Random OOV vectors depend only on (seed, token).
  std::vector<double> lookup(const std::string& token) const;

 private:
  size_t dim_;
  OovPolicy oov_;
  uint64_t oov_seed_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<double> matrix_;
};

struct LoadReport {
  size_t loaded = 0;
  // Lines dropped for a wrong value count or a repeated token.
  size_t skipped_lines = 0;
};

// Reads the "count dim" header text format used by fastText .vec files.
// Throws FormatError when the file is missing, the header is malformed, or
// more than half of the vector lines are unusable.
EmbeddingTable load_embeddings(const std::string& path,
                               std::optional<size_t> limit = std::nullopt,
                               LoadReport* report = nullptr,
                               OovPolicy oov = OovPolicy::kRandom,
                               uint64_t oov_seed = 0);

void save_embeddings(const EmbeddingTable& table, const std::string& path);

struct EmbeddedSequence {
  Tensor values;  // N x dim
  Mask mask;      // N entries
  // True when no real token was present; values and mask are all zero.
  bool empty = false;
};

// Looks up the first n tokens and zero-pads to n rows.
EmbeddedSequence embed_sequence(const EmbeddingTable& table,
                                std::span<const std::string> tokens, size_t n);

// Per-example precomputed contextual vectors, keyed by example id.
class ContextualStore {
 public:
  size_t dim() const { return dim_; }
  size_t size() const { return vectors_.size(); }
  bool contains(const std::string& id) const { return vectors_.count(id) != 0; }
  void add(const std::string& id, std::vector<std::vector<double>> rows);
  EmbeddedSequence embed(const std::string& id, size_t n) const;

 private:
  size_t dim_ = 0;
  std::map<std::string, std::vector<std::vector<double>>> vectors_;
};

// JSON lines: {"id": "...", "vectors": [[...], ...]}.
ContextualStore load_contextual(const std::string& path);

struct BilingualDictionary {
  std::vector<std::pair<std::string, std::string>> pairs;
};

// One "source target" pair per line; blank lines and '#' comments ignored.
BilingualDictionary load_dictionary(const std::string& path);

// Unit-length rows, then mean-centered, then unit-length again.
EmbeddingTable normalize_embeddings(const EmbeddingTable& table);

struct Alignment {
  Tensor mapping;                // dim x dim orthogonal W, applied as x * W
  EmbeddingTable mapped_source;  // normalized source rows times W
  size_t pairs_used = 0;
  // Sum of squared pair distances on the normalized pairs.
  double distance_identity = 0.0;
  double distance_mapped = 0.0;
};

// Orthogonal Procrustes: W = U V^T from the SVD of X^T Y, where X and Y are
// the normalized source/target rows of the dictionary pairs found in both
// tables. Throws DataError with fewer than two usable pairs and
// DimensionError when the table widths differ.
Alignment procrustes_align(const EmbeddingTable& source,
                           const EmbeddingTable& target,
                           const BilingualDictionary& dictionary);

}  // namespace mtx

#endif  // MTXPLAIN_EMBED_H_
