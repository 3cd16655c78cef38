#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "simclf/corpus.hpp"
#include "simclf/encoder.hpp"
#include "simclf/metrics.hpp"

namespace simclf {

struct SearchHit {
  std::string instance_id;
  double score = 0.0;
};

// Descending score; equal scores ordered by id.
using SearchResult = std::vector<SearchHit>;

// Exact cosine index over unit-norm embeddings. Rows are kept in id order,
// which makes results independent of insertion order.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;

  // Throws InputError on a duplicate id, a dimension mismatch or a row whose
  // norm is off by more than 1e-4. Accepted rows are stored renormalized.
  static EmbeddingIndex build(std::vector<std::pair<std::string, Embedding>> entries);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(rows_.cols()); }
  bool contains(std::string_view id) const;
  Embedding embedding(std::string_view id) const;
  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::MatrixXd& rows() const { return rows_; }

  // Exact scan. `exclude`, when set, is left out of the ranking.
  SearchResult top_k(const Embedding& query, std::size_t k,
                     std::string_view exclude = {}) const;

  std::string serialize() const;
  static EmbeddingIndex deserialize(std::string_view bytes);

 private:
  std::size_t row_of(std::string_view id) const;

  std::vector<std::string> ids_;
  Eigen::MatrixXd rows_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

inline constexpr std::uint32_t kIndexVersion = 1;

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path);
EmbeddingIndex load_index(const std::filesystem::path& path);

struct VulnerableGroup {
  std::string name;
  std::vector<std::string> ids;  // k = ids.size()
};

struct VulnerabilityRow {
  std::string name;
  std::size_t k = 0;
  std::vector<std::size_t> found;  // per query, group members within its top k
  double recall() const;           // mean of found / k
  bool complete() const;           // every query found all k
};

// Each vulnerable function queries the index; the query itself counts when it
// lands in its own top k.
std::vector<VulnerabilityRow> vulnerability_search(const EmbeddingIndex& index,
                                                   const std::vector<VulnerableGroup>& groups);

// One pool per pair-eligible group: a query variant, a different variant of
// the same group, and pool_size - 1 distractors from distinct other groups,
// shuffled.
std::vector<EvalPool> make_pools(const std::vector<FunctionGroup>& groups, std::size_t pool_size,
                                 Rng& rng);

}  // namespace simclf
