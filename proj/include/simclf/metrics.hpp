#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "simclf/contrastive.hpp"
#include "simclf/corpus.hpp"
#include "simclf/encoder.hpp"

namespace simclf {

struct ScoredPair {
  double score = 0.0;
  bool similar = false;
};

// Mann-Whitney estimate P(score+ > score-) + P(tie)/2 via average ranks.
double roc_auc(std::span<const ScoredPair> pairs);

// A query plus candidates of which exactly one (`relevant`) shares the
// query's group.
struct EvalPool {
  FunctionInstance query;
  std::vector<FunctionInstance> candidates;
  std::size_t relevant = 0;

  std::size_t pool_size() const { return candidates.size(); }
  void validate() const;
};

using EmbeddingProvider = std::function<Embedding(const FunctionInstance&)>;

// 1-based rank of the relevant candidate by descending cosine similarity to
// the query; ties keep candidate order.
std::size_t relevant_rank(const EvalPool& pool, const EmbeddingProvider& embed);

double mrr(const std::vector<EvalPool>& pools, const EmbeddingProvider& embed);
double recall_at_1(const std::vector<EvalPool>& pools, const EmbeddingProvider& embed);

// Mean Euclidean distance between the members of each positive pair.
double alignment(const std::vector<std::pair<Embedding, Embedding>>& positives);

// log of the mean Gaussian potential exp(-2 |x - y|^2) over unordered
// distinct pairs. Inputs larger than `max_points` are subsampled with `seed`.
double uniformity(const std::vector<Embedding>& embeddings, std::size_t max_points = 2000,
                  std::uint64_t seed = 0);

struct SimilarityHistogram {
  double bucket_width = 0.1;
  std::vector<std::int64_t> similar;
  std::vector<std::int64_t> dissimilar;

  std::size_t buckets() const { return similar.size(); }
  double lower_edge(std::size_t bucket) const { return -1.0 + bucket_width * bucket; }
  // Fraction of a class's mass in buckets whose lower edge is >= threshold.
  double mass_at_or_above(bool similar_class, double threshold) const;
};

// Buckets [-1 + k w, -1 + (k+1) w) covering [-1, 1]; out-of-range scores are
// clamped into the end buckets.
SimilarityHistogram similarity_histogram(std::span<const ScoredPair> pairs, double bucket_width);

struct Rank2Projection {
  std::vector<Eigen::Vector2d> coordinates;
  Eigen::VectorXd mean;
  Eigen::Matrix<double, 2, Eigen::Dynamic> components;  // orthonormal rows
  std::array<double, 2> singular_values{};

  // mean + coordinates * components, one row per input.
  Eigen::MatrixXd reconstruct() const;
};

// Column-centres the embedding matrix and projects onto its top two right
// singular vectors, found by power iteration with deflation. All-identical
// inputs give all-zero coordinates.
Rank2Projection svd_rank2(const std::vector<Embedding>& embeddings);

struct LossTerms {
  double positive = 0.0;  // mean of -sim(anchor, positive) / tau
  double negative = 0.0;  // mean of log sum_{k != anchor} exp(sim / tau)
  double total() const { return positive + negative; }
};

// The two addends of the NT-Xent loss, averaged over both directions of every
// pair. positive + negative == nt_xent_loss.
LossTerms loss_decomposition(const std::vector<Embedding>& embeddings, double tau);
LossTerms loss_decomposition(const SimMatrix& sims, double tau);

}  // namespace simclf
