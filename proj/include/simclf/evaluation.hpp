#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "simclf/corpus.hpp"
#include "simclf/encoder.hpp"
#include "simclf/metrics.hpp"
#include "simclf/trainer.hpp"

namespace simclf {

struct GroupSplit {
  std::vector<FunctionGroup> train;
  std::vector<FunctionGroup> test;
};

// Seeded shuffle of whole groups; round(holdout * n) groups go to `test`.
// Group order inside each side follows the input.
GroupSplit split_groups(const std::vector<FunctionGroup>& groups, double holdout,
                        std::uint64_t seed);

struct LabeledPair {
  const FunctionInstance* first = nullptr;
  const FunctionInstance* second = nullptr;
  bool similar = false;
};

// For every pair-eligible group, `per_group` positive pairs and as many
// negatives pairing one of its variants with a variant of another group.
std::vector<LabeledPair> make_eval_pairs(const std::vector<FunctionGroup>& groups,
                                         std::size_t per_group, Rng& rng);

// Evaluation-stage embeddings, computed once per instance id.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(const EncoderParams& params) : params_(params) {}

  const Embedding& get(const FunctionInstance& instance);
  EmbeddingProvider provider();

 private:
  const EncoderParams& params_;
  std::unordered_map<std::string, Embedding> cache_;
};

struct EvalOptions {
  std::vector<std::size_t> pool_sizes = {32};
  std::size_t pairs_per_group = 2;
  std::uint64_t seed = 0;
  double bucket_width = 0.1;
};

struct PoolScores {
  std::size_t pools = 0;
  double mrr = 0.0;
  double recall_at_1 = 0.0;
};

struct EvalReport {
  double auc = 0.0;
  double alignment = 0.0;
  double uniformity = 0.0;
  std::map<std::size_t, PoolScores> pools;  // by pool size
  std::size_t groups = 0;
  std::size_t instances = 0;
  std::vector<ScoredPair> scored;
  SimilarityHistogram histogram;
  std::vector<std::string> ids;  // one per embedding, same order as svd
  Rank2Projection svd;
};

// AUC over make_eval_pairs, MRR / Recall@1 per pool size, alignment over the
// positive pairs, uniformity over every instance, histogram and rank-2
// projection.
EvalReport evaluate(const EncoderParams& params, const std::vector<FunctionGroup>& groups,
                    const EvalOptions& options);

// Just the pair AUC of evaluate().
double pair_auc(const EncoderParams& params, const std::vector<FunctionGroup>& groups,
                std::uint64_t seed, std::size_t per_group = 2);

// Every unordered variant pair of every pair-eligible group as a 2-member
// pseudo-group "<group>#<round>". Round r holds the r-th (shuffled) pair of
// each group, so each prefix spreads over as many groups as possible.
std::vector<FunctionGroup> nested_pairs(const std::vector<FunctionGroup>& groups,
                                        std::uint64_t seed);

struct FewShotRow {
  std::size_t pairs = 0;
  double auc = 0.0;
};

// Fine-tunes `initial` on each prefix of nested_pairs(train, seed) and scores
// pair AUC on `test`. Size 0 scores `initial` itself. Batch size is capped at
// the prefix length.
std::vector<FewShotRow> few_shot(const EncoderParams& initial,
                                 const std::vector<FunctionGroup>& train,
                                 const std::vector<FunctionGroup>& test,
                                 const TrainConfig& config, const std::vector<std::size_t>& sizes,
                                 std::uint64_t seed, const ProbeSet* probe = nullptr,
                                 const EpochCallback& on_epoch = {});

}  // namespace simclf
