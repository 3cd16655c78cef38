#include "simclf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simclf/contrastive.hpp"
#include "simclf/errors.hpp"
#include "simclf/index.hpp"

namespace simclf {

GroupSplit split_groups(const std::vector<FunctionGroup>& groups, double holdout,
                        std::uint64_t seed) {
  if (!(holdout >= 0.0 && holdout < 1.0)) throw InputError("holdout must lie in [0, 1)");
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto test_count =
      static_cast<std::size_t>(std::llround(holdout * static_cast<double>(groups.size())));
  std::vector<bool> is_test(groups.size(), false);
  for (std::size_t i = 0; i < test_count; ++i) is_test[order[i]] = true;
  GroupSplit split;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    (is_test[g] ? split.test : split.train).push_back(groups[g]);
  }
  return split;
}

std::vector<LabeledPair> make_eval_pairs(const std::vector<FunctionGroup>& groups,
                                         std::size_t per_group, Rng& rng) {
  std::vector<std::size_t> nonempty;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!groups[g].members.empty()) nonempty.push_back(g);
  }
  if (nonempty.size() < 2) throw InputError("evaluation needs at least 2 groups");
  std::vector<LabeledPair> pairs;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!groups[g].pair_eligible()) continue;
    for (std::size_t i = 0; i < per_group; ++i) {
      const auto pos = sample_positive_pair(groups[g], rng);
      pairs.push_back({pos.first, pos.second, true});

      std::uniform_int_distribution<std::size_t> pick_group(0, nonempty.size() - 1);
      std::size_t other = g;
      while (other == g) other = nonempty[pick_group(rng)];
      const auto& members = groups[other].members;
      std::uniform_int_distribution<std::size_t> pick_member(0, members.size() - 1);
      pairs.push_back({pos.first, &members[pick_member(rng)], false});
    }
  }
  if (pairs.empty()) throw InputError("no pair-eligible groups to evaluate");
  return pairs;
}

const Embedding& EmbeddingCache::get(const FunctionInstance& instance) {
  auto it = cache_.find(instance.instance_id);
  if (it == cache_.end()) {
    it = cache_.emplace(instance.instance_id, encode(params_, instance.tokens, Stage::kEvaluation))
             .first;
  }
  return it->second;
}

EmbeddingProvider EmbeddingCache::provider() {
  return [this](const FunctionInstance& instance) { return get(instance); };
}

namespace {

std::vector<ScoredPair> score_pairs(const std::vector<LabeledPair>& pairs,
                                    EmbeddingCache& cache) {
  std::vector<ScoredPair> scored;
  scored.reserve(pairs.size());
  for (const auto& p : pairs) {
    scored.push_back({cosine_sim(cache.get(*p.first), cache.get(*p.second)), p.similar});
  }
  return scored;
}

}  // namespace

EvalReport evaluate(const EncoderParams& params, const std::vector<FunctionGroup>& groups,
                    const EvalOptions& options) {
  EvalReport report;
  EmbeddingCache cache(params);
  Rng rng(options.seed);

  const auto pairs = make_eval_pairs(groups, options.pairs_per_group, rng);
  report.scored = score_pairs(pairs, cache);
  report.auc = roc_auc(report.scored);
  report.histogram = similarity_histogram(report.scored, options.bucket_width);

  std::vector<std::pair<Embedding, Embedding>> positives;
  for (const auto& p : pairs) {
    if (p.similar) positives.emplace_back(cache.get(*p.first), cache.get(*p.second));
  }
  report.alignment = alignment(positives);

  for (const auto size : options.pool_sizes) {
    const auto pools = make_pools(groups, size, rng);
    auto provider = cache.provider();
    report.pools[size] = {pools.size(), mrr(pools, provider), recall_at_1(pools, provider)};
  }

  std::vector<Embedding> all;
  for (const auto& g : groups) {
    for (const auto& m : g.members) {
      report.ids.push_back(m.instance_id);
      all.push_back(cache.get(m));
    }
  }
  report.groups = groups.size();
  report.instances = all.size();
  report.uniformity = uniformity(all, 2000, options.seed);
  report.svd = svd_rank2(all);
  return report;
}

double pair_auc(const EncoderParams& params, const std::vector<FunctionGroup>& groups,
                std::uint64_t seed, std::size_t per_group) {
  EmbeddingCache cache(params);
  Rng rng(seed);
  return roc_auc(score_pairs(make_eval_pairs(groups, per_group, rng), cache));
}

std::vector<FunctionGroup> nested_pairs(const std::vector<FunctionGroup>& groups,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> per_group;
  std::vector<std::size_t> eligible;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!groups[g].pair_eligible()) continue;
    eligible.push_back(g);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const auto n = groups[g].members.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    per_group.push_back(std::move(pairs));
  }
  std::vector<std::size_t> order(eligible.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<FunctionGroup> out;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (const auto idx : order) {
      if (round >= per_group[idx].size()) continue;
      any = true;
      const auto& src = groups[eligible[idx]];
      const auto [a, b] = per_group[idx][round];
      FunctionGroup pair;
      pair.group_id = src.group_id + "#" + std::to_string(round);
      pair.members = {src.members[a], src.members[b]};
      out.push_back(std::move(pair));
    }
    if (!any) break;
  }
  return out;
}

std::vector<FewShotRow> few_shot(const EncoderParams& initial,
                                 const std::vector<FunctionGroup>& train,
                                 const std::vector<FunctionGroup>& test,
                                 const TrainConfig& config, const std::vector<std::size_t>& sizes,
                                 std::uint64_t seed, const ProbeSet* probe,
                                 const EpochCallback& on_epoch) {
  const auto pairs = nested_pairs(train, seed);
  for (const auto n : sizes) {
    if (n > pairs.size()) {
      throw InputError("few-shot size " + std::to_string(n) + " exceeds the " +
                       std::to_string(pairs.size()) + " available training pairs");
    }
  }
  std::vector<FewShotRow> rows;
  for (const auto n : sizes) {
    if (n == 0) {
      rows.push_back({0, pair_auc(initial, test, seed)});
      continue;
    }
    const std::vector<FunctionGroup> subset(pairs.begin(),
                                            pairs.begin() + static_cast<std::ptrdiff_t>(n));
    TrainConfig cfg = config;
    cfg.batch_size = std::min(cfg.batch_size, n);
    cfg.pair_source = PairSource::kCorpus;
    const auto trained = train_from(initial, subset, cfg, probe, nullptr, on_epoch);
    rows.push_back({n, pair_auc(trained.params, test, seed)});
  }
  return rows;
}

}  // namespace simclf

