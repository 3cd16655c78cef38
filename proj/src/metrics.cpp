#include "simclf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>

#include "simclf/errors.hpp"

namespace simclf {

double roc_auc(std::span<const ScoredPair> pairs) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pairs[a].score < pairs[b].score; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    if (!std::isfinite(pairs[order[i]].score)) throw InputError("roc_auc: non-finite score");
    std::size_t j = i;
    while (j < order.size() && pairs[order[j]].score == pairs[order[i]].score) ++j;
    // Tied block [i, j) shares the average of ranks i+1 .. j.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (pairs[order[k]].similar) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = pairs.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw InputError("roc_auc needs both similar and dissimilar pairs");
  }
  const double np = static_cast<double>(positives);
  const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(negatives));
}

void EvalPool::validate() const {
  if (candidates.empty()) throw InputError("pool has no candidates");
  if (relevant >= candidates.size()) throw InputError("relevant index outside the pool");
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.instance_id == query.instance_id) throw InputError("query appears among candidates");
    if (!ids.insert(c.instance_id).second) {
      throw InputError("duplicate candidate '" + c.instance_id + "'");
    }
    const bool same_group = c.group_id == query.group_id;
    if (same_group != (i == relevant)) {
      throw InputError("pool must contain exactly one candidate from the query's group");
    }
  }
}

std::size_t relevant_rank(const EvalPool& pool, const EmbeddingProvider& embed) {
  const Embedding q = embed(pool.query);
  std::vector<double> scores;
  scores.reserve(pool.candidates.size());
  for (const auto& c : pool.candidates) scores.push_back(cosine_sim(q, embed(c)));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto pos = std::find(order.begin(), order.end(), pool.relevant) - order.begin();
  return static_cast<std::size_t>(pos) + 1;
}

namespace {

template <typename PerPool>
double mean_over_pools(const std::vector<EvalPool>& pools, const EmbeddingProvider& embed,
                       PerPool per_pool) {
  if (pools.empty()) throw InputError("no evaluation pools");
  double total = 0.0;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    try {
      pools[i].validate();
    } catch (const InputError& e) {
      throw InputError("pool " + std::to_string(i) + ": " + e.what());
    }
    total += per_pool(relevant_rank(pools[i], embed));
  }
  return total / static_cast<double>(pools.size());
}

}  // namespace

double mrr(const std::vector<EvalPool>& pools, const EmbeddingProvider& embed) {
  return mean_over_pools(pools, embed,
                         [](std::size_t rank) { return 1.0 / static_cast<double>(rank); });
}

double recall_at_1(const std::vector<EvalPool>& pools, const EmbeddingProvider& embed) {
  return mean_over_pools(pools, embed, [](std::size_t rank) { return rank == 1 ? 1.0 : 0.0; });
}

double alignment(const std::vector<std::pair<Embedding, Embedding>>& positives) {
  if (positives.empty()) throw InputError("alignment of an empty pair set");
  double total = 0.0;
  for (const auto& [a, b] : positives) total += (a - b).norm();
  return total / static_cast<double>(positives.size());
}

double uniformity(const std::vector<Embedding>& embeddings, std::size_t max_points,
                  std::uint64_t seed) {
  if (embeddings.size() < 2) throw InputError("uniformity needs at least 2 embeddings");
  std::vector<std::size_t> idx(embeddings.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (max_points >= 2 && idx.size() > max_points) {
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_points);
    std::sort(idx.begin(), idx.end());
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      total += std::exp(-2.0 * (embeddings[idx[i]] - embeddings[idx[j]]).squaredNorm());
      ++pairs;
    }
  }
  return std::log(total / static_cast<double>(pairs));
}

double SimilarityHistogram::mass_at_or_above(bool similar_class, double threshold) const {
  const auto& counts = similar_class ? similar : dissimilar;
  std::int64_t total = 0;
  std::int64_t above = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    total += counts[b];
    if (lower_edge(b) >= threshold - 1e-12) above += counts[b];
  }
  return total == 0 ? 0.0 : static_cast<double>(above) / static_cast<double>(total);
}

SimilarityHistogram similarity_histogram(std::span<const ScoredPair> pairs, double bucket_width) {
  if (!(bucket_width > 0.0)) throw InputError("bucket_width must be positive");
  SimilarityHistogram h;
  h.bucket_width = bucket_width;
  const auto buckets = static_cast<std::size_t>(std::ceil(2.0 / bucket_width - 1e-9));
  h.similar.assign(buckets, 0);
  h.dissimilar.assign(buckets, 0);
  for (const auto& p : pairs) {
    // The epsilon keeps scores that sit exactly on an edge in the upper bucket.
    const double pos = std::floor((p.score + 1.0) / bucket_width + 1e-9);
    const auto b = static_cast<std::size_t>(
        std::clamp(pos, 0.0, static_cast<double>(buckets - 1)));
    (p.similar ? h.similar : h.dissimilar)[b] += 1;
  }
  return h;
}

Eigen::MatrixXd Rank2Projection::reconstruct() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(coordinates.size()), mean.size());
  for (std::size_t i = 0; i < coordinates.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        mean.transpose() + coordinates[i].transpose() * components;
  }
  return out;
}

namespace {

constexpr double kPowerTolerance = 1e-9;
constexpr int kPowerMaxIterations = 10000;

// Dominant eigenpair of the PSD matrix `c` restricted to the complement of
// `exclude` (if non-empty).
std::pair<double, Eigen::VectorXd> power_iteration(const Eigen::MatrixXd& c,
                                                   const Eigen::VectorXd& exclude, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(c.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  auto project = [&](Eigen::VectorXd& x) {
    if (exclude.size() != 0) x -= exclude * exclude.dot(x);
  };
  project(v);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < kPowerMaxIterations; ++it) {
    Eigen::VectorXd w = c * v;
    project(w);
    lambda = w.norm();
    if (lambda <= 0.0) return {0.0, v};
    w /= lambda;
    const double change = (w - v).norm();
    v = std::move(w);
    if (change < kPowerTolerance) break;
  }
  return {v.dot(c * v), v};
}

}  // namespace

Rank2Projection svd_rank2(const std::vector<Embedding>& embeddings) {
  if (embeddings.size() < 2) throw InputError("svd_rank2 needs at least 2 embeddings");
  const auto dim = embeddings.front().size();
  if (dim < 2) throw InputError("svd_rank2 needs dimension >= 2");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(embeddings.size()), dim);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].size() != dim) throw InputError("embeddings differ in dimension");
    x.row(static_cast<Eigen::Index>(i)) = embeddings[i].transpose();
  }

  Rank2Projection out;
  out.mean = x.colwise().mean().transpose();
  x.rowwise() -= out.mean.transpose();
  out.components.setZero(2, dim);
  out.coordinates.assign(embeddings.size(), Eigen::Vector2d::Zero());

  const Eigen::MatrixXd gram = x.transpose() * x;
  const double scale = gram.cwiseAbs().maxCoeff();
  if (scale == 0.0) return out;

  Rng rng(0x5eed);
  auto [l1, v1] = power_iteration(gram, Eigen::VectorXd(), rng);
  auto [l2, v2] = power_iteration(gram, v1, rng);
  // Drop components that are numerically zero.
  const double floor = 1e-12 * scale;
  out.singular_values = {std::sqrt(std::max(l1, 0.0)), std::sqrt(std::max(l2, 0.0))};
  out.components.row(0) = v1.transpose();
  out.components.row(1) = v2.transpose();
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const auto row = x.row(static_cast<Eigen::Index>(i));
    out.coordinates[i] = {l1 > floor ? row.dot(v1) : 0.0, l2 > floor ? row.dot(v2) : 0.0};
  }
  return out;
}

LossTerms loss_decomposition(const SimMatrix& sims, double tau) {
  // Validates shape and temperature.
  nt_xent_from_similarities(sims, tau);
  const Eigen::Index n = sims.rows();
  LossTerms terms;
  for (Eigen::Index a = 0; a < n; ++a) {
    double mx = -INFINITY;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k != a) mx = std::max(mx, sims(a, k) / tau);
    }
    double sum = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k != a) sum += std::exp(sims(a, k) / tau - mx);
    }
    terms.positive -= sims(a, a ^ 1) / tau;
    terms.negative += mx + std::log(sum);
  }
  terms.positive /= static_cast<double>(n);
  terms.negative /= static_cast<double>(n);
  return terms;
}

LossTerms loss_decomposition(const std::vector<Embedding>& embeddings, double tau) {
  return loss_decomposition(similarity_matrix(embeddings), tau);
}

}  // namespace simclf
