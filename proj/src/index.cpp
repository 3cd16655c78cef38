#include "simclf/index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "simclf/errors.hpp"
#include "simclf/io.hpp"

namespace simclf {
namespace {

constexpr std::string_view kIndexMagic = "SIDX";
constexpr double kNormTolerance = 1e-4;

}  // namespace

EmbeddingIndex EmbeddingIndex::build(std::vector<std::pair<std::string, Embedding>> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  EmbeddingIndex index;
  if (entries.empty()) return index;
  const auto dim = entries.front().second.size();
  index.rows_.resize(static_cast<Eigen::Index>(entries.size()), dim);
  index.ids_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& [id, emb] = entries[i];
    if (!index.ids_.empty() && index.ids_.back() == id) throw InputError("duplicate index id '" + id + "'");
    if (emb.size() != dim) throw InputError("embedding for '" + id + "' differs in dimension");
    if (std::abs(emb.norm() - 1.0) > kNormTolerance) {
      throw InputError("embedding for '" + id + "' is not unit norm");
    }
    index.rows_.row(static_cast<Eigen::Index>(i)) = emb.normalized().transpose();
    index.lookup_.emplace(id, i);
    index.ids_.push_back(std::move(id));
  }
  return index;
}

bool EmbeddingIndex::contains(std::string_view id) const {
  return lookup_.count(std::string(id)) != 0;
}

std::size_t EmbeddingIndex::row_of(std::string_view id) const {
  const auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) throw InputError("id '" + std::string(id) + "' is not in the index");
  return it->second;
}

Embedding EmbeddingIndex::embedding(std::string_view id) const {
  return rows_.row(static_cast<Eigen::Index>(row_of(id))).transpose();
}

SearchResult EmbeddingIndex::top_k(const Embedding& query, std::size_t k,
                                   std::string_view exclude) const {
  if (k == 0) throw InputError("k must be >= 1");
  if (ids_.empty()) return {};
  if (static_cast<Eigen::Index>(query.size()) != rows_.cols()) {
    throw InputError("query dimension does not match the index");
  }
  const double norm = query.norm();
  if (norm == 0.0) throw InputError("query is a zero vector");
  const Eigen::VectorXd scores = rows_ * (query / norm);

  std::vector<std::size_t> order;
  order.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (exclude.empty() || ids_[i] != exclude) order.push_back(i);
  }
  const std::size_t take = std::min(k, order.size());
  // Rows are in id order, so the index breaks ties by id.
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double sa = scores(static_cast<Eigen::Index>(a));
                      const double sb = scores(static_cast<Eigen::Index>(b));
                      return sa != sb ? sa > sb : a < b;
                    });
  SearchResult out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back({ids_[order[i]], scores(static_cast<Eigen::Index>(order[i]))});
  }
  return out;
}

std::string EmbeddingIndex::serialize() const {
  ByteWriter w;
  w.bytes(kIndexMagic);
  w.u32(kIndexVersion);
  w.u64(ids_.size());
  w.u64(static_cast<std::uint64_t>(rows_.cols()));
  for (const auto& id : ids_) w.str(id);
  for (Eigen::Index r = 0; r < rows_.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows_.cols(); ++c) w.f64(rows_(r, c));
  }
  return w.data();
}

EmbeddingIndex EmbeddingIndex::deserialize(std::string_view bytes) {
  if (bytes.substr(0, kIndexMagic.size()) != kIndexMagic) throw MismatchError("not an index");
  ByteReader r(bytes, "index");
  r.bytes(kIndexMagic.size());
  const auto version = r.u32();
  if (version != kIndexVersion) {
    throw MismatchError("unsupported index version " + std::to_string(version) +
                        " (reader supports " + std::to_string(kIndexVersion) + ")");
  }
  const auto count = r.u64();
  const auto dim = r.u64();
  if (count > bytes.size() || (count != 0 && dim > bytes.size() / 8 / count)) {
    throw MismatchError("index is truncated");
  }
  std::vector<std::pair<std::string, Embedding>> entries(count);
  for (auto& e : entries) e.first = r.str();
  for (auto& e : entries) {
    e.second.resize(static_cast<Eigen::Index>(dim));
    for (std::uint64_t c = 0; c < dim; ++c) e.second(static_cast<Eigen::Index>(c)) = r.f64();
  }
  if (!r.done()) throw MismatchError("index has trailing bytes");
  try {
    return build(std::move(entries));
  } catch (const InputError& e) {
    throw MismatchError(std::string("index is inconsistent: ") + e.what());
  }
}

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
  write_file_atomic(path, index.serialize());
}

EmbeddingIndex load_index(const std::filesystem::path& path) {
  return EmbeddingIndex::deserialize(read_file(path));
}

double VulnerabilityRow::recall() const {
  if (found.empty() || k == 0) return 0.0;
  double total = 0.0;
  for (const auto f : found) total += static_cast<double>(f) / static_cast<double>(k);
  return total / static_cast<double>(found.size());
}

bool VulnerabilityRow::complete() const {
  return std::all_of(found.begin(), found.end(), [&](std::size_t f) { return f == k; });
}

std::vector<VulnerabilityRow> vulnerability_search(const EmbeddingIndex& index,
                                                   const std::vector<VulnerableGroup>& groups) {
  std::vector<VulnerabilityRow> rows;
  rows.reserve(groups.size());
  for (const auto& group : groups) {
    if (group.ids.empty()) throw InputError("vulnerable group '" + group.name + "' is empty");
    VulnerabilityRow row;
    row.name = group.name;
    row.k = group.ids.size();
    const std::unordered_set<std::string> members(group.ids.begin(), group.ids.end());
    for (const auto& id : group.ids) {
      if (!index.contains(id)) {
        throw InputError("query id '" + id + "' of group '" + group.name + "' is not indexed");
      }
      const auto hits = index.top_k(index.embedding(id), row.k);
      row.found.push_back(static_cast<std::size_t>(std::count_if(
          hits.begin(), hits.end(), [&](const SearchHit& h) { return members.count(h.instance_id); })));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<EvalPool> make_pools(const std::vector<FunctionGroup>& groups, std::size_t pool_size,
                                 Rng& rng) {
  if (pool_size < 2) throw InputError("pool_size must be >= 2");
  std::vector<std::size_t> nonempty;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!groups[g].members.empty()) nonempty.push_back(g);
  }
  if (nonempty.size() < pool_size) {
    throw InputError("pool_size " + std::to_string(pool_size) + " needs that many groups, have " +
                     std::to_string(nonempty.size()));
  }

  std::vector<EvalPool> pools;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    if (!group.pair_eligible()) continue;
    const auto pair = sample_positive_pair(group, rng);

    std::vector<std::size_t> others;
    others.reserve(nonempty.size() - 1);
    for (const auto o : nonempty) {
      if (o != g) others.push_back(o);
    }
    // Partial Fisher-Yates: the first pool_size - 1 entries become a uniform
    // sample without replacement.
    for (std::size_t i = 0; i + 1 < pool_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, others.size() - 1);
      std::swap(others[i], others[pick(rng)]);
    }

    EvalPool pool;
    pool.query = *pair.first;
    pool.candidates.push_back(*pair.second);
    for (std::size_t i = 0; i + 1 < pool_size; ++i) {
      const auto& members = groups[others[i]].members;
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      pool.candidates.push_back(members[pick(rng)]);
    }
    std::vector<std::size_t> perm(pool.candidates.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<FunctionInstance> shuffled;
    shuffled.reserve(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      if (perm[i] == 0) pool.relevant = i;
      shuffled.push_back(std::move(pool.candidates[perm[i]]));
    }
    pool.candidates = std::move(shuffled);
    pools.push_back(std::move(pool));
  }
  if (pools.empty()) throw InputError("no pair-eligible groups to build pools from");
  return pools;
}

}  // namespace simclf
