#include "simclf/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "simclf/contrastive.hpp"
#include "simclf/errors.hpp"
#include "simclf/metrics.hpp"

namespace simclf {

std::string_view to_string(PairSource source) {
  return source == PairSource::kAugment ? "augment" : "corpus";
}

PairSource parse_pair_source(std::string_view name) {
  if (name == "corpus") return PairSource::kCorpus;
  if (name == "augment") return PairSource::kAugment;
  throw InputError("unknown pair source '" + std::string(name) + "' (expected corpus|augment)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (!(temperature > 0.0)) {
    throw InputError("temperature must be positive, got " + std::to_string(temperature));
  }
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw InputError("weight_decay must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InputError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InputError("adam_eps must be positive");
  augment.validate();
}

AdamConfig TrainConfig::adam() const {
  return {learning_rate, weight_decay, adam_beta1, adam_beta2, adam_eps};
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& value, const std::string& key) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw InputError("bad value '" + value + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw InputError("bad value '" + value + "' for " + key + " (expected true|false)");
}

}  // namespace

void apply_config_file(std::istream& in, TrainConfig& train, EncoderConfig& encoder) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    try {
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) throw InputError("expected key=value");
      const std::string key = trim(std::string_view(stripped).substr(0, eq));
      const std::string value = trim(std::string_view(stripped).substr(eq + 1));
      if (key == "batch_size") {
        train.batch_size = parse_number<std::size_t>(value, key);
      } else if (key == "temperature") {
        train.temperature = parse_number<double>(value, key);
      } else if (key == "epochs") {
        train.epochs = parse_number<std::size_t>(value, key);
      } else if (key == "learning_rate") {
        train.learning_rate = parse_number<double>(value, key);
      } else if (key == "weight_decay") {
        train.weight_decay = parse_number<double>(value, key);
      } else if (key == "adam_beta1") {
        train.adam_beta1 = parse_number<double>(value, key);
      } else if (key == "adam_beta2") {
        train.adam_beta2 = parse_number<double>(value, key);
      } else if (key == "adam_eps") {
        train.adam_eps = parse_number<double>(value, key);
      } else if (key == "seed") {
        train.seed = parse_number<std::uint64_t>(value, key);
      } else if (key == "pair_source") {
        train.pair_source = parse_pair_source(value);
      } else if (key == "embed_dim") {
        encoder.embed_dim = parse_number<std::size_t>(value, key);
      } else if (key == "use_attention") {
        encoder.use_attention = parse_bool(value, key);
      } else if (key == "use_head") {
        encoder.use_projection_head = parse_bool(value, key);
      } else if (key == "head_dim") {
        encoder.head_dim = parse_number<std::size_t>(value, key);
      } else if (key == "max_len") {
        encoder.max_input_length = parse_number<std::size_t>(value, key);
      } else {
        throw InputError("unknown key '" + key + "'");
      }
    } catch (const InputError& e) {
      throw InputError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(const std::filesystem::path& path, TrainConfig& train,
                       EncoderConfig& encoder) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  apply_config_file(in, train, encoder);
}

namespace {

// Round-robin over a seeded shuffle of `groups`; `draw` appends one pair.
template <typename Draw>
ProbeSet round_robin_probe(const std::vector<const FunctionGroup*>& groups, std::size_t count,
                           Rng& rng, Draw draw) {
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  ProbeSet probe;
  probe.pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) probe.pairs.push_back(draw(*groups[order[i % order.size()]]));
  return probe;
}

}  // namespace

ProbeSet make_probe_set(const std::vector<FunctionGroup>& groups, std::size_t count,
                        std::uint64_t seed) {
  std::vector<const FunctionGroup*> eligible;
  for (const auto& g : groups) {
    if (g.pair_eligible()) eligible.push_back(&g);
  }
  if (eligible.empty()) throw InputError("no pair-eligible groups for the probe set");
  Rng rng(seed);
  return round_robin_probe(eligible, count, rng, [&](const FunctionGroup& g) {
    const auto pair = sample_positive_pair(g, rng);
    return std::pair{pair.first->tokens, pair.second->tokens};
  });
}

ProbeSet make_augment_probe_set(const std::vector<FunctionGroup>& groups,
                                const TransformSpec& spec, const AugmentLexicon& lexicon,
                                std::size_t count, std::uint64_t seed) {
  std::vector<const FunctionGroup*> nonempty;
  for (const auto& g : groups) {
    if (!g.members.empty()) nonempty.push_back(&g);
  }
  if (nonempty.empty()) throw InputError("no functions for the probe set");
  Rng rng(seed);
  return round_robin_probe(nonempty, count, rng, [&](const FunctionGroup& g) {
    std::uniform_int_distribution<std::size_t> pick(0, g.members.size() - 1);
    const auto& source = g.members[pick(rng)];
    auto a = synth_augment(source, spec, lexicon, rng).tokens;
    auto b = synth_augment(source, spec, lexicon, rng).tokens;
    return std::pair{std::move(a), std::move(b)};
  });
}

ProbeStats probe_stats(const EncoderParams& params, const ProbeSet& probe) {
  std::vector<std::pair<Embedding, Embedding>> pairs;
  std::vector<Embedding> all;
  pairs.reserve(probe.pairs.size());
  for (const auto& [a, b] : probe.pairs) {
    pairs.emplace_back(encode(params, a, Stage::kEvaluation), encode(params, b, Stage::kEvaluation));
    all.push_back(pairs.back().first);
    all.push_back(pairs.back().second);
  }
  return {alignment(pairs), uniformity(all)};
}

std::string TrainReport::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["batches"] = e.batches;
    j["mean_loss"] = e.mean_loss;
    j["positive_term"] = e.positive_term;
    j["negative_term"] = e.negative_term;
    j["alignment"] = e.alignment;
    j["uniformity"] = e.uniformity;
    if (!checkpoint_path.empty()) j["checkpoint"] = checkpoint_path;
    out += j.dump();
    out += '\n';
  }
  return out;
}

namespace {

// Augmented pairs need one variant, recorded pairs two.
std::vector<const FunctionGroup*> eligible_groups(const std::vector<FunctionGroup>& groups,
                                                  PairSource source) {
  std::vector<const FunctionGroup*> out;
  for (const auto& g : groups) {
    if (source == PairSource::kAugment ? !g.members.empty() : g.pair_eligible()) {
      out.push_back(&g);
    }
  }
  return out;
}

// Appends the two views of one training pair.
void draw_pair(const FunctionGroup& group, const TrainConfig& config,
               const AugmentLexicon* lexicon, Rng& rng,
               std::vector<std::vector<TokenId>>& batch) {
  if (config.pair_source == PairSource::kCorpus) {
    const auto pair = sample_positive_pair(group, rng);
    batch.push_back(pair.first->tokens);
    batch.push_back(pair.second->tokens);
    return;
  }
  std::uniform_int_distribution<std::size_t> pick(0, group.members.size() - 1);
  const auto& source = group.members[pick(rng)];
  batch.push_back(synth_augment(source, config.augment, *lexicon, rng).tokens);
  batch.push_back(synth_augment(source, config.augment, *lexicon, rng).tokens);
}

std::string coordinates(std::size_t epoch, std::size_t batch) {
  return "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch);
}

}  // namespace

TrainResult train_from(EncoderParams initial, const std::vector<FunctionGroup>& groups,
                       const TrainConfig& config, const ProbeSet* probe,
                       const AugmentLexicon* lexicon, const EpochCallback& on_epoch) {
  config.validate();
  const auto eligible = eligible_groups(groups, config.pair_source);
  if (eligible.empty()) throw InputError("no pair-eligible groups to train on");
  if (config.batch_size > eligible.size()) {
    throw InputError("batch_size " + std::to_string(config.batch_size) + " exceeds the " +
                     std::to_string(eligible.size()) + " pair-eligible groups");
  }
  if (config.pair_source == PairSource::kAugment && lexicon == nullptr) {
    throw InputError("augment pair source needs a lexicon");
  }

  TrainResult result{std::move(initial), {}};
  if (config.epochs == 0) return result;

  ProbeSet own_probe;
  if (probe == nullptr) {
    own_probe = config.pair_source == PairSource::kAugment
                    ? make_augment_probe_set(groups, config.augment, *lexicon)
                    : make_probe_set(groups);
    probe = &own_probe;
  }

  auto& params = result.params;
  AdamState state(params);
  const AdamConfig adam = config.adam();
  Rng rng(config.seed);
  std::vector<std::size_t> order(eligible.size());
  const std::size_t batches = eligible.size() / config.batch_size;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord record;
    record.epoch = epoch;
    record.batches = batches;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<std::vector<TokenId>> batch;
      batch.reserve(2 * config.batch_size);
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        draw_pair(*eligible[order[b * config.batch_size + i]], config, lexicon, rng, batch);
      }

      EncoderTape tape;
      std::vector<Embedding> z;
      try {
        z = encode_batch_recorded(params, batch, tape);
      } catch (const TrainingError& e) {
        throw TrainingError(coordinates(epoch, b) + ": " + e.what());
      }
      const SimMatrix sims = similarity_matrix(z);
      const double loss = nt_xent_from_similarities(sims, config.temperature);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at " + coordinates(epoch, b));
      }
      const LossTerms terms = loss_decomposition(sims, config.temperature);

      const Eigen::MatrixXd g = nt_xent_similarity_grad(sims, config.temperature);
      const Eigen::MatrixXd gsym = g + g.transpose();
      std::vector<Eigen::VectorXd> upstream(z.size(), Eigen::VectorXd::Zero(z.front().size()));
      for (std::size_t a = 0; a < z.size(); ++a) {
        for (std::size_t k = 0; k < z.size(); ++k) {
          const double w = gsym(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k));
          if (w != 0.0) upstream[a] += w * z[k];
        }
      }
      try {
        adam_step(params, backward(params, tape, upstream), state, adam);
      } catch (const TrainingError& e) {
        throw TrainingError(coordinates(epoch, b) + ": " + e.what());
      }

      record.mean_loss += loss;
      record.positive_term += terms.positive;
      record.negative_term += terms.negative;
    }
    if (batches > 0) {
      record.mean_loss /= static_cast<double>(batches);
      record.positive_term /= static_cast<double>(batches);
      record.negative_term /= static_cast<double>(batches);
    }
    const ProbeStats stats = probe_stats(params, *probe);
    record.alignment = stats.alignment;
    record.uniformity = stats.uniformity;
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.report.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

TrainResult train(const std::vector<FunctionGroup>& groups, const EncoderConfig& encoder,
                  const TrainConfig& config, const ProbeSet* probe,
                  const AugmentLexicon* lexicon, const EpochCallback& on_epoch) {
  config.validate();
  return train_from(init_params(encoder), groups, config, probe, lexicon, on_epoch);
}

std::vector<SweepRow> temperature_sweep(const std::vector<FunctionGroup>& groups,
                                        const EncoderConfig& encoder, const TrainConfig& config,
                                        const std::vector<double>& temperatures,
                                        const ModelScorer& score, const ProbeSet* probe,
                                        const AugmentLexicon* lexicon) {
  std::vector<SweepRow> rows;
  for (const double tau : temperatures) {
    SweepRow row;
    row.temperature = tau;
    try {
      TrainConfig cell = config;
      cell.temperature = tau;
      const auto trained = train(groups, encoder, cell, probe, lexicon);
      row.auc = score(trained.params);
    } catch (const std::runtime_error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace simclf
