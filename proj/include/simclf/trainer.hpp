#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simclf/augment.hpp"
#include "simclf/corpus.hpp"
#include "simclf/encoder.hpp"
#include "simclf/optimizer.hpp"

namespace simclf {

// Where the two views of a training pair come from: two recorded variants of
// the group, or two synth_augment views of one recorded variant.
enum class PairSource { kCorpus, kAugment };

std::string_view to_string(PairSource source);
PairSource parse_pair_source(std::string_view name);

struct TrainConfig {
  std::size_t batch_size = 32;
  double temperature = 0.07;
  std::size_t epochs = 40;
  double learning_rate = 1e-5;
  double weight_decay = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  PairSource pair_source = PairSource::kCorpus;
  TransformSpec augment;  // used with PairSource::kAugment

  void validate() const;
  AdamConfig adam() const;
};

// Reads a flat key=value file ('#' starts a comment) into both configs.
// Unknown keys and unparsable values are input errors naming the line.
void apply_config_file(std::istream& in, TrainConfig& train, EncoderConfig& encoder);
void apply_config_file(const std::filesystem::path& path, TrainConfig& train,
                       EncoderConfig& encoder);

// Fixed pairs used to track alignment and uniformity across epochs.
struct ProbeSet {
  std::vector<std::pair<std::vector<TokenId>, std::vector<TokenId>>> pairs;
};

inline constexpr std::size_t kProbePairs = 128;
inline constexpr std::uint64_t kProbeSeed = 0x70be;

// One positive pair per group, cycling through groups until `count` pairs
// exist. The draw depends only on `groups`, `count` and `seed`.
ProbeSet make_probe_set(const std::vector<FunctionGroup>& groups,
                        std::size_t count = kProbePairs, std::uint64_t seed = kProbeSeed);

struct ProbeStats {
  double alignment = 0.0;
  double uniformity = 0.0;
};

// Same, with both members of a pair drawn by synth_augment from one variant.
// Singleton groups qualify.
ProbeSet make_augment_probe_set(const std::vector<FunctionGroup>& groups,
                                const TransformSpec& spec, const AugmentLexicon& lexicon,
                                std::size_t count = kProbePairs,
                                std::uint64_t seed = kProbeSeed);

ProbeStats probe_stats(const EncoderParams& params, const ProbeSet& probe);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t batches = 0;
  double mean_loss = 0.0;
  double positive_term = 0.0;
  double negative_term = 0.0;
  double alignment = 0.0;
  double uniformity = 0.0;
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::string checkpoint_path;

  // One JSON object per epoch. Wall time is left out so identical runs give
  // identical bytes.
  std::string to_jsonl() const;
};

struct TrainResult {
  EncoderParams params;
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Minibatch NT-Xent training with Adam. `probe` defaults to a probe set drawn
// from `groups`. `lexicon` is required for PairSource::kAugment.
TrainResult train(const std::vector<FunctionGroup>& groups, const EncoderConfig& encoder,
                  const TrainConfig& config, const ProbeSet* probe = nullptr,
                  const AugmentLexicon* lexicon = nullptr, const EpochCallback& on_epoch = {});

// Same loop starting from given parameters (few-shot fine-tuning).
TrainResult train_from(EncoderParams initial, const std::vector<FunctionGroup>& groups,
                       const TrainConfig& config, const ProbeSet* probe = nullptr,
                       const AugmentLexicon* lexicon = nullptr,
                       const EpochCallback& on_epoch = {});

struct SweepRow {
  double temperature = 0.0;
  std::optional<double> auc;
  std::string error;
};

using ModelScorer = std::function<double(const EncoderParams&)>;

// Trains once per temperature with the shared seed and scores each model.
// A failing cell records its error and the sweep continues.
std::vector<SweepRow> temperature_sweep(const std::vector<FunctionGroup>& groups,
                                        const EncoderConfig& encoder, const TrainConfig& config,
                                        const std::vector<double>& temperatures,
                                        const ModelScorer& score,
                                        const ProbeSet* probe = nullptr,
                                        const AugmentLexicon* lexicon = nullptr);

}  // namespace simclf
