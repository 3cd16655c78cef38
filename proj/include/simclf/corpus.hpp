#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace simclf {

using TokenId = std::int32_t;
using Rng = std::mt19937_64;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kReservedCount = 2;

enum class Arch { kX86_32, kX86_64, kArm32, kArm64, kMips32, kMips64, kSynthetic };
enum class OptLevel { kO0, kO1, kO2, kO3, kOs, kSynthetic };
enum class Obfuscation { kNone, kBcf, kSub, kSplit, kSynthetic };

std::string_view to_string(Arch arch);
std::string_view to_string(OptLevel opt);
std::string_view to_string(Obfuscation obf);
// Throw InputError on unknown names.
Arch parse_arch(std::string_view name);
OptLevel parse_opt(std::string_view name);
Obfuscation parse_obf(std::string_view name);

// One disassembled variant of a source function, tokens already mapped
// through a Vocab.
struct FunctionInstance {
  std::string instance_id;
  std::string group_id;
  Arch arch = Arch::kSynthetic;
  OptLevel opt = OptLevel::kSynthetic;
  Obfuscation obf = Obfuscation::kSynthetic;
  std::vector<TokenId> tokens;
};

// All variants compiled from the same source function.
struct FunctionGroup {
  std::string group_id;
  std::vector<FunctionInstance> members;

  bool pair_eligible() const { return members.size() >= 2; }
};

// A corpus line before vocabulary lookup.
struct RawFunction {
  std::string instance_id;
  std::string group_id;
  Arch arch = Arch::kSynthetic;
  OptLevel opt = OptLevel::kSynthetic;
  Obfuscation obf = Obfuscation::kSynthetic;
  std::vector<std::string> tokens;
};

class Vocab {
 public:
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();

  // Ids are assigned by descending frequency, ties lexicographic, after the
  // reserved entries.
  static Vocab build(const std::vector<std::vector<std::string>>& sequences);
  static Vocab from_tokens(const std::vector<std::string>& tokens);
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  // Occurrence count per id in the corpus the vocab was built from; zero for
  // vocabs loaded from file.
  const std::vector<std::int64_t>& frequencies() const { return frequencies_; }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<TokenId>& ids) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(std::string token, std::int64_t count);

  std::vector<std::string> tokens_;
  std::vector<std::int64_t> frequencies_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct NormalizationPolicy {
  // Integer operands with magnitude below this survive as decimal literals.
  std::int64_t imm_threshold = 16;
  // Integer operands at or above this are treated as absolute addresses.
  std::int64_t addr_threshold = 0x1000;
  bool lowercase = true;
};

inline constexpr std::string_view kImmToken = "IMM";
inline constexpr std::string_view kAddrToken = "ADDR";
inline constexpr std::string_view kStrToken = "STR";

// Deterministic and idempotent. Whitespace-only tokens are dropped, so the
// result can be empty.
std::vector<std::string> normalize_tokens(const std::vector<std::string>& raw,
                                          const NormalizationPolicy& policy = {});

struct CorpusStats {
  std::size_t groups = 0;
  std::size_t instances = 0;
  std::size_t tokens = 0;
  std::size_t oov_tokens = 0;
  std::size_t truncated = 0;
  std::vector<std::size_t> skipped_lines;

  double oov_rate() const {
    return tokens == 0 ? 0.0 : static_cast<double>(oov_tokens) / static_cast<double>(tokens);
  }
};

struct CorpusOptions {
  // Strict mode rejects the whole corpus on the first malformed line; skip
  // mode records the line number in CorpusStats::skipped_lines.
  bool strict = true;
  std::size_t max_input_length = 512;
  NormalizationPolicy policy;
};

struct Corpus {
  std::vector<FunctionGroup> groups;
  Vocab vocab;
  CorpusStats stats;
};

// Parses JSONL. When `vocab` is null a vocabulary is built from this corpus.
Corpus parse_corpus(const std::filesystem::path& path, const Vocab* vocab = nullptr,
                    const CorpusOptions& options = {});
Corpus parse_corpus(std::istream& in, const Vocab* vocab = nullptr,
                    const CorpusOptions& options = {});
// Groups already-materialized records, applying the same validation.
Corpus build_corpus(const std::vector<RawFunction>& records, const Vocab* vocab = nullptr,
                    const CorpusOptions& options = {});

std::string to_jsonl(const RawFunction& record);
void write_corpus(const std::vector<RawFunction>& records, const std::filesystem::path& path);

struct PositivePair {
  const FunctionInstance* first = nullptr;
  const FunctionInstance* second = nullptr;
};

// Two distinct members, uniform over ordered pairs without replacement.
PositivePair sample_positive_pair(const FunctionGroup& group, Rng& rng);

// Sorted by descending count, ties lexicographic.
std::vector<std::pair<std::string, std::int64_t>> token_frequency_ranks(
    const std::vector<FunctionGroup>& groups, const Vocab& vocab);

std::size_t instance_count(const std::vector<FunctionGroup>& groups);

}  // namespace simclf
