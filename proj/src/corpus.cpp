#include "simclf/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "simclf/errors.hpp"
#include "simclf/io.hpp"

namespace simclf {
namespace {

constexpr std::array<std::string_view, 7> kArchNames = {
    "x86-32", "x86-64", "arm-32", "arm-64", "mips-32", "mips-64", "synthetic"};
constexpr std::array<std::string_view, 6> kOptNames = {"O0", "O1", "O2", "O3", "Os", "synthetic"};
constexpr std::array<std::string_view, 5> kObfNames = {"none", "bcf", "sub", "split",
                                                       "synthetic"};

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view name, const std::array<std::string_view, N>& names,
                std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<Enum>(i);
  }
  throw InputError("unknown " + std::string(what) + " '" + std::string(name) + "'");
}

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Accepts [-]digits and [-]0x<hex>. nullopt when the token is not an integer
// literal; saturates on overflow so huge literals still classify as addresses.
std::optional<std::int64_t> parse_integer(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  std::uint64_t magnitude = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), magnitude, base);
  if (ptr != s.data() + s.size()) return std::nullopt;
  if (ec == std::errc::result_out_of_range ||
      magnitude > static_cast<std::uint64_t>(INT64_MAX)) {
    magnitude = static_cast<std::uint64_t>(INT64_MAX);
  } else if (ec != std::errc()) {
    return std::nullopt;
  }
  auto value = static_cast<std::int64_t>(magnitude);
  return negative ? -value : value;
}

bool is_quoted(std::string_view s) {
  return s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                           (s.front() == '\'' && s.back() == '\''));
}

std::string normalize_one(std::string_view raw, const NormalizationPolicy& policy) {
  std::string_view s = trim(raw);
  if (s == kImmToken || s == kAddrToken || s == kStrToken) return std::string(s);
  if (is_quoted(s)) return std::string(kStrToken);
  if (s.size() >= 2 && s.front() == '<' && s.back() == '>') return std::string(kAddrToken);
  if (auto value = parse_integer(s)) {
    const std::int64_t v = *value;
    const std::int64_t magnitude = v == INT64_MIN ? INT64_MAX : (v < 0 ? -v : v);
    if (magnitude < policy.imm_threshold) return std::to_string(v);
    if (v >= policy.addr_threshold) return std::string(kAddrToken);
    return std::string(kImmToken);
  }
  std::string out(s);
  if (policy.lowercase) {
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  }
  return out;
}

struct NumberedRecord {
  std::size_t line = 0;
  RawFunction record;
};

RawFunction record_from_json(const nlohmann::json& j) {
  auto field = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) throw InputError(std::string("missing field '") + key + "'");
    if (!it->is_string()) throw InputError(std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
  };
  RawFunction r;
  r.instance_id = field("instance_id");
  r.group_id = field("group_id");
  r.arch = parse_arch(field("arch"));
  r.opt = parse_opt(field("opt"));
  r.obf = parse_obf(field("obf"));
  auto tokens = j.find("tokens");
  if (tokens == j.end() || !tokens->is_array()) {
    throw InputError("field 'tokens' must be an array");
  }
  r.tokens.reserve(tokens->size());
  for (const auto& t : *tokens) {
    if (!t.is_string()) throw InputError("token is not a string");
    r.tokens.push_back(t.get<std::string>());
  }
  return r;
}

std::string line_prefix(std::size_t line) {
  return line == 0 ? std::string() : "line " + std::to_string(line) + ": ";
}

Corpus assemble(std::vector<NumberedRecord> records, const Vocab* vocab,
                const CorpusOptions& options, std::vector<std::size_t> skipped) {
  struct Normalized {
    std::size_t line;
    const RawFunction* raw;
    std::vector<std::string> tokens;
  };
  std::vector<Normalized> kept;
  kept.reserve(records.size());
  CorpusStats stats;

  for (const auto& nr : records) {
    auto tokens = normalize_tokens(nr.record.tokens, options.policy);
    if (tokens.empty()) {
      if (options.strict) {
        throw InputError(line_prefix(nr.line) + "instance '" + nr.record.instance_id +
                         "' has no tokens after normalization");
      }
      skipped.push_back(nr.line);
      continue;
    }
    if (tokens.size() > options.max_input_length) {
      tokens.resize(options.max_input_length);
      ++stats.truncated;
    }
    kept.push_back({nr.line, &nr.record, std::move(tokens)});
  }
  if (kept.empty()) throw InputError("empty corpus");

  std::set<std::string> instance_ids;
  std::set<std::tuple<std::string, Arch, OptLevel, Obfuscation>> variants;
  for (const auto& k : kept) {
    if (!instance_ids.insert(k.raw->instance_id).second) {
      throw InputError(line_prefix(k.line) + "duplicate instance_id '" + k.raw->instance_id +
                       "'");
    }
    // Synthetic augmentations legitimately repeat the all-synthetic triple.
    const bool synthetic = k.raw->arch == Arch::kSynthetic &&
                           k.raw->opt == OptLevel::kSynthetic &&
                           k.raw->obf == Obfuscation::kSynthetic;
    if (!synthetic &&
        !variants.emplace(k.raw->group_id, k.raw->arch, k.raw->opt, k.raw->obf).second) {
      throw InputError(line_prefix(k.line) + "duplicate variant (" + k.raw->group_id + ", " +
                       std::string(to_string(k.raw->arch)) + ", " +
                       std::string(to_string(k.raw->opt)) + ", " +
                       std::string(to_string(k.raw->obf)) + ")");
    }
  }

  Corpus corpus;
  if (vocab != nullptr) {
    corpus.vocab = *vocab;
  } else {
    std::vector<std::vector<std::string>> sequences;
    sequences.reserve(kept.size());
    for (const auto& k : kept) sequences.push_back(k.tokens);
    corpus.vocab = Vocab::build(sequences);
  }

  std::unordered_map<std::string, std::size_t> group_index;
  for (auto& k : kept) {
    FunctionInstance inst;
    inst.instance_id = k.raw->instance_id;
    inst.group_id = k.raw->group_id;
    inst.arch = k.raw->arch;
    inst.opt = k.raw->opt;
    inst.obf = k.raw->obf;
    inst.tokens = corpus.vocab.encode(k.tokens);
    stats.tokens += inst.tokens.size();
    stats.oov_tokens += static_cast<std::size_t>(
        std::count(inst.tokens.begin(), inst.tokens.end(), kUnkId));

    auto [it, inserted] = group_index.emplace(inst.group_id, corpus.groups.size());
    if (inserted) corpus.groups.push_back(FunctionGroup{inst.group_id, {}});
    corpus.groups[it->second].members.push_back(std::move(inst));
  }
  stats.groups = corpus.groups.size();
  stats.instances = kept.size();
  stats.skipped_lines = std::move(skipped);
  corpus.stats = std::move(stats);
  return corpus;
}

}  // namespace

std::string_view to_string(Arch arch) { return kArchNames[static_cast<std::size_t>(arch)]; }
std::string_view to_string(OptLevel opt) { return kOptNames[static_cast<std::size_t>(opt)]; }
std::string_view to_string(Obfuscation obf) { return kObfNames[static_cast<std::size_t>(obf)]; }

Arch parse_arch(std::string_view name) { return parse_enum<Arch>(name, kArchNames, "arch"); }
OptLevel parse_opt(std::string_view name) { return parse_enum<OptLevel>(name, kOptNames, "opt"); }
Obfuscation parse_obf(std::string_view name) {
  return parse_enum<Obfuscation>(name, kObfNames, "obf");
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
  add(std::string(kPadToken), 0);
  add(std::string(kUnkToken), 0);
}

void Vocab::add(std::string token, std::int64_t count) {
  if (token.find('\n') != std::string::npos) {
    throw InputError("token contains a newline");
  }
  if (!ids_.emplace(token, static_cast<TokenId>(tokens_.size())).second) {
    throw InputError("duplicate vocab token '" + token + "'");
  }
  tokens_.push_back(std::move(token));
  frequencies_.push_back(count);
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& sequences) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& seq : sequences) {
    for (const auto& t : seq) ++counts[t];
  }
  std::vector<std::pair<std::string, std::int64_t>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab vocab;
  for (auto& [token, count] : ordered) {
    if (token == kPadToken || token == kUnkToken) continue;
    vocab.add(token, count);
  }
  return vocab;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab vocab;
  for (const auto& t : tokens) vocab.add(t, 0);
  return vocab;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open vocab " + path.string());
  Vocab vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.add(line, 0);
  }
  return vocab;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::string out;
  for (std::size_t id = kReservedCount; id < tokens_.size(); ++id) {
    out += tokens_[id];
    out += '\n';
  }
  write_file_atomic(path, out);
}

TokenId Vocab::lookup(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return ids_.find(std::string(token)) != ids_.end();
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InputError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(lookup(t));
  return ids;
}

std::vector<std::string> Vocab::decode(const std::vector<TokenId>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(token(id));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> normalize_tokens(const std::vector<std::string>& raw,
                                          const NormalizationPolicy& policy) {
  std::vector<std::string> out;
  out.reserve(raw.size());
  for (const auto& token : raw) {
    if (trim(token).empty()) continue;
    out.push_back(normalize_one(token, policy));
  }
  return out;
}

Corpus parse_corpus(const std::filesystem::path& path, const Vocab* vocab,
                    const CorpusOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus " + path.string());
  return parse_corpus(in, vocab, options);
}

Corpus parse_corpus(std::istream& in, const Vocab* vocab, const CorpusOptions& options) {
  std::vector<NumberedRecord> records;
  std::vector<std::size_t> skipped;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw InputError("not a JSON object");
      records.push_back({line_no, record_from_json(j)});
    } catch (const std::exception& e) {
      if (options.strict) throw InputError(line_prefix(line_no) + e.what());
      skipped.push_back(line_no);
    }
  }
  return assemble(std::move(records), vocab, options, std::move(skipped));
}

Corpus build_corpus(const std::vector<RawFunction>& records, const Vocab* vocab,
                    const CorpusOptions& options) {
  std::vector<NumberedRecord> numbered;
  numbered.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) numbered.push_back({i + 1, records[i]});
  return assemble(std::move(numbered), vocab, options, {});
}

std::string to_jsonl(const RawFunction& record) {
  nlohmann::ordered_json j;
  j["instance_id"] = record.instance_id;
  j["group_id"] = record.group_id;
  j["arch"] = to_string(record.arch);
  j["opt"] = to_string(record.opt);
  j["obf"] = to_string(record.obf);
  j["tokens"] = record.tokens;
  return j.dump();
}

void write_corpus(const std::vector<RawFunction>& records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) {
    out += to_jsonl(r);
    out += '\n';
  }
  write_file_atomic(path, out);
}

PositivePair sample_positive_pair(const FunctionGroup& group, Rng& rng) {
  const std::size_t n = group.members.size();
  if (n < 2) throw InputError("group not pair-eligible: '" + group.group_id + "'");
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::uniform_int_distribution<std::size_t> second(0, n - 2);
  const std::size_t i = first(rng);
  std::size_t j = second(rng);
  if (j >= i) ++j;
  return {&group.members[i], &group.members[j]};
}

std::vector<std::pair<std::string, std::int64_t>> token_frequency_ranks(
    const std::vector<FunctionGroup>& groups, const Vocab& vocab) {
  std::vector<std::int64_t> counts(vocab.size(), 0);
  std::int64_t total = 0;
  for (const auto& g : groups) {
    for (const auto& m : g.members) {
      for (TokenId id : m.tokens) {
        if (id < 0 || static_cast<std::size_t>(id) >= counts.size()) {
          throw InputError("token id " + std::to_string(id) + " outside vocab");
        }
        ++counts[static_cast<std::size_t>(id)];
        ++total;
      }
    }
  }
  if (total == 0) throw InputError("empty corpus");
  std::vector<std::pair<std::string, std::int64_t>> ranks;
  for (std::size_t id = 0; id < counts.size(); ++id) {
    if (counts[id] > 0) ranks.emplace_back(vocab.token(static_cast<TokenId>(id)), counts[id]);
  }
  std::sort(ranks.begin(), ranks.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return ranks;
}

std::size_t instance_count(const std::vector<FunctionGroup>& groups) {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.members.size();
  return n;
}

}  // namespace simclf
