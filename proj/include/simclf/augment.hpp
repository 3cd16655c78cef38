#pragma once

#include <optional>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "simclf/corpus.hpp"

namespace simclf {

enum class TransformKind {
  kRegisterRename,
  kInstructionReorder,
  kNopInsertion,
  kOperandSynonym,
  kBlockSplit,
};

std::string_view to_string(TransformKind kind);

struct Transform {
  TransformKind kind = TransformKind::kNopInsertion;
  double strength = 0.0;  // in [0, 1]
};

// Applied in order. An empty list is the identity transform.
struct TransformSpec {
  std::vector<Transform> transforms;

  void validate() const;
};

// Built-in x86-64 instruction lexicon used for token classification and by
// the synthetic fixture generator.
namespace lexicon {

struct Mnemonic {
  std::string_view name;
  int operands;  // typical operand count
};

// Ordered roughly by how often they appear in compiled code.
const std::vector<Mnemonic>& mnemonics();
// Grouped by width: 64-bit, 32-bit, 8-bit.
const std::vector<std::vector<std::string_view>>& register_classes();
// Stack and frame pointers keep their role across register allocation.
bool is_fixed_register(std::string_view name);
bool ends_block(std::string_view mnemonic);
const std::vector<std::pair<std::string_view, std::string_view>>& synonyms();
const std::vector<std::string_view>& operand_punctuation();
// Every token the lexicon knows, including small immediates and class tokens.
std::vector<std::string> all_tokens();

}  // namespace lexicon

// Token classes resolved against one Vocab.
class AugmentLexicon {
 public:
  explicit AugmentLexicon(const Vocab& vocab);

  bool is_mnemonic(TokenId id) const { return mnemonics_.count(id) != 0; }
  bool ends_block(TokenId id) const { return terminators_.count(id) != 0; }
  // Renameable registers per width class.
  const std::vector<std::vector<TokenId>>& register_classes() const { return registers_; }
  std::optional<TokenId> synonym(TokenId id) const;
  std::optional<TokenId> nop() const { return nop_; }
  std::optional<TokenId> jmp() const { return jmp_; }
  std::optional<TokenId> addr() const { return addr_; }

 private:
  std::unordered_set<TokenId> mnemonics_;
  std::unordered_set<TokenId> terminators_;
  std::vector<std::vector<TokenId>> registers_;
  std::unordered_map<TokenId, TokenId> synonyms_;
  std::optional<TokenId> nop_;
  std::optional<TokenId> jmp_;
  std::optional<TokenId> addr_;
};

// Token-level stand-in for recompiling or obfuscating a function. The result
// keeps the group_id, is marked synthetic and gets a fresh instance_id.
FunctionInstance synth_augment(const FunctionInstance& instance, const TransformSpec& spec,
                               const AugmentLexicon& lexicon, Rng& rng);

}  // namespace simclf
