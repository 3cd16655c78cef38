#include "simclf/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "simclf/errors.hpp"

namespace simclf {

std::string_view to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::kRegisterRename:
      return "register-rename";
    case TransformKind::kInstructionReorder:
      return "instruction-reorder-within-block";
    case TransformKind::kNopInsertion:
      return "nop-insertion";
    case TransformKind::kOperandSynonym:
      return "operand-synonym-substitution";
    case TransformKind::kBlockSplit:
      return "block-split";
  }
  return "unknown";
}

void TransformSpec::validate() const {
  for (const auto& t : transforms) {
    if (!(t.strength >= 0.0 && t.strength <= 1.0)) {
      throw InputError(std::string(to_string(t.kind)) + " strength " +
                       std::to_string(t.strength) + " outside [0,1]");
    }
  }
}

namespace lexicon {

const std::vector<Mnemonic>& mnemonics() {
  static const std::vector<Mnemonic> table = {
      {"mov", 2},      {"lea", 2},       {"push", 1},     {"pop", 1},       {"add", 2},
      {"sub", 2},      {"cmp", 2},       {"test", 2},     {"call", 1},      {"jmp", 1},
      {"je", 1},       {"jne", 1},       {"xor", 2},      {"and", 2},       {"or", 2},
      {"ret", 0},      {"movzx", 2},     {"movsx", 2},    {"shl", 2},       {"shr", 2},
      {"sar", 2},      {"imul", 2},      {"jg", 1},       {"jl", 1},        {"jge", 1},
      {"jle", 1},      {"ja", 1},        {"jb", 1},       {"jae", 1},       {"jbe", 1},
      {"inc", 1},      {"dec", 1},       {"neg", 1},      {"not", 1},       {"cdq", 0},
      {"cqo", 0},      {"idiv", 1},      {"div", 1},      {"mul", 1},       {"sete", 1},
      {"setne", 1},    {"setg", 1},      {"setl", 1},     {"cmove", 2},     {"cmovne", 2},
      {"cmovg", 2},    {"cmovl", 2},     {"xchg", 2},     {"bt", 2},        {"bts", 2},
      {"btr", 2},      {"bsf", 2},       {"bsr", 2},      {"leave", 0},     {"nop", 0},
      {"movsd", 2},    {"movss", 2},     {"addsd", 2},    {"subsd", 2},     {"mulsd", 2},
      {"divsd", 2},    {"cvtsi2sd", 2},  {"cvttsd2si", 2}, {"pxor", 2},     {"movaps", 2},
      {"movups", 2},   {"movdqa", 2},    {"movq", 2},     {"movd", 2},      {"rol", 2},
      {"ror", 2},      {"sbb", 2},       {"adc", 2},      {"js", 1},        {"jns", 1},
      {"stosb", 0},    {"stosq", 0},     {"rep", 0},      {"int3", 0},      {"hlt", 0},
      {"ud2", 0},      {"punpcklqdq", 2}, {"pshufd", 2},  {"paddd", 2},     {"psubd", 2},
      {"andps", 2},    {"orps", 2},      {"xorps", 2},    {"ucomisd", 2},   {"comisd", 2},
      {"sqrtsd", 2},   {"maxsd", 2},     {"minsd", 2},    {"cwde", 0},      {"cdqe", 0},
      {"movabs", 2},   {"seta", 1},      {"setb", 1},     {"cmova", 2},     {"cmovb", 2},
      {"lock", 0},     {"cmpxchg", 2},   {"xadd", 2},     {"bswap", 1},     {"popcnt", 2},
      {"tzcnt", 2},    {"lzcnt", 2},     {"endbr64", 0},  {"jz", 1},        {"jnz", 1},
      {"sal", 2},      {"jnb", 1},       {"jnae", 1},     {"cmovz", 2},     {"cmovnz", 2},
      {"setz", 1},     {"setnz", 1},     {"jnle", 1},     {"jnge", 1},
  };
  return table;
}

const std::vector<std::vector<std::string_view>>& register_classes() {
  static const std::vector<std::vector<std::string_view>> classes = {
      {"rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp", "r8", "r9", "r10", "r11", "r12",
       "r13", "r14", "r15"},
      {"eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp", "r8d", "r9d", "r10d", "r11d",
       "r12d", "r13d", "r14d", "r15d"},
      {"al", "bl", "cl", "dl", "sil", "dil", "r8b", "r9b"},
      {"xmm0", "xmm1", "xmm2", "xmm3", "xmm4", "xmm5", "xmm6", "xmm7"},
  };
  return classes;
}

bool is_fixed_register(std::string_view name) {
  return name == "rsp" || name == "rbp" || name == "esp" || name == "ebp";
}

bool ends_block(std::string_view mnemonic) {
  if (mnemonic == "call" || mnemonic == "ret" || mnemonic == "hlt" || mnemonic == "ud2") {
    return true;
  }
  return !mnemonic.empty() && mnemonic.front() == 'j';
}

const std::vector<std::pair<std::string_view, std::string_view>>& synonyms() {
  static const std::vector<std::pair<std::string_view, std::string_view>> table = {
      {"je", "jz"},     {"jne", "jnz"},       {"shl", "sal"},     {"jae", "jnb"},
      {"jb", "jnae"},   {"cmove", "cmovz"},   {"cmovne", "cmovnz"}, {"sete", "setz"},
      {"setne", "setnz"}, {"jg", "jnle"},     {"jl", "jnge"},
  };
  return table;
}

const std::vector<std::string_view>& operand_punctuation() {
  static const std::vector<std::string_view> table = {"[",    "]",    "+",     "-",    "*",
                                                       "ptr", "byte", "word", "dword", "qword"};
  return table;
}

std::vector<std::string> all_tokens() {
  std::vector<std::string> out;
  for (const auto& m : mnemonics()) out.emplace_back(m.name);
  for (const auto& cls : register_classes()) {
    for (auto r : cls) out.emplace_back(r);
  }
  for (auto p : operand_punctuation()) out.emplace_back(p);
  for (int i = 0; i < 16; ++i) out.push_back(std::to_string(i));
  out.emplace_back(kImmToken);
  out.emplace_back(kAddrToken);
  out.emplace_back(kStrToken);
  return out;
}

}  // namespace lexicon

AugmentLexicon::AugmentLexicon(const Vocab& vocab) {
  auto find = [&](std::string_view token) -> std::optional<TokenId> {
    if (!vocab.contains(token)) return std::nullopt;
    return vocab.lookup(token);
  };
  for (const auto& m : lexicon::mnemonics()) {
    if (auto id = find(m.name)) {
      mnemonics_.insert(*id);
      if (lexicon::ends_block(m.name)) terminators_.insert(*id);
    }
  }
  for (const auto& cls : lexicon::register_classes()) {
    std::vector<TokenId> ids;
    for (auto r : cls) {
      if (lexicon::is_fixed_register(r)) continue;
      if (auto id = find(r)) ids.push_back(*id);
    }
    if (ids.size() >= 2) registers_.push_back(std::move(ids));
  }
  for (const auto& [a, b] : lexicon::synonyms()) {
    auto ia = find(a);
    auto ib = find(b);
    if (ia && ib) {
      synonyms_[*ia] = *ib;
      synonyms_[*ib] = *ia;
    }
  }
  nop_ = find("nop");
  jmp_ = find("jmp");
  addr_ = find(kAddrToken);
}

std::optional<TokenId> AugmentLexicon::synonym(TokenId id) const {
  auto it = synonyms_.find(id);
  if (it == synonyms_.end()) return std::nullopt;
  return it->second;
}

namespace {

using Instruction = std::vector<TokenId>;

// Splits at mnemonic tokens. Tokens before the first mnemonic form their own
// leading chunk.
std::vector<Instruction> split_instructions(const std::vector<TokenId>& tokens,
                                            const AugmentLexicon& lex) {
  std::vector<Instruction> out;
  for (TokenId t : tokens) {
    if (out.empty() || lex.is_mnemonic(t)) out.emplace_back();
    out.back().push_back(t);
  }
  return out;
}

std::vector<TokenId> join(const std::vector<Instruction>& instrs) {
  std::vector<TokenId> out;
  for (const auto& ins : instrs) out.insert(out.end(), ins.begin(), ins.end());
  return out;
}

void rename_registers(std::vector<TokenId>& tokens, double strength, const AugmentLexicon& lex,
                      Rng& rng) {
  std::bernoulli_distribution active(strength);
  std::unordered_map<TokenId, TokenId> mapping;
  for (auto cls : lex.register_classes()) {
    std::shuffle(cls.begin(), cls.end(), rng);
    for (std::size_t i = 0; i + 1 < cls.size(); i += 2) {
      if (active(rng)) {
        mapping[cls[i]] = cls[i + 1];
        mapping[cls[i + 1]] = cls[i];
      }
    }
  }
  for (TokenId& t : tokens) {
    if (auto it = mapping.find(t); it != mapping.end()) t = it->second;
  }
}

void reorder_within_blocks(std::vector<TokenId>& tokens, double strength,
                           const AugmentLexicon& lex, Rng& rng) {
  auto instrs = split_instructions(tokens, lex);
  std::bernoulli_distribution swap(strength);
  std::size_t block_start = 0;
  for (std::size_t i = 0; i <= instrs.size(); ++i) {
    const bool end = i == instrs.size();
    if (!end && !(lex.is_mnemonic(instrs[i].front()) && lex.ends_block(instrs[i].front()))) {
      continue;
    }
    // [block_start, i) are the movable instructions; i is the terminator.
    for (std::size_t k = block_start; k + 1 < i; ++k) {
      if (!lex.is_mnemonic(instrs[k].front()) || !lex.is_mnemonic(instrs[k + 1].front())) {
        continue;
      }
      if (swap(rng)) {
        std::swap(instrs[k], instrs[k + 1]);
        ++k;
      }
    }
    block_start = i + 1;
  }
  tokens = join(instrs);
}

void insert_nops(std::vector<TokenId>& tokens, double strength, const AugmentLexicon& lex,
                 Rng& rng) {
  if (!lex.nop() || strength <= 0.0) return;
  const auto length = tokens.size();
  std::binomial_distribution<std::size_t> draw(length, strength);
  const auto cap = static_cast<std::size_t>(std::floor(strength * static_cast<double>(length)));
  const std::size_t count = std::min(draw(rng), cap);
  if (count == 0) return;

  auto instrs = split_instructions(tokens, lex);
  std::vector<std::size_t> per_boundary(instrs.size() + 1, 0);
  std::uniform_int_distribution<std::size_t> where(0, instrs.size());
  for (std::size_t i = 0; i < count; ++i) ++per_boundary[where(rng)];

  std::vector<TokenId> out;
  out.reserve(length + count);
  for (std::size_t b = 0; b <= instrs.size(); ++b) {
    out.insert(out.end(), per_boundary[b], *lex.nop());
    if (b < instrs.size()) out.insert(out.end(), instrs[b].begin(), instrs[b].end());
  }
  tokens = std::move(out);
}

void substitute_synonyms(std::vector<TokenId>& tokens, double strength,
                         const AugmentLexicon& lex, Rng& rng) {
  std::bernoulli_distribution replace(strength);
  for (TokenId& t : tokens) {
    if (auto alt = lex.synonym(t)) {
      if (replace(rng)) t = *alt;
    }
  }
}

void split_blocks(std::vector<TokenId>& tokens, double strength, const AugmentLexicon& lex,
                  Rng& rng) {
  if (!lex.jmp()) return;
  auto instrs = split_instructions(tokens, lex);
  std::bernoulli_distribution split(strength / 4.0);
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < instrs.size(); ++i) {
    if (i > 0 && split(rng)) {
      out.push_back(*lex.jmp());
      if (lex.addr()) out.push_back(*lex.addr());
    }
    out.insert(out.end(), instrs[i].begin(), instrs[i].end());
  }
  tokens = std::move(out);
}

}  // namespace

FunctionInstance synth_augment(const FunctionInstance& instance, const TransformSpec& spec,
                               const AugmentLexicon& lexicon, Rng& rng) {
  spec.validate();
  FunctionInstance out;
  out.group_id = instance.group_id;
  out.arch = Arch::kSynthetic;
  out.opt = OptLevel::kSynthetic;
  out.obf = Obfuscation::kSynthetic;
  out.tokens = instance.tokens;

  char suffix[24];
  std::snprintf(suffix, sizeof(suffix), "~%016llx", static_cast<unsigned long long>(rng()));
  out.instance_id = instance.instance_id + suffix;

  for (const auto& t : spec.transforms) {
    switch (t.kind) {
      case TransformKind::kRegisterRename:
        rename_registers(out.tokens, t.strength, lexicon, rng);
        break;
      case TransformKind::kInstructionReorder:
        reorder_within_blocks(out.tokens, t.strength, lexicon, rng);
        break;
      case TransformKind::kNopInsertion:
        insert_nops(out.tokens, t.strength, lexicon, rng);
        break;
      case TransformKind::kOperandSynonym:
        substitute_synonyms(out.tokens, t.strength, lexicon, rng);
        break;
      case TransformKind::kBlockSplit:
        split_blocks(out.tokens, t.strength, lexicon, rng);
        break;
    }
  }
  return out;
}

}  // namespace simclf
