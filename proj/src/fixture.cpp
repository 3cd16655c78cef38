#include "simclf/fixture.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "simclf/augment.hpp"
#include "simclf/errors.hpp"

namespace simclf {

void FixtureConfig::validate() const {
  if (groups < 1) throw InputError("fixture needs at least one group");
  if (variants < 1) throw InputError("fixture needs at least one variant per group");
  if (min_instructions < 1 || min_instructions > max_instructions) {
    throw InputError("fixture instruction range is empty");
  }
  for (const double s : {rename_max, reorder_max, nop_max, synonym_max, split_max}) {
    if (!(s >= 0.0 && s <= 1.0)) throw InputError("fixture strengths must lie in [0, 1]");
  }
}

namespace {

std::vector<double> zipf_weights(std::size_t n, double exponent) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), exponent);
  return w;
}

class BaseGenerator {
 public:
  BaseGenerator(const FixtureConfig& config, const Vocab& vocab)
      : vocab_(vocab),
        length_(config.min_instructions, config.max_instructions) {
    for (const auto& m : lexicon::mnemonics()) {
      mnemonics_.push_back({vocab.lookup(m.name), m.operands});
    }
    const auto weights = zipf_weights(mnemonics_.size(), 1.0);
    pick_mnemonic_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
    for (const auto& cls : lexicon::register_classes()) {
      for (auto r : cls) registers_.push_back(vocab.lookup(r));
    }
    const auto rw = zipf_weights(registers_.size(), 0.8);
    pick_register_ = std::discrete_distribution<std::size_t>(rw.begin(), rw.end());
    for (int i = 0; i < 16; ++i) immediates_.push_back(vocab.lookup(std::to_string(i)));
    immediates_.push_back(vocab.lookup(kImmToken));
    immediates_.push_back(vocab.lookup(kAddrToken));
    immediates_.push_back(vocab.lookup(kStrToken));
    for (auto w : {"byte", "word", "dword", "qword"}) widths_.push_back(vocab.lookup(w));
  }

  std::vector<TokenId> operator()(Rng& rng) {
    std::vector<TokenId> out;
    const auto n = length_(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> imm(0, immediates_.size() - 1);
    std::uniform_int_distribution<std::size_t> width(0, widths_.size() - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& m = mnemonics_[pick_mnemonic_(rng)];
      out.push_back(m.id);
      for (int k = 0; k < m.operands; ++k) {
        if (k > 0) out.push_back(vocab_.lookup(","));
        const double r = u(rng);
        if (r < 0.6) {
          out.push_back(registers_[pick_register_(rng)]);
        } else if (r < 0.8) {
          out.push_back(immediates_[imm(rng)]);
        } else {
          out.push_back(widths_[width(rng)]);
          out.push_back(vocab_.lookup("ptr"));
          out.push_back(vocab_.lookup("["));
          out.push_back(registers_[pick_register_(rng)]);
          if (u(rng) < 0.5) {
            out.push_back(vocab_.lookup("+"));
            out.push_back(immediates_[imm(rng)]);
          }
          out.push_back(vocab_.lookup("]"));
        }
      }
    }
    return out;
  }

 private:
  struct Op {
    TokenId id;
    int operands;
  };
  const Vocab& vocab_;
  std::uniform_int_distribution<std::size_t> length_;
  std::vector<Op> mnemonics_;
  std::discrete_distribution<std::size_t> pick_mnemonic_;
  std::vector<TokenId> registers_;
  std::discrete_distribution<std::size_t> pick_register_;
  std::vector<TokenId> immediates_;
  std::vector<TokenId> widths_;
};

void label_variant(std::size_t v, RawFunction& record) {
  constexpr Arch kArchs[] = {Arch::kX86_64, Arch::kX86_32, Arch::kArm64, Arch::kMips32};
  constexpr OptLevel kOpts[] = {OptLevel::kO0, OptLevel::kO1, OptLevel::kO2, OptLevel::kO3,
                                OptLevel::kOs};
  constexpr Obfuscation kObfs[] = {Obfuscation::kNone, Obfuscation::kBcf, Obfuscation::kSub,
                                   Obfuscation::kSplit};
  record.opt = kOpts[v % 5];
  record.arch = kArchs[(v / 5) % 4];
  record.obf = kObfs[(v / 20) % 4];
}

}  // namespace

std::vector<RawFunction> make_fixture(const FixtureConfig& config) {
  config.validate();
  if (config.variants > 80) throw InputError("fixture supports at most 80 variants per group");
  const Vocab vocab = Vocab::from_tokens(lexicon::all_tokens());
  const AugmentLexicon lex(vocab);
  BaseGenerator base(config, vocab);
  Rng rng(config.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<RawFunction> records;
  records.reserve(config.groups * config.variants);
  for (std::size_t g = 0; g < config.groups; ++g) {
    char gid[32];
    std::snprintf(gid, sizeof(gid), "fn%04zu", g);
    FunctionInstance source;
    source.instance_id = gid;
    source.group_id = gid;
    source.tokens = base(rng);
    for (std::size_t v = 0; v < config.variants; ++v) {
      TransformSpec spec;
      spec.transforms = {
          {TransformKind::kRegisterRename, u(rng) * config.rename_max},
          {TransformKind::kInstructionReorder, u(rng) * config.reorder_max},
          {TransformKind::kOperandSynonym, u(rng) * config.synonym_max},
          {TransformKind::kNopInsertion, u(rng) * config.nop_max},
          {TransformKind::kBlockSplit, u(rng) * config.split_max},
      };
      const auto variant = synth_augment(source, spec, lex, rng);
      RawFunction record;
      record.instance_id = std::string(gid) + "-v" + std::to_string(v);
      record.group_id = gid;
      label_variant(v, record);
      record.tokens = vocab.decode(variant.tokens);
      records.push_back(std::move(record));
    }
  }
  return records;
}

}  // namespace simclf
