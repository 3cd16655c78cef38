#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <iterator>
#include <set>

#include "simclf/augment.hpp"
#include "simclf/corpus.hpp"
#include "simclf/errors.hpp"
#include "simclf/fixture.hpp"

using namespace simclf;

namespace {

struct Env {
  Vocab vocab = Vocab::from_tokens(lexicon::all_tokens());
  AugmentLexicon lex{vocab};

  FunctionInstance instance(const std::vector<std::string>& tokens) const {
    FunctionInstance f;
    f.instance_id = "f";
    f.group_id = "g";
    f.arch = Arch::kX86_64;
    f.tokens = vocab.encode(tokens);
    return f;
  }
};

TransformSpec only(TransformKind kind, double strength) {
  return TransformSpec{{{kind, strength}}};
}

}  // namespace

TEST(Augment, IdentitySpecCopiesTokensWithFreshId) {
  Env env;
  const auto in = env.instance({"push", "rbp", "mov", "rbp", "rsp", "ret"});
  Rng rng(3);
  const auto a = synth_augment(in, {}, env.lex, rng);
  const auto b = synth_augment(in, {}, env.lex, rng);
  EXPECT_EQ(a.tokens, in.tokens);
  EXPECT_EQ(a.group_id, "g");
  EXPECT_EQ(a.arch, Arch::kSynthetic);
  EXPECT_EQ(a.opt, OptLevel::kSynthetic);
  EXPECT_EQ(a.obf, Obfuscation::kSynthetic);
  EXPECT_NE(a.instance_id, in.instance_id);
  EXPECT_NE(a.instance_id, b.instance_id);
}

TEST(Augment, ZeroStrengthIsIdentity) {
  Env env;
  const auto in = env.instance({"mov", "rax", "rbx", "je", "ADDR", "add", "rcx", "1"});
  TransformSpec spec;
  for (auto k : {TransformKind::kRegisterRename, TransformKind::kInstructionReorder,
                 TransformKind::kNopInsertion, TransformKind::kOperandSynonym,
                 TransformKind::kBlockSplit}) {
    spec.transforms.push_back({k, 0.0});
  }
  Rng rng(0);
  EXPECT_EQ(synth_augment(in, spec, env.lex, rng).tokens, in.tokens);
}

TEST(Augment, NopInsertionBounds) {
  Env env;
  const auto in = env.instance({"mov", "add", "sub", "xor", "and", "or", "cmp", "test", "lea", "ret"});
  const TokenId nop = env.vocab.lookup("nop");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto out = synth_augment(in, only(TransformKind::kNopInsertion, 0.5), env.lex, rng);
    EXPECT_GE(out.tokens.size(), 10u);
    EXPECT_LE(out.tokens.size(), 15u);
    std::vector<TokenId> stripped;
    std::copy_if(out.tokens.begin(), out.tokens.end(), std::back_inserter(stripped),
                 [&](TokenId t) { return t != nop; });
    EXPECT_EQ(stripped, in.tokens);
  }
}

TEST(Augment, FullRenameIsAPermutation) {
  Env env;
  std::vector<std::string> toks;
  for (const auto& cls : lexicon::register_classes()) {
    for (auto r : cls) {
      toks.push_back("mov");
      toks.emplace_back(r);
    }
  }
  const auto in = env.instance(toks);
  Rng rng(11);
  const auto out = synth_augment(in, only(TransformKind::kRegisterRename, 1.0), env.lex, rng);
  ASSERT_EQ(out.tokens.size(), in.tokens.size());
  std::map<TokenId, TokenId> mapping;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < in.tokens.size(); ++i) {
    auto [it, fresh] = mapping.emplace(in.tokens[i], out.tokens[i]);
    EXPECT_EQ(it->second, out.tokens[i]) << "inconsistent mapping";
    changed += in.tokens[i] != out.tokens[i];
  }
  std::set<TokenId> images;
  for (const auto& [from, to] : mapping) images.insert(to);
  EXPECT_EQ(images.size(), mapping.size()) << "mapping is not injective";
  // Each image is itself mapped back (pairs swap).
  for (const auto& [from, to] : mapping) EXPECT_EQ(mapping.at(to), from);
  for (auto fixed : {"rsp", "rbp", "esp", "ebp"}) {
    EXPECT_EQ(mapping.at(env.vocab.lookup(fixed)), env.vocab.lookup(fixed));
  }
  EXPECT_GT(changed, in.tokens.size() / 4);
}

TEST(Augment, SynonymSubstitution) {
  Env env;
  const auto in = env.instance({"je", "ADDR", "jne", "ADDR", "shl", "rax", "1"});
  Rng rng(0);
  const auto out = synth_augment(in, only(TransformKind::kOperandSynonym, 1.0), env.lex, rng);
  EXPECT_EQ(env.vocab.decode(out.tokens),
            (std::vector<std::string>{"jz", "ADDR", "jnz", "ADDR", "sal", "rax", "1"}));
}

TEST(Augment, BlockSplitInsertsJumps) {
  Env env;
  std::vector<std::string> toks;
  for (int i = 0; i < 200; ++i) toks.push_back(i % 2 ? "add" : "mov");
  const auto in = env.instance(toks);
  Rng rng(5);
  const auto out = synth_augment(in, only(TransformKind::kBlockSplit, 1.0), env.lex, rng);
  const auto jumps = std::count(out.tokens.begin(), out.tokens.end(), env.vocab.lookup("jmp"));
  EXPECT_GT(jumps, 20);
  EXPECT_LT(jumps, 90);
  EXPECT_EQ(out.tokens.size(), in.tokens.size() + 2 * static_cast<std::size_t>(jumps));
}

TEST(Augment, ReorderKeepsTokenMultiset) {
  Env env;
  const auto in = env.instance(
      {"mov", "rax", "1", "add", "rbx", "2", "sub", "rcx", "3", "ret"});
  Rng rng(2);
  auto out = synth_augment(in, only(TransformKind::kInstructionReorder, 1.0), env.lex, rng);
  EXPECT_EQ(out.tokens.back(), env.vocab.lookup("ret"));
  auto a = in.tokens;
  std::sort(a.begin(), a.end());
  std::sort(out.tokens.begin(), out.tokens.end());
  EXPECT_EQ(a, out.tokens);
}

TEST(Augment, StrengthOutsideRangeRejected) {
  Env env;
  Rng rng(0);
  EXPECT_THROW(synth_augment(env.instance({"ret"}), only(TransformKind::kNopInsertion, 1.5),
                             env.lex, rng),
               InputError);
}

TEST(Augment, DeterministicGivenSeed) {
  Env env;
  const auto in = env.instance({"mov", "rax", "rbx", "add", "rcx", "1", "ret"});
  TransformSpec spec{{{TransformKind::kRegisterRename, 0.7},
                      {TransformKind::kNopInsertion, 0.4},
                      {TransformKind::kBlockSplit, 0.6}}};
  Rng a(9), b(9);
  const auto x = synth_augment(in, spec, env.lex, a);
  const auto y = synth_augment(in, spec, env.lex, b);
  EXPECT_EQ(x.tokens, y.tokens);
  EXPECT_EQ(x.instance_id, y.instance_id);
}

TEST(Fixture, ShapeAndStatistics) {
  const auto records = make_fixture({});
  const Corpus corpus = build_corpus(records);
  EXPECT_EQ(corpus.stats.groups, 500u);
  EXPECT_EQ(corpus.stats.instances, 2000u);
  EXPECT_LT(corpus.stats.oov_rate(), 0.01);
  EXPECT_GE(corpus.vocab.size(), 150u);
  EXPECT_LE(corpus.vocab.size(), 250u);
}

TEST(Fixture, PositivesShareMoreTokensThanNegatives) {
  FixtureConfig cfg;
  cfg.groups = 60;
  const Corpus corpus = build_corpus(make_fixture(cfg));
  auto jaccard = [](const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
    std::set<TokenId> sa(a.begin(), a.end()), sb(b.begin(), b.end()), inter;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::inserter(inter, inter.begin()));
    return double(inter.size()) / double(sa.size() + sb.size() - inter.size());
  };
  double pos = 0, neg = 0;
  for (std::size_t g = 0; g < corpus.groups.size(); ++g) {
    const auto& m = corpus.groups[g].members;
    pos += jaccard(m[0].tokens, m[1].tokens);
    neg += jaccard(m[0].tokens, corpus.groups[(g + 1) % corpus.groups.size()].members[1].tokens);
  }
  EXPECT_GT(pos, neg);
}

TEST(Fixture, Deterministic) {
  FixtureConfig cfg;
  cfg.groups = 20;
  const auto a = make_fixture(cfg);
  const auto b = make_fixture(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_jsonl(a[i]), to_jsonl(b[i]));
}
