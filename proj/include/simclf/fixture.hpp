#pragma once

#include <cstdint>
#include <vector>

#include "simclf/corpus.hpp"

namespace simclf {

// Synthetic corpus: each group is a random base function drawn from the
// built-in lexicon with Zipf-distributed mnemonics and registers; every
// variant is an independent synth_augment view of it.
struct FixtureConfig {
  std::size_t groups = 500;
  std::size_t variants = 4;
  std::size_t min_instructions = 10;
  std::size_t max_instructions = 20;
  // Per-variant strengths are drawn uniformly from [0, max].
  double rename_max = 1.0;
  double reorder_max = 0.0;
  double nop_max = 1.0;
  double synonym_max = 0.0;
  double split_max = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Variants carry distinct real-looking arch/opt/obf labels so the records
// pass duplicate checks; their tokens come from the augmenter.
std::vector<RawFunction> make_fixture(const FixtureConfig& config);

}  // namespace simclf
