#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dan/env/instruction.hpp"

namespace dan::env {

inline constexpr std::size_t kTrainInstructions = 55;
inline constexpr std::size_t kTestInstructions = 15;

// Attribute words the grammar may draw on.
struct GrammarVocabulary {
  std::vector<Color> colors{std::begin(kAllColors), std::end(kAllColors)};
  std::vector<ObjectShape> shapes{std::begin(kAllShapes), std::end(kAllShapes)};
  std::vector<Size> sizes{std::begin(kAllSizes), std::end(kAllSizes)};
};

struct Corpus {
  std::vector<Instruction> train;
  std::vector<Instruction> test;
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Every distinct predicate the grammar produces, in a fixed order.
std::vector<Predicate> enumerate_predicates(const GrammarVocabulary& vocab = {});

// Deterministic 55/15 split. The test split holds every sized and unsized
// form of five held-out color-shape combinations; no train predicate names
// any of those combinations. Throws std::invalid_argument when the grammar
// yields fewer than 70 predicates.
Corpus build_corpus(std::uint64_t seed, const GrammarVocabulary& vocab = {});

struct SplitAudit {
  bool sizes_ok = false;
  bool disjoint = false;              // no predicate in both splits
  bool combinations_unseen = false;   // test combinations never named in train
  std::vector<std::string> problems;
  bool ok() const { return sizes_ok && disjoint && combinations_unseen; }
};

SplitAudit audit_split(const Corpus& corpus);

void write_corpus(std::ostream& os, const Corpus& corpus);
Corpus read_corpus(std::istream& is);

// Sorted distinct tokens of both splits.
std::vector<std::string> corpus_words(const Corpus& corpus);

}  // namespace dan::env
