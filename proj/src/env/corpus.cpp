#include "dan/env/corpus.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include "dan/random.hpp"

namespace dan::env {

std::vector<Predicate> enumerate_predicates(const GrammarVocabulary& vocab) {
  std::vector<Predicate> out;
  std::vector<std::optional<Size>> sizes{std::nullopt};
  for (Size s : vocab.sizes) sizes.emplace_back(s);
  std::vector<std::optional<Color>> colors{std::nullopt};
  for (Color c : vocab.colors) colors.emplace_back(c);

  for (const auto& shape : vocab.shapes) {
    for (const auto& color : colors) {
      for (const auto& size : sizes) out.push_back(AttributePredicate{size, color, shape});
    }
  }
  // "go to the [size] [color] object" needs at least one attribute.
  for (const auto& color : colors) {
    for (const auto& size : sizes) {
      if (color || size) out.push_back(AttributePredicate{size, color, std::nullopt});
    }
  }
  const bool has_tall = std::find(vocab.sizes.begin(), vocab.sizes.end(), Size::tall) != vocab.sizes.end();
  const bool has_short = std::find(vocab.sizes.begin(), vocab.sizes.end(), Size::short_) != vocab.sizes.end();
  if (has_tall && has_short) {
    for (ObjectShape shape : vocab.shapes) {
      out.push_back(SuperlativePredicate{Superlative::tallest, shape});
      out.push_back(SuperlativePredicate{Superlative::shortest, shape});
    }
  }
  return out;
}

Corpus build_corpus(std::uint64_t seed, const GrammarVocabulary& vocab) {
  const auto predicates = enumerate_predicates(vocab);
  const std::size_t needed = kTrainInstructions + kTestInstructions;
  if (predicates.size() < needed) {
    throw std::invalid_argument("instruction grammar yields " + std::to_string(predicates.size()) +
                                " distinct predicates, need at least " + std::to_string(needed));
  }
  if (vocab.colors.empty() || vocab.shapes.size() < 2) {
    throw std::invalid_argument("instruction grammar needs colors and at least two shapes");
  }

  Rng rng(mix_seed(seed, 0xC0));
  std::vector<Color> colors = vocab.colors;
  std::vector<ObjectShape> shapes = vocab.shapes;
  shuffle(colors, rng);
  shuffle(shapes, rng);

  // One held-out color per shape until five combinations are chosen.
  std::set<std::string> held_out;
  std::vector<std::string> held_order;
  for (std::size_t i = 0; held_order.size() * (vocab.sizes.size() + 1) < kTestInstructions; ++i) {
    if (i >= shapes.size() * colors.size()) throw std::invalid_argument("not enough color-shape combinations");
    AttributePredicate p{std::nullopt, colors[(i + i / shapes.size()) % colors.size()], shapes[i % shapes.size()]};
    std::string key = combination_key(p);
    if (held_out.insert(key).second) held_order.push_back(key);
  }

  Corpus corpus;
  std::vector<Predicate> pool;
  for (const auto& p : predicates) {
    if (held_out.count(combination_key(p))) {
      corpus.test.push_back(make_instruction(p));
    } else {
      pool.push_back(p);
    }
  }
  if (corpus.test.size() != kTestInstructions) {
    throw std::invalid_argument("held-out combinations yield " + std::to_string(corpus.test.size()) +
                                " test instructions, need " + std::to_string(kTestInstructions));
  }
  if (pool.size() < kTrainInstructions) throw std::invalid_argument("not enough predicates left for training");

  // Resample until every attribute word of the held-out combinations also
  // occurs in training, so that zero-shot tests composition, not vocabulary.
  std::vector<std::string> required;
  for (const auto& ins : corpus.test) {
    for (const auto& t : ins.tokens) required.push_back(t);
  }
  for (int attempt = 0;; ++attempt) {
    if (attempt > 1000) throw std::invalid_argument("could not draw a training split covering the vocabulary");
    std::vector<Predicate> drawn = pool;
    shuffle(drawn, rng);
    drawn.resize(kTrainInstructions);
    std::set<std::string> seen;
    for (const auto& p : drawn) {
      for (const auto& t : make_instruction(p).tokens) seen.insert(t);
    }
    bool covered = std::all_of(required.begin(), required.end(), [&](const std::string& t) { return seen.count(t); });
    if (!covered) continue;
    std::stable_sort(drawn.begin(), drawn.end(),
                     [&](const Predicate& a, const Predicate& b) { return predicate_key(a) < predicate_key(b); });
    for (const auto& p : drawn) corpus.train.push_back(make_instruction(p));
    break;
  }
  return corpus;
}

SplitAudit audit_split(const Corpus& corpus) {
  SplitAudit audit;
  audit.sizes_ok = corpus.train.size() == kTrainInstructions && corpus.test.size() == kTestInstructions;
  if (!audit.sizes_ok) {
    audit.problems.push_back("split sizes " + std::to_string(corpus.train.size()) + "/" +
                             std::to_string(corpus.test.size()));
  }
  std::set<std::string> train_keys, train_combos;
  for (const auto& ins : corpus.train) {
    train_keys.insert(predicate_key(ins.predicate));
    if (auto c = combination_key(ins.predicate); !c.empty()) train_combos.insert(c);
  }
  audit.disjoint = true;
  audit.combinations_unseen = true;
  for (const auto& ins : corpus.test) {
    if (train_keys.count(predicate_key(ins.predicate))) {
      audit.disjoint = false;
      audit.problems.push_back("'" + ins.text() + "' appears in both splits");
    }
    auto c = combination_key(ins.predicate);
    if (c.empty() || train_combos.count(c)) {
      audit.combinations_unseen = false;
      audit.problems.push_back("'" + ins.text() + "' does not name an unseen combination");
    }
  }
  return audit;
}

void write_corpus(std::ostream& os, const Corpus& corpus) {
  os << "[train]\n";
  for (const auto& ins : corpus.train) os << ins.text() << '\n';
  os << "[test]\n";
  for (const auto& ins : corpus.test) os << ins.text() << '\n';
}

Corpus read_corpus(std::istream& is) {
  Corpus corpus;
  std::vector<Instruction>* section = nullptr;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (tokenize(line).empty()) continue;
    if (line == "[train]") {
      section = &corpus.train;
    } else if (line == "[test]") {
      section = &corpus.test;
    } else if (!section) {
      throw std::invalid_argument("corpus line " + std::to_string(lineno) + " precedes any section header");
    } else {
      section->push_back(parse_instruction(line));
    }
  }
  return corpus;
}

std::vector<std::string> corpus_words(const Corpus& corpus) {
  std::set<std::string> words;
  for (const auto* split : {&corpus.train, &corpus.test}) {
    for (const auto& ins : *split) words.insert(ins.tokens.begin(), ins.tokens.end());
  }
  return {words.begin(), words.end()};
}

}  // namespace dan::env
