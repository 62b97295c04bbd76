#include "dan/env/instruction.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

namespace dan::env {

std::string_view to_string(Color c) {
  switch (c) {
    case Color::red: return "red";
    case Color::green: return "green";
    case Color::blue: return "blue";
    case Color::yellow: return "yellow";
  }
  throw std::invalid_argument("bad color");
}

std::string_view to_string(ObjectShape s) {
  switch (s) {
    case ObjectShape::pillar: return "pillar";
    case ObjectShape::torch: return "torch";
    case ObjectShape::keycard: return "keycard";
    case ObjectShape::skullkey: return "skullkey";
    case ObjectShape::armor: return "armor";
  }
  throw std::invalid_argument("bad shape");
}

std::string_view to_string(Size s) { return s == Size::tall ? "tall" : "short"; }

namespace {

std::string_view to_string(Superlative s) { return s == Superlative::tallest ? "tallest" : "shortest"; }

template <class Enum, std::size_t N>
std::optional<Enum> lookup(const Enum (&all)[N], std::string_view word) {
  for (Enum e : all) {
    if (to_string(e) == word) return e;
  }
  return std::nullopt;
}

}  // namespace

std::string predicate_key(const Predicate& p) {
  if (const auto* a = std::get_if<AttributePredicate>(&p)) {
    std::string key = "attr:";
    key += a->size ? to_string(*a->size) : "*";
    key += ',';
    key += a->color ? to_string(*a->color) : "*";
    key += ',';
    key += a->shape ? to_string(*a->shape) : "*";
    return key;
  }
  const auto& s = std::get<SuperlativePredicate>(p);
  return "sup:" + std::string(to_string(s.kind)) + "," + std::string(to_string(s.shape));
}

std::string combination_key(const Predicate& p) {
  const auto* a = std::get_if<AttributePredicate>(&p);
  if (!a || !a->color || !a->shape) return {};
  return std::string(to_string(*a->color)) + " " + std::string(to_string(*a->shape));
}

std::string Instruction::text() const {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

Instruction make_instruction(const Predicate& p) {
  Instruction ins;
  ins.predicate = p;
  ins.tokens = {"go", "to", "the"};
  if (const auto* a = std::get_if<AttributePredicate>(&p)) {
    if (a->size) ins.tokens.emplace_back(to_string(*a->size));
    if (a->color) ins.tokens.emplace_back(to_string(*a->color));
    ins.tokens.emplace_back(a->shape ? to_string(*a->shape) : "object");
  } else {
    const auto& s = std::get<SuperlativePredicate>(p);
    ins.tokens.emplace_back(to_string(s.kind));
    ins.tokens.emplace_back(to_string(s.shape));
  }
  return ins;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Instruction parse_instruction(std::string_view text) {
  const auto tokens = tokenize(text);
  auto fail = [&](const std::string& why) {
    return std::invalid_argument("cannot parse instruction '" + std::string(text) + "': " + why);
  };
  if (tokens.size() < 4 || tokens[0] != "go" || tokens[1] != "to" || tokens[2] != "the") {
    throw fail("expected 'go to the ...'");
  }
  std::size_t i = 3;
  if (tokens.size() == 5) {
    if (tokens[3] == "tallest" || tokens[3] == "shortest") {
      auto shape = lookup(kAllShapes, tokens[4]);
      if (!shape) throw fail("unknown shape '" + tokens[4] + "'");
      SuperlativePredicate s{tokens[3] == "tallest" ? Superlative::tallest : Superlative::shortest, *shape};
      return make_instruction(s);
    }
  }
  AttributePredicate a;
  if (i < tokens.size()) {
    if (auto s = lookup(kAllSizes, tokens[i])) {
      a.size = s;
      ++i;
    }
  }
  if (i < tokens.size()) {
    if (auto c = lookup(kAllColors, tokens[i])) {
      a.color = c;
      ++i;
    }
  }
  if (i + 1 != tokens.size()) throw fail("unexpected words");
  if (tokens[i] != "object") {
    auto shape = lookup(kAllShapes, tokens[i]);
    if (!shape) throw fail("unknown shape '" + tokens[i] + "'");
    a.shape = shape;
  } else if (!a.size && !a.color) {
    throw fail("'object' needs a size or color");
  }
  Instruction ins = make_instruction(a);
  if (ins.tokens != tokens) throw fail("non-canonical word order");
  return ins;
}

bool matches(const AttributePredicate& p, const ObjectSpec& o) {
  return (!p.size || *p.size == o.size) && (!p.color || *p.color == o.color) && (!p.shape || *p.shape == o.shape);
}

std::vector<std::size_t> resolve(const Predicate& p, const std::vector<ObjectSpec>& objects) {
  std::vector<std::size_t> out;
  if (const auto* a = std::get_if<AttributePredicate>(&p)) {
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (matches(*a, objects[i])) out.push_back(i);
    }
    return out;
  }
  const auto& s = std::get<SuperlativePredicate>(p);
  const Size wanted = s.kind == Superlative::tallest ? Size::tall : Size::short_;
  // Two sizes only: the extreme object is one of the wanted size when present,
  // otherwise any object of the shape. Ties go to the lowest spawn index.
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].shape != s.shape) continue;
    if (!best || (objects[*best].size != wanted && objects[i].size == wanted)) best = i;
  }
  if (best) out.push_back(*best);
  return out;
}

}  // namespace dan::env
