#pragma once

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dan::env {

enum class Color { red, green, blue, yellow };
enum class ObjectShape { pillar, torch, keycard, skullkey, armor };
enum class Size { tall, short_ };

inline constexpr Color kAllColors[] = {Color::red, Color::green, Color::blue, Color::yellow};
inline constexpr ObjectShape kAllShapes[] = {ObjectShape::pillar, ObjectShape::torch, ObjectShape::keycard,
                                             ObjectShape::skullkey, ObjectShape::armor};
inline constexpr Size kAllSizes[] = {Size::tall, Size::short_};

std::string_view to_string(Color c);
std::string_view to_string(ObjectShape s);
std::string_view to_string(Size s);

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

inline int manhattan(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

struct ObjectSpec {
  Color color = Color::red;
  ObjectShape shape = ObjectShape::pillar;
  Size size = Size::tall;
  Cell position;
  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

// "go to the [size] [color] {shape|object}"; unspecified attributes match anything.
struct AttributePredicate {
  std::optional<Size> size;
  std::optional<Color> color;
  std::optional<ObjectShape> shape;
  friend bool operator==(const AttributePredicate&, const AttributePredicate&) = default;
};

enum class Superlative { tallest, shortest };

// "go to the tallest torch": resolved against the spawned set.
struct SuperlativePredicate {
  Superlative kind = Superlative::tallest;
  ObjectShape shape = ObjectShape::pillar;
  friend bool operator==(const SuperlativePredicate&, const SuperlativePredicate&) = default;
};

using Predicate = std::variant<AttributePredicate, SuperlativePredicate>;

// Canonical identity of a predicate, e.g. "attr:tall,green,pillar" or "sup:tallest,torch".
std::string predicate_key(const Predicate& p);

// Attribute-object combination a predicate names, "green pillar"; empty
// when the predicate does not pin both a color and a shape.
std::string combination_key(const Predicate& p);

struct Instruction {
  std::vector<std::string> tokens;
  Predicate predicate;

  std::string text() const;
  friend bool operator==(const Instruction& a, const Instruction& b) { return a.tokens == b.tokens; }
};

Instruction make_instruction(const Predicate& p);
// Lowercased whitespace split.
std::vector<std::string> tokenize(std::string_view text);
// Parses the grammar back into a predicate; throws std::invalid_argument.
Instruction parse_instruction(std::string_view text);

// Whether the object satisfies an attribute predicate on its own.
bool matches(const AttributePredicate& p, const ObjectSpec& o);

// Indices of correct objects in `objects` under the predicate.
std::vector<std::size_t> resolve(const Predicate& p, const std::vector<ObjectSpec>& objects);

}  // namespace dan::env
