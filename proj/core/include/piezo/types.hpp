#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace piezo {

// Element order is fixed throughout: two shears, then two clamps.
enum class Element : std::size_t { S1 = 0, S2 = 1, C1 = 2, C2 = 3 };
inline constexpr std::size_t kElementCount = 4;
inline constexpr std::array<Element, kElementCount> kAllElements{Element::S1, Element::S2, Element::C1,
                                                                 Element::C2};

enum class Direction : std::size_t { Plus = 0, Minus = 1 };
inline constexpr std::array<Direction, 2> kBothDirections{Direction::Plus, Direction::Minus};

template <class T>
using PerElement = std::array<T, kElementCount>;

template <class T>
using PerDirection = std::array<T, 2>;

constexpr std::size_t index(Element e) { return static_cast<std::size_t>(e); }
constexpr std::size_t index(Direction d) { return static_cast<std::size_t>(d); }

constexpr bool is_shear(Element e) { return e == Element::S1 || e == Element::S2; }
constexpr bool is_clamp(Element e) { return !is_shear(e); }

// Zero counts as forward motion.
constexpr Direction direction_of(double signed_rate) { return signed_rate >= 0.0 ? Direction::Plus : Direction::Minus; }

std::string_view name(Element e);
std::string_view name(Direction d);
Element parse_element(std::string_view s);
Direction parse_direction(std::string_view s);

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

}  // namespace piezo
