#include "piezo/types.hpp"

#include "piezo/errors.hpp"

#include <string>

namespace piezo {

std::string_view name(Element e) {
  switch (e) {
    case Element::S1: return "S1";
    case Element::S2: return "S2";
    case Element::C1: return "C1";
    case Element::C2: return "C2";
  }
  return "?";
}

std::string_view name(Direction d) { return d == Direction::Plus ? "+" : "-"; }

Element parse_element(std::string_view s) {
  for (Element e : kAllElements)
    if (name(e) == s) return e;
  throw ParameterError("unknown element '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
  if (s == "+" || s == "plus") return Direction::Plus;
  if (s == "-" || s == "minus") return Direction::Minus;
  throw ParameterError("unknown direction '" + std::string(s) + "'");
}

}  // namespace piezo
