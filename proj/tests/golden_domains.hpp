#pragma once

#include "eif/domains.hpp"

#include <map>
#include <string>
#include <vector>

namespace eif::golden {

// Reference template listings, slots written {Name}; multi-sentence entries joined by a space.
inline const std::map<DomainKind, std::vector<std::string>>& golden() {
  static const std::map<DomainKind, std::vector<std::string>> g = {
      {DomainKind::belongs_to,
       {"{A} belongs to the set of {C}.",
        "{A} belongs to the set of {B}.",
        "{B} is a set that contains {A}.",
        "{B} belongs to the set of {A}.",
        "{A} does not belong to the set of {C}.",
        "{A} might belong to the set of {C}.",
        "{B} belongs to the set of {C}.",
        "{A} belongs to the set of {B} and {B} belongs to the set of {C}.",
        "{A} belongs to the set of {B}. {B} belongs to the set of {C}.",
        "Frogs and toads often hibernate in winter."}},
      {DomainKind::chain_induces,
       {"Whenever {A} happens, it causes {Z} to happen.",
        "Whenever {A} happens, it causes {B} to happen.",
        "Whenever {A} happens, it causes {B} to happen. Whenever {B} happens, it causes {Z} to happen.",
        "Whenever {A} happens, it causes {B} to happen. Whenever {B} happens, it causes {C} to happen. "
        "Whenever {C} happens, it causes {D} to happen. Whenever {D} happens, it causes {Z} to happen.",
        "Whenever {Z} happens, it causes {A} to happen."}},
      {DomainKind::transitivity,
       {"a {A} is a {B} all {B}s have a {C}",
        "a {A} is a {B}",
        "all {B}s have a {C}",
        "one example of a {B} is a {A}",
        "a {A} is not a {B}",
        "a {A} has a {C}",
        "{A}s have {C}s",
        "a {A} does not have a {C}",
        "{A}",
        "{C}",
        "{B}",
        "a {X} is a {Y}"}},
      {DomainKind::squares,
       {"SQUARE belongs to the set of {B}.",
        "{B} belongs to the set of RECTANGLE.",
        "SQUARE belongs to the set of {B} and {B} belongs to the set of RECTANGLE.",
        "SQUARE belongs to the set of {B}. {B} belongs to the set of RECTANGLE.",
        "{B} belongs to the set of SQUARE. {B} belongs to the set of RECTANGLE.",
        "RECTANGLE belongs to the set of SQUARE."}},
  };
  return g;
}

inline std::string unbind(std::string text, const std::map<std::string, std::string>& bindings) {
  for (const auto& [slot, word] : bindings)
    for (auto pos = text.find(word); pos != std::string::npos; pos = text.find(word, pos))
      text.replace(pos, word.size(), "{" + slot + "}");
  return text;
}

} // namespace eif::golden
