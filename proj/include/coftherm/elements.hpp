#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace coftherm {

/// Standard atomic weight (amu, IUPAC abridged values) for an element
/// symbol. Symbols are case-normalized ("c" and "C" both resolve).
std::optional<double> atomic_mass(std::string_view symbol);

/// Single-bond covalent radius in Angstrom (Cordero et al. 2008 table).
std::optional<double> covalent_radius(std::string_view symbol);

/// Canonical capitalization ("CL" -> "Cl"); empty when not an element.
std::string normalize_symbol(std::string_view symbol);

} // namespace coftherm
