#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "coftherm/bondgraph.hpp"
#include "coftherm/structio.hpp"

namespace coftherm {

enum class BranchLabel { Main, Dangling, DanglingH };

std::string_view to_string(BranchLabel label);

struct BranchLabeling {
  std::vector<BranchLabel> labels;
  double dmr = 0.0;
  std::size_t main_count = 0;
  std::size_t dangling_count = 0;
  std::size_t dangling_h_count = 0;
  double dangling_mass = 0.0; ///< amu, DANGLING and DANGLING_H
  double total_mass = 0.0;    ///< amu
};

/// A ring as an ordered cycle of periodic nodes. `shifts[k]` is the image
/// of `atoms[k]` relative to the first member.
struct Ring {
  std::vector<std::size_t> atoms;
  std::vector<ImageShift> shifts;

  std::size_t size() const noexcept { return atoms.size(); }
  /// Sorted distinct atom indices.
  std::vector<std::size_t> unique_atoms() const;
};

inline constexpr std::size_t kDefaultMaxRingSize = 8;

/// Shortest ring through every bond (lattice-closed cycles only; cycles that
/// wind around the periodic cell are not rings). Each bond lying on a cycle
/// of length <= max_size is covered by at least one returned ring; rings are
/// deduplicated up to rotation, reflection and lattice translation.
std::vector<Ring> find_rings(const BondGraph& g, std::size_t max_size = kDefaultMaxRingSize);

struct ClassifyOptions {
  std::size_t max_ring_size = kDefaultMaxRingSize;
  /// When set, dangling hydrogens are left out of the DMR numerator.
  bool exclude_h = false;
};

/// Main branch = boundary atoms plus one shortest path (lexicographically
/// smallest node sequence) between every pair of home-cell boundary atoms,
/// searched over the images within one cell of home. A ring with more than three
/// main atoms is absorbed into the main branch entirely, repeated until no
/// ring changes. Everything else is dangling (DanglingH for hydrogen).
BranchLabeling classify_branches(const BondGraph& g, const Structure& s,
                                 const ClassifyOptions& opt = {});

/// Dangling mass over total mass. Throws on zero total mass.
double compute_dmr(std::span<const BranchLabel> labels, const Structure& s,
                   bool exclude_h = false);

} // namespace coftherm
