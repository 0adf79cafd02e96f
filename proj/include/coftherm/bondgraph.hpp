#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "coftherm/structio.hpp"

namespace coftherm {

using ImageShift = std::array<int, 3>;

inline bool is_zero(const ImageShift& s) { return s[0] == 0 && s[1] == 0 && s[2] == 0; }

/// Directed half of an undirected periodic bond: the neighbor sits in the
/// periodic image `shift` relative to the owning atom's home cell.
struct Edge {
  std::size_t neighbor = 0;
  ImageShift shift{0, 0, 0};
  double length = 0.0; ///< Å

  friend bool operator<(const Edge& a, const Edge& b) {
    if (a.neighbor != b.neighbor) return a.neighbor < b.neighbor;
    return a.shift < b.shift;
  }
};

/// Undirected periodic bond graph. Every edge (i -> j, s) has its mirror
/// (j -> i, -s); adjacency lists are sorted by (neighbor, shift).
class BondGraph {
public:
  BondGraph() = default;
  explicit BondGraph(std::vector<std::vector<Edge>> adjacency);

  std::size_t size() const noexcept { return adjacency_.size(); }
  const std::vector<Edge>& neighbors(std::size_t i) const { return adjacency_[i]; }
  /// Number of undirected bonds.
  std::size_t edge_count() const noexcept { return directed_edges_ / 2; }

  /// Distinct neighbor atom indices (image shifts collapsed, no self).
  std::vector<std::size_t> neighbor_atoms(std::size_t i) const;

private:
  std::vector<std::vector<Edge>> adjacency_;
  std::size_t directed_edges_ = 0;
};

inline constexpr double kDefaultBondScale = 1.15;
inline constexpr double kOverlapDistance = 0.5; ///< Å

/// Bonds every pair whose periodic distance is <= scale * (r_i + r_j)
/// using covalent radii. Neighbor search uses cell lists and runs in
/// parallel over atoms. Throws InvalidInput for atoms closer than 0.5 Å.
BondGraph build_bond_graph(const Structure& s, double scale = kDefaultBondScale);

/// Atoms incident to a bond that crosses the cell boundary and lies on a
/// cycle with nonzero lattice translation. Pendant groups that merely
/// straddle the boundary do not count, so the set is independent of the
/// choice of cell origin.
std::vector<std::size_t> boundary_atoms(const BondGraph& g);

/// Connected components of the graph with periodic images identified.
std::vector<std::size_t> component_labels(const BondGraph& g, std::size_t* n_components = nullptr);

std::string graph_to_dot(const BondGraph& g, const Structure& s);
std::string graph_to_csv(const BondGraph& g);

} // namespace coftherm
