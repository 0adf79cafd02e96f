#include "coftherm/bondgraph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "coftherm/elements.hpp"
#include "coftherm/error.hpp"

namespace coftherm {

BondGraph::BondGraph(std::vector<std::vector<Edge>> adjacency) : adjacency_(std::move(adjacency)) {
  for (auto& list : adjacency_) {
    std::sort(list.begin(), list.end());
    directed_edges_ += list.size();
  }
}

std::vector<std::size_t> BondGraph::neighbor_atoms(std::size_t i) const {
  std::vector<std::size_t> out;
  for (const auto& e : adjacency_[i])
    if (e.neighbor != i && (out.empty() || out.back() != e.neighbor)) out.push_back(e.neighbor);
  return out;
}

namespace {

int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::vector<double> radii_of(const Structure& s) {
  std::vector<double> r(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto rad = covalent_radius(s.atoms()[i].element);
    if (!rad) throw InvalidInput("no covalent radius for element " + s.atoms()[i].element);
    r[i] = *rad;
  }
  return r;
}

} // namespace

BondGraph build_bond_graph(const Structure& s, double scale) {
  if (!(scale >= 1.0 && scale <= 1.5))
    throw InvalidInput("bond scale factor must lie in [1.0, 1.5]");
  const std::size_t n = s.size();
  const auto radii = radii_of(s);
  const double r_max = n ? *std::max_element(radii.begin(), radii.end()) : 0.0;
  const double cutoff = std::max(2.0 * scale * r_max, kOverlapDistance);
  const Vec3& L = s.cell_lengths();

  std::array<int, 3> nb{};
  std::array<int, 3> reach{};
  for (int d = 0; d < 3; ++d) {
    nb[d] = std::max(1, static_cast<int>(std::floor(L[d] / cutoff)));
    const double width = L[d] / nb[d];
    reach[d] = static_cast<int>(std::ceil(cutoff / width));
  }
  const auto bin_index = [&](int x, int y, int z) {
    return static_cast<std::size_t>((z * nb[1] + y) * nb[0] + x);
  };

  std::vector<std::array<int, 3>> atom_bin(n);
  std::vector<std::vector<std::size_t>> bins(static_cast<std::size_t>(nb[0] * nb[1] * nb[2]));
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d)
      atom_bin[i][d] = std::min(nb[d] - 1, static_cast<int>(s.atoms()[i].frac[d] * nb[d]));
    bins[bin_index(atom_bin[i][0], atom_bin[i][1], atom_bin[i][2])].push_back(i);
  }

  std::vector<std::vector<Edge>> adjacency(n);
  std::optional<std::string> overlap;

#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 ri = s.cartesian(i);
    const auto& b = atom_bin[i];
    for (int dz = -reach[2]; dz <= reach[2]; ++dz)
      for (int dy = -reach[1]; dy <= reach[1]; ++dy)
        for (int dx = -reach[0]; dx <= reach[0]; ++dx) {
          const std::array<int, 3> ub{b[0] + dx, b[1] + dy, b[2] + dz};
          ImageShift shift{};
          std::array<int, 3> wb{};
          for (int d = 0; d < 3; ++d) {
            shift[d] = floor_div(ub[d], nb[d]);
            wb[d] = ub[d] - shift[d] * nb[d];
          }
          for (std::size_t j : bins[bin_index(wb[0], wb[1], wb[2])]) {
            if (j == i && is_zero(shift)) continue;
            const Vec3 rj = s.cartesian(j);
            double d2 = 0.0;
            for (int d = 0; d < 3; ++d) {
              const double dd = rj[d] + shift[d] * L[d] - ri[d];
              d2 += dd * dd;
            }
            const double dist = std::sqrt(d2);
            if (dist < kOverlapDistance) {
#pragma omp critical(coftherm_overlap)
              if (!overlap)
                overlap = "overlapping atoms " + std::to_string(std::min(i, j)) + " and " +
                          std::to_string(std::max(i, j)) + " at distance " +
                          format_double(dist) + " A";
              continue;
            }
            if (dist <= scale * (radii[i] + radii[j])) adjacency[i].push_back({j, shift, dist});
          }
        }
  }
  if (overlap) throw InvalidInput(*overlap);
  return BondGraph(std::move(adjacency));
}

namespace {

struct UndirectedBond {
  std::size_t u, v;
  ImageShift shift; // v sits in image `shift` relative to u
};

/// Biconnected blocks of the multigraph with images identified, as lists of
/// bond ids. Parallel bonds are distinct edges; self-loops are left out.
std::vector<std::vector<std::size_t>> biconnected_blocks(std::size_t n,
                                                         const std::vector<UndirectedBond>& bonds) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> inc(n); // (bond, other)
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    if (bonds[b].u == bonds[b].v) continue;
    inc[bonds[b].u].push_back({b, bonds[b].v});
    inc[bonds[b].v].push_back({b, bonds[b].u});
  }
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> disc(n, kNone), low(n, 0);
  struct Frame {
    std::size_t u, parent_bond, next;
  };
  std::vector<Frame> frames;
  std::vector<std::size_t> bond_stack;
  std::vector<std::vector<std::size_t>> blocks;
  std::size_t time = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] != kNone) continue;
    disc[root] = low[root] = time++;
    frames.push_back({root, kNone, 0});
    while (!frames.empty()) {
      Frame& f = frames.back();
      const std::size_t u = f.u;
      if (f.next < inc[u].size()) {
        const auto [b, w] = inc[u][f.next++];
        if (b == f.parent_bond) continue;
        if (disc[w] == kNone) {
          bond_stack.push_back(b);
          disc[w] = low[w] = time++;
          frames.push_back({w, b, 0});
        } else if (disc[w] < disc[u]) {
          bond_stack.push_back(b);
          low[u] = std::min(low[u], disc[w]);
        }
        continue;
      }
      const std::size_t pb = f.parent_bond;
      frames.pop_back();
      if (frames.empty()) break;
      const std::size_t p = frames.back().u;
      low[p] = std::min(low[p], low[u]);
      if (low[u] >= disc[p]) {
        std::vector<std::size_t> block;
        std::size_t b;
        do {
          b = bond_stack.back();
          bond_stack.pop_back();
          block.push_back(b);
        } while (b != pb);
        blocks.push_back(std::move(block));
      }
    }
  }
  return blocks;
}

/// True when some cycle of the block has a nonzero net lattice translation.
bool block_winds(const std::vector<UndirectedBond>& bonds, const std::vector<std::size_t>& block) {
  std::vector<std::size_t> atoms;
  for (auto b : block) {
    atoms.push_back(bonds[b].u);
    atoms.push_back(bonds[b].v);
  }
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  const auto local = [&](std::size_t a) {
    return static_cast<std::size_t>(std::lower_bound(atoms.begin(), atoms.end(), a) - atoms.begin());
  };
  std::vector<std::vector<std::size_t>> inc(atoms.size());
  for (auto b : block) {
    inc[local(bonds[b].u)].push_back(b);
    inc[local(bonds[b].v)].push_back(b);
  }
  std::vector<std::optional<ImageShift>> image(atoms.size());
  image[0] = ImageShift{0, 0, 0};
  std::vector<std::size_t> queue{0};
  for (std::size_t h = 0; h < queue.size(); ++h) {
    const std::size_t lu = queue[h];
    const ImageShift pu = *image[lu];
    for (auto b : inc[lu]) {
      const auto& bond = bonds[b];
      const bool forward = local(bond.u) == lu;
      const std::size_t lw = local(forward ? bond.v : bond.u);
      const int sign = forward ? 1 : -1;
      const ImageShift pw{pu[0] + sign * bond.shift[0], pu[1] + sign * bond.shift[1],
                          pu[2] + sign * bond.shift[2]};
      if (!image[lw]) {
        image[lw] = pw;
        queue.push_back(lw);
      } else if (*image[lw] != pw) {
        return true;
      }
    }
  }
  return false;
}

} // namespace

std::vector<std::size_t> boundary_atoms(const BondGraph& g) {
  std::vector<UndirectedBond> bonds;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (const auto& e : g.neighbors(i)) {
      const ImageShift zero{0, 0, 0};
      if (i < e.neighbor || (i == e.neighbor && zero < e.shift)) bonds.push_back({i, e.neighbor, e.shift});
    }
  std::vector<char> mark(g.size(), 0);
  for (const auto& b : bonds)
    if (b.u == b.v) mark[b.u] = 1; // a bond to its own image winds by itself
  for (const auto& block : biconnected_blocks(g.size(), bonds)) {
    if (!block_winds(bonds, block)) continue;
    for (auto b : block)
      if (!is_zero(bonds[b].shift)) mark[bonds[b].u] = mark[bonds[b].v] = 1;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (mark[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> component_labels(const BondGraph& g, std::size_t* n_components) {
  const std::size_t n = g.size();
  std::vector<std::size_t> label(n, n);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (label[root] != n) continue;
    label[root] = next;
    stack.push_back(root);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (const auto& e : g.neighbors(u))
        if (label[e.neighbor] == n) {
          label[e.neighbor] = next;
          stack.push_back(e.neighbor);
        }
    }
    ++next;
  }
  if (n_components) *n_components = next;
  return label;
}

namespace {

bool canonical_direction(std::size_t i, const Edge& e) {
  if (i != e.neighbor) return i < e.neighbor;
  const ImageShift zero{0, 0, 0};
  return zero < e.shift;
}

} // namespace

std::string graph_to_dot(const BondGraph& g, const Structure& s) {
  std::ostringstream out;
  out << "graph bonds {\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    out << "  " << i << " [label=\"" << s.atoms()[i].element << i << "\"];\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    for (const auto& e : g.neighbors(i)) {
      if (!canonical_direction(i, e)) continue;
      out << "  " << i << " -- " << e.neighbor;
      if (!is_zero(e.shift))
        out << " [style=dashed, label=\"" << e.shift[0] << "," << e.shift[1] << "," << e.shift[2]
            << "\"]";
      out << ";\n";
    }
  out << "}\n";
  return out.str();
}

std::string graph_to_csv(const BondGraph& g) {
  std::ostringstream out;
  out << "i,j,shift_x,shift_y,shift_z,length_A\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    for (const auto& e : g.neighbors(i))
      if (canonical_direction(i, e))
        out << i << "," << e.neighbor << "," << e.shift[0] << "," << e.shift[1] << ","
            << e.shift[2] << "," << format_double(e.length) << "\n";
  return out.str();
}

} // namespace coftherm
