#include "coftherm/dangling.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <limits>
#include <map>
#include <set>

#include "coftherm/error.hpp"

namespace coftherm {

std::string_view to_string(BranchLabel label) {
  switch (label) {
  case BranchLabel::Main: return "MAIN";
  case BranchLabel::Dangling: return "DANGLING";
  case BranchLabel::DanglingH: return "DANGLING_H";
  }
  return "?";
}

std::vector<std::size_t> Ring::unique_atoms() const {
  std::vector<std::size_t> u = atoms;
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

namespace {

struct Node {
  std::size_t atom;
  ImageShift shift;
  friend auto operator<=>(const Node&, const Node&) = default;
};

ImageShift add(const ImageShift& a, const ImageShift& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
ImageShift sub(const ImageShift& a, const ImageShift& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

// Rotation/reflection/translation-invariant key of a cycle.
std::vector<Node> canonical(const std::vector<Node>& cycle) {
  const std::size_t n = cycle.size();
  std::vector<Node> best;
  for (int dir = 0; dir < 2; ++dir)
    for (std::size_t start = 0; start < n; ++start) {
      std::vector<Node> cand(n);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = dir == 0 ? (start + k) % n : (start + n - k) % n;
        cand[k] = cycle[idx];
      }
      const ImageShift origin = cand[0].shift;
      for (auto& nd : cand) nd.shift = sub(nd.shift, origin);
      if (best.empty() || cand < best) best = std::move(cand);
    }
  return best;
}

// Shortest cycle through edge (u,0)-(v,s), as a node sequence starting at u.
std::vector<Node> shortest_cycle_through(const BondGraph& g, std::size_t u, const Edge& e,
                                         std::size_t max_size) {
  const Node start{e.neighbor, e.shift};
  const Node target{u, {0, 0, 0}};
  std::map<Node, Node> parent;
  std::map<Node, std::size_t> depth;
  std::deque<Node> queue{start};
  depth[start] = 0;
  while (!queue.empty()) {
    const Node cur = queue.front();
    queue.pop_front();
    const std::size_t dcur = depth[cur];
    if (dcur + 1 > max_size - 1) continue; // cycle length = path edges + 1
    for (const auto& nb : g.neighbors(cur.atom)) {
      const Node next{nb.neighbor, add(cur.shift, nb.shift)};
      if (cur == start && next == target) continue; // the bond itself
      if (depth.count(next)) continue;
      depth[next] = dcur + 1;
      parent[next] = cur;
      if (next == target) {
        std::vector<Node> path{target};
        Node walk = target;
        while (!(walk == start)) {
          walk = parent.at(walk);
          path.push_back(walk);
        }
        // path runs target ... start; the closing bond start -> target is implied
        return path;
      }
      queue.push_back(next);
    }
  }
  return {};
}

} // namespace

std::vector<Ring> find_rings(const BondGraph& g, std::size_t max_size) {
  if (max_size < 3 || max_size > 12) throw InvalidInput("max ring size must lie in [3, 12]");

  std::vector<std::pair<std::size_t, Edge>> bonds;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (const auto& e : g.neighbors(i)) {
      const ImageShift zero{0, 0, 0};
      if (i < e.neighbor || (i == e.neighbor && zero < e.shift)) bonds.emplace_back(i, e);
    }

  std::vector<std::vector<Node>> found(bonds.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    auto cyc = shortest_cycle_through(g, bonds[b].first, bonds[b].second, max_size);
    if (!cyc.empty()) found[b] = canonical(cyc);
  }

  std::set<std::vector<Node>> unique;
  for (auto& c : found)
    if (!c.empty()) unique.insert(std::move(c));

  std::vector<Ring> rings;
  rings.reserve(unique.size());
  for (const auto& c : unique) {
    Ring r;
    for (const auto& nd : c) {
      r.atoms.push_back(nd.atom);
      r.shifts.push_back(nd.shift);
    }
    rings.push_back(std::move(r));
  }
  std::stable_sort(rings.begin(), rings.end(),
                   [](const Ring& a, const Ring& b) { return a.size() < b.size(); });
  return rings;
}

double compute_dmr(std::span<const BranchLabel> labels, const Structure& s, bool exclude_h) {
  if (labels.size() != s.size()) throw InvalidInput("label count does not match atom count");
  double dangling = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double m = s.atoms()[i].mass;
    total += m;
    if (labels[i] == BranchLabel::Dangling ||
        (labels[i] == BranchLabel::DanglingH && !exclude_h))
      dangling += m;
  }
  if (!(total > 0.0)) throw InvalidInput("total mass is zero (empty structure)");
  return dangling / total;
}

BranchLabeling classify_branches(const BondGraph& g, const Structure& s,
                                 const ClassifyOptions& opt) {
  const std::size_t n = g.size();
  if (n != s.size()) throw InvalidInput("graph and structure sizes differ");
  const auto boundary = boundary_atoms(g);
  if (boundary.empty())
    throw InvalidInput("no boundary atoms: the structure is molecular, not periodic");
  std::size_t n_comp = 0;
  component_labels(g, &n_comp);
  if (n_comp > 1)
    throw InvalidInput("bond graph is disconnected (" + std::to_string(n_comp) +
                       " components with periodic images identified)");

  std::vector<char> main(n, 0);
  for (auto b : boundary) main[b] = 1;

  // Paths run on the periodic graph lifted to the 3x3x3 block of images
  // around the home cell; node = atom * 27 + image code.
  constexpr std::size_t kImages = 27;
  const auto code = [](const ImageShift& s) -> std::size_t {
    if (std::abs(s[0]) > 1 || std::abs(s[1]) > 1 || std::abs(s[2]) > 1) return kImages;
    return static_cast<std::size_t>((s[0] + 1) * 9 + (s[1] + 1) * 3 + (s[2] + 1));
  };
  const auto shift_of = [](std::size_t c) {
    return ImageShift{static_cast<int>(c / 9) - 1, static_cast<int>(c / 3 % 3) - 1,
                      static_cast<int>(c % 3) - 1};
  };
  const std::size_t home = code({0, 0, 0});
  std::vector<std::vector<std::size_t>> lifted(n * kImages);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < kImages; ++c) {
      const ImageShift base = shift_of(c);
      for (const auto& e : g.neighbors(i)) {
        const std::size_t d =
            code({base[0] + e.shift[0], base[1] + e.shift[1], base[2] + e.shift[2]});
        if (d < kImages) lifted[i * kImages + c].push_back(e.neighbor * kImages + d);
      }
    }

  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(n * kImages);
  std::vector<std::size_t> queue;
  queue.reserve(n * kImages);
  for (std::size_t ti = 1; ti < boundary.size(); ++ti) {
    const std::size_t t = boundary[ti] * kImages + home;
    std::fill(dist.begin(), dist.end(), kInf);
    queue.clear();
    dist[t] = 0;
    queue.push_back(t);
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const std::size_t u = queue[h];
      for (auto v : lifted[u])
        if (dist[v] == kInf) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
    }
    // greedy smallest-node descent gives the lexicographically smallest path
    for (std::size_t si = 0; si < ti; ++si) {
      std::size_t cur = boundary[si] * kImages + home;
      if (dist[cur] == kInf) continue;
      while (cur != t) {
        std::size_t next = kInf;
        for (auto v : lifted[cur])
          if (dist[v] != kInf && dist[v] + 1 == dist[cur] && v < next) next = v;
        cur = next;
        main[cur / kImages] = 1;
      }
    }
  }

  const auto rings = find_rings(g, opt.max_ring_size);
  std::vector<std::vector<std::size_t>> ring_atoms;
  ring_atoms.reserve(rings.size());
  for (const auto& r : rings) ring_atoms.push_back(r.unique_atoms());
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& members : ring_atoms) {
      const auto on_main = std::count_if(members.begin(), members.end(),
                                         [&](std::size_t a) { return main[a] != 0; });
      if (on_main > 3 && static_cast<std::size_t>(on_main) < members.size()) {
        for (auto a : members) main[a] = 1;
        changed = true;
      }
    }
  }

  BranchLabeling out;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (main[i]) {
      out.labels[i] = BranchLabel::Main;
      ++out.main_count;
    } else if (s.atoms()[i].element == "H") {
      out.labels[i] = BranchLabel::DanglingH;
      ++out.dangling_h_count;
    } else {
      out.labels[i] = BranchLabel::Dangling;
      ++out.dangling_count;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.total_mass += s.atoms()[i].mass;
    if (out.labels[i] == BranchLabel::Dangling ||
        (out.labels[i] == BranchLabel::DanglingH && !opt.exclude_h))
      out.dangling_mass += s.atoms()[i].mass;
  }
  out.dmr = compute_dmr(out.labels, s, opt.exclude_h);
  return out;
}

} // namespace coftherm
