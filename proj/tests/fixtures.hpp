#pragma once

// Shared test fixtures and brute-force oracles. Nothing here is used by the
// library itself.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <queue>
#include <set>
#include <vector>

#include "coftherm/attention.hpp"
#include "coftherm/bondgraph.hpp"
#include "coftherm/mlkit.hpp"
#include "coftherm/nemd.hpp"
#include "coftherm/rng.hpp"
#include "coftherm/structio.hpp"

namespace fixtures {

using coftherm::Structure;
using coftherm::Vec3;

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("coftherm_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline constexpr double kCC = 1.42;

inline Structure from_cartesian(const std::string& name, Vec3 L,
                                const std::vector<std::pair<std::string, Vec3>>& atoms) {
  std::vector<Structure::AtomSite> sites;
  for (const auto& [el, r] : atoms) sites.push_back({el, {r[0] / L[0], r[1] / L[1], r[2] / L[2]}});
  return Structure(name, L, std::move(sites));
}

/// Rectangular graphene cell, 4 atoms, every atom has 3 bonds.
inline Structure honeycomb() {
  const double d = kCC;
  const double h = std::sqrt(3.0) / 2.0 * d;
  return from_cartesian("honeycomb", {3 * d, std::sqrt(3.0) * d, 10.0},
                        {{"C", {0, 0, 0}}, {"C", {d, 0, 0}}, {"C", {1.5 * d, h, 0}},
                         {"C", {2.5 * d, h, 0}}});
}

/// 2x2 honeycomb replica with a nitro group standing on atom 0.
inline Structure honeycomb_no2() {
  const Structure base = honeycomb().replicate(2, 2, 1);
  const Vec3 L = base.cell_lengths();
  std::vector<std::pair<std::string, Vec3>> atoms;
  for (std::size_t i = 0; i < base.size(); ++i) atoms.push_back({"C", base.cartesian(i)});
  const Vec3 n{0.0, 0.0, 1.47};
  atoms.push_back({"N", n});
  atoms.push_back({"O", {n[0] + 1.06, n[1], n[2] + 0.61}});
  atoms.push_back({"O", {n[0] - 1.06 + L[0], n[1], n[2] + 0.61}});
  return from_cartesian("honeycomb_no2", L, atoms);
}

/// Carbon chain along x with one hydrogen per carbon.
inline Structure chain_h() {
  return from_cartesian("chainH", {1.45, 10.0, 10.0}, {{"C", {0, 0, 0}}, {"H", {0, 1.09, 0}}});
}

inline Structure benzene(double box = 20.0) {
  std::vector<std::pair<std::string, Vec3>> atoms;
  for (int k = 0; k < 6; ++k) {
    const double a = std::numbers::pi / 3.0 * k;
    atoms.push_back({"C", {box / 2 + 1.39 * std::cos(a), box / 2 + 1.39 * std::sin(a), box / 2}});
  }
  for (int k = 0; k < 6; ++k) {
    const double a = std::numbers::pi / 3.0 * k;
    atoms.push_back({"H", {box / 2 + 2.48 * std::cos(a), box / 2 + 2.48 * std::sin(a), box / 2}});
  }
  return from_cartesian("benzene", {box, box, box}, atoms);
}

/// Two fused hexagons sharing the vertical edge at x = 0.
inline Structure naphthalene(double box = 20.0) {
  const double b = 1.4;
  const double cx = std::sqrt(3.0) / 2.0 * b;
  std::vector<Vec3> pts;
  for (double c : {-cx, cx})
    for (int k = 0; k < 6; ++k) {
      const double a = std::numbers::pi / 6.0 + std::numbers::pi / 3.0 * k;
      const Vec3 p{c + b * std::cos(a), b * std::sin(a), 0.0};
      const bool dup = std::any_of(pts.begin(), pts.end(), [&](const Vec3& q) {
        return std::hypot(p[0] - q[0], p[1] - q[1]) < 1e-6;
      });
      if (!dup) pts.push_back(p);
    }
  std::vector<std::pair<std::string, Vec3>> atoms;
  for (const auto& p : pts) atoms.push_back({"C", {p[0] + box / 2, p[1] + box / 2, box / 2}});
  return from_cartesian("naphthalene", {box, box, box}, atoms);
}

// ---------------------------------------------------------------- graphs

using Adjacency = std::vector<std::vector<std::size_t>>;

inline std::vector<std::size_t> bfs(const Adjacency& adj, std::size_t s) {
  std::vector<std::size_t> d(adj.size(), SIZE_MAX);
  std::queue<std::size_t> q;
  d[s] = 0;
  q.push(s);
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (auto v : adj[u])
      if (d[v] == SIZE_MAX) {
        d[v] = d[u] + 1;
        q.push(v);
      }
  }
  return d;
}

/// Every simple cycle of length 3..max_len, as vertex sets (deduplicated).
inline std::set<std::vector<std::size_t>> all_simple_cycles(const Adjacency& adj, std::size_t max_len) {
  std::set<std::vector<std::size_t>> cycles;
  std::vector<std::size_t> path;
  std::vector<char> on(adj.size(), 0);
  std::function<void(std::size_t, std::size_t)> dfs = [&](std::size_t start, std::size_t u) {
    for (auto v : adj[u]) {
      if (v == start && path.size() >= 3) {
        auto c = path;
        std::sort(c.begin(), c.end());
        cycles.insert(c);
      }
      if (v <= start || on[v] || path.size() >= max_len) continue;
      on[v] = 1;
      path.push_back(v);
      dfs(start, v);
      path.pop_back();
      on[v] = 0;
    }
  };
  for (std::size_t s = 0; s < adj.size(); ++s) {
    path = {s};
    on[s] = 1;
    dfs(s, s);
    on[s] = 0;
  }
  return cycles;
}

/// DMR from an exhaustive reading of the main-branch rule on a 3x3 tiling:
/// the tiling is made non-periodic in-plane, boundary atoms are found by
/// cutting bonds, every vertex on ANY shortest
/// path between two boundary atoms of the central tile is main, every
/// simple ring of <= 8 atoms with > 3 main atoms is absorbed until nothing
/// changes, and labels fold back onto the unit cell.
inline double tiling_dmr_oracle(const Structure& s, double scale = coftherm::kDefaultBondScale) {
  const std::size_t B = s.size();
  const Structure tiled = s.replicate(3, 3, 1);
  const auto g = coftherm::build_bond_graph(tiled, scale);
  Adjacency adj(tiled.size());
  for (std::size_t i = 0; i < tiled.size(); ++i)
    for (const auto& e : g.neighbors(i))
      if (coftherm::is_zero(e.shift)) adj[i].push_back(e.neighbor);

  // a central atom is a boundary atom when one of its bonds leaves the
  // central tile and, with every copy of that bond cut, the far end still
  // reaches another copy of the atom
  const std::size_t centre = 4;
  std::vector<std::size_t> boundary;
  for (std::size_t i = centre * B; i < (centre + 1) * B; ++i) {
    bool winds = false;
    for (std::size_t j : adj[i]) {
      if (j / B == centre || winds) continue;
      // cut every copy of the bond
      const auto tdx = [&](std::size_t a, std::size_t b) {
        return std::pair<long, long>(static_cast<long>(b / B % 3) - static_cast<long>(a / B % 3),
                                     static_cast<long>(b / B / 3) - static_cast<long>(a / B / 3));
      };
      const auto shift = tdx(i, j);
      Adjacency cut = adj;
      for (std::size_t a = 0; a < cut.size(); ++a)
        std::erase_if(cut[a], [&](std::size_t b) {
          if (a % B == i % B && b % B == j % B && tdx(a, b) == shift) return true;
          return a % B == j % B && b % B == i % B && tdx(b, a) == shift;
        });
      const auto d = bfs(cut, j);
      for (std::size_t t = 0; t < 9; ++t)
        if (t != centre && d[t * B + i % B] != SIZE_MAX) winds = true;
    }
    if (winds) boundary.push_back(i);
  }

  std::vector<char> main(B, 0);
  std::vector<std::vector<std::size_t>> dist;
  for (auto b : boundary) {
    dist.push_back(bfs(adj, b));
    main[b % B] = 1;
  }
  for (std::size_t a = 0; a < boundary.size(); ++a)
    for (std::size_t b = a + 1; b < boundary.size(); ++b) {
      const std::size_t dab = dist[a][boundary[b]];
      if (dab == SIZE_MAX) continue;
      for (std::size_t v = 0; v < tiled.size(); ++v)
        if (dist[a][v] != SIZE_MAX && dist[b][v] != SIZE_MAX && dist[a][v] + dist[b][v] == dab)
          main[v % B] = 1;
    }

  const auto cycles = all_simple_cycles(adj, 8);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& c : cycles) {
      std::set<std::size_t> folded;
      for (auto v : c) folded.insert(v % B);
      std::size_t m = 0;
      for (auto v : folded) m += main[v];
      if (m > 3)
        for (auto v : folded)
          if (!main[v]) main[v] = changed = true;
    }
  }
  double dangling = 0.0, total = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    total += s.atoms()[i].mass;
    if (!main[i]) dangling += s.atoms()[i].mass;
  }
  return dangling / total;
}

// ----------------------------------------------------------- trajectories

/// Atoms a = 0..n_atoms-1 with v_x = cos(2 pi f0 t + a pi / 2). With a
/// multiple of four atoms the cross terms cancel and the group VACF is
/// exactly cos(2 pi f0 tau).
inline coftherm::Trajectory cosine_trajectory(std::size_t n_frames, double dt_fs, double f0_per_fs,
                                              std::size_t n_atoms = 4) {
  std::vector<std::int64_t> steps(n_frames);
  std::vector<double> v(n_frames * n_atoms * 3, 0.0);
  for (std::size_t f = 0; f < n_frames; ++f) {
    steps[f] = static_cast<std::int64_t>(f);
    const double t = static_cast<double>(f) * dt_fs;
    for (std::size_t a = 0; a < n_atoms; ++a)
      v[(f * n_atoms + a) * 3] =
          std::cos(2.0 * std::numbers::pi * f0_per_fs * t + static_cast<double>(a) * std::numbers::pi / 2.0);
  }
  return coftherm::Trajectory(dt_fs, steps, n_atoms, v);
}

inline coftherm::Trajectory white_noise(std::size_t n_frames, std::size_t n_atoms, std::uint64_t seed) {
  coftherm::Xoshiro256 rng(seed);
  std::vector<std::int64_t> steps(n_frames);
  std::vector<double> v(n_frames * n_atoms * 3);
  for (std::size_t f = 0; f < n_frames; ++f) steps[f] = static_cast<std::int64_t>(f);
  for (auto& x : v) x = rng.normal();
  return coftherm::Trajectory(1.0, steps, n_atoms, v);
}

/// Periodic monatomic chain, unit mass, stiffness and spacing, integrated
/// with velocity Verlet from zero displacement and random velocities (net
/// momentum removed). Frames are taken every `stride` steps.
inline coftherm::Trajectory harmonic_chain(std::size_t n, std::size_t n_frames, double dt,
                                           std::size_t stride, std::uint64_t seed) {
  coftherm::Xoshiro256 rng(seed);
  std::vector<double> u(n, 0.0), v(n), acc(n);
  double mean = 0.0;
  for (auto& x : v) mean += (x = rng.normal());
  mean /= static_cast<double>(n);
  for (auto& x : v) x -= mean;
  auto forces = [&] {
    for (std::size_t i = 0; i < n; ++i)
      acc[i] = u[(i + 1) % n] - 2.0 * u[i] + u[(i + n - 1) % n];
  };
  forces();
  std::vector<std::int64_t> steps(n_frames);
  std::vector<double> vel(n_frames * n * 3, 0.0), pos(n_frames * n * 3, 0.0);
  for (std::size_t f = 0; f < n_frames; ++f) {
    steps[f] = static_cast<std::int64_t>(f * stride);
    for (std::size_t i = 0; i < n; ++i) {
      vel[(f * n + i) * 3] = v[i];
      pos[(f * n + i) * 3] = static_cast<double>(i) + u[i];
    }
    for (std::size_t s = 0; s < stride; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        v[i] += 0.5 * dt * acc[i];
        u[i] += dt * v[i];
      }
      forces();
      for (std::size_t i = 0; i < n; ++i) v[i] += 0.5 * dt * acc[i];
    }
  }
  return coftherm::Trajectory(dt, steps, n, vel, pos, {static_cast<double>(n), 10.0, 10.0});
}

/// One-atom unit cell matching harmonic_chain.
inline Structure chain_unit_cell() { return Structure("chain", {1.0, 10.0, 10.0}, {{"H", {0, 0, 0}}}); }

// ------------------------------------------------------------------ NEMD

/// 100 bins over 70 Å, sources {49, 50}, sinks {0, 99}, linear halves with
/// |dT/dx| = slope; heat rate chosen so Fourier's law gives `kappa`.
inline coftherm::BinProfile synthetic_profile(double kappa, double slope = 0.5,
                                              double cross_section = 20.0 * 3.4,
                                              double offset = 300.0) {
  coftherm::BinProfile p;
  p.n_bins = 100;
  p.bin_width = 0.7;
  p.cross_section = cross_section;
  p.source_bins = {49, 50};
  p.sink_bins = {0, 99};
  const double length = 70.0;
  p.temperature.resize(100);
  for (std::size_t i = 0; i < 100; ++i) {
    const double x = (static_cast<double>(i) + 0.5) * p.bin_width;
    p.temperature[i] = offset + slope * (i < 50 ? x : length - x);
  }
  const double watts = kappa * (cross_section * 1e-20) * (slope * 1e10);
  const double kcal_mol_fs_in_watts = 4184.0 / 6.02214076e23 * 1e15;
  p.heat_rate = watts / kcal_mol_fs_in_watts;
  return p;
}

// ------------------------------------------------------------- attention

/// Random row-stochastic stack: token 0 aggregates, then atoms, then patches,
/// with the token order shuffled.
inline coftherm::AttentionStack random_stack(std::size_t layers, std::size_t heads,
                                             std::size_t n_atoms, std::size_t n_patches,
                                             std::uint64_t seed) {
  coftherm::Xoshiro256 rng(seed);
  std::vector<coftherm::TokenRef> tokens;
  tokens.push_back({coftherm::TokenKind::Aggregate, 0});
  for (std::size_t a = 0; a < n_atoms; ++a)
    tokens.push_back({coftherm::TokenKind::Atom, static_cast<std::int32_t>(a)});
  for (std::size_t p = 0; p < n_patches; ++p)
    tokens.push_back({coftherm::TokenKind::Patch, static_cast<std::int32_t>(p)});
  rng.shuffle(std::span<coftherm::TokenRef>(tokens));
  const std::size_t t = tokens.size();
  std::vector<float> w(layers * heads * t * t);
  for (std::size_t m = 0; m < layers * heads * t; ++m) {
    double sum = 0.0;
    std::vector<double> row(t);
    for (auto& x : row) sum += (x = rng.uniform() + 1e-3);
    for (std::size_t c = 0; c < t; ++c) w[m * t + c] = static_cast<float>(row[c] / sum);
  }
  return coftherm::AttentionStack(layers, heads, tokens, w);
}

/// Dense J = A'_L ... A'_1 and its aggregate row restricted to atoms.
inline std::vector<double> dense_rollout(const coftherm::AttentionStack& a, double w) {
  const std::size_t t = a.n_tokens();
  using Mat = std::vector<std::vector<double>>;
  Mat J(t, std::vector<double>(t, 0.0));
  for (std::size_t i = 0; i < t; ++i) J[i][i] = 1.0;
  for (std::size_t l = 0; l < a.n_layers(); ++l) {
    Mat A(t, std::vector<double>(t, 0.0));
    for (std::size_t r = 0; r < t; ++r) {
      for (std::size_t c = 0; c < t; ++c) {
        for (std::size_t h = 0; h < a.n_heads(); ++h) A[r][c] += a.at(l, h, r, c);
        A[r][c] = (1.0 - w) * A[r][c] / static_cast<double>(a.n_heads()) + (r == c ? w : 0.0);
      }
      double s = 0.0;
      for (double x : A[r]) s += x;
      for (double& x : A[r]) x /= s;
    }
    Mat next(t, std::vector<double>(t, 0.0));
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t k = 0; k < t; ++k)
        for (std::size_t c = 0; c < t; ++c) next[r][c] += A[r][k] * J[k][c];
    J = next;
  }
  std::size_t agg = 0;
  while (a.tokens()[agg].kind != coftherm::TokenKind::Aggregate) ++agg;
  std::vector<double> scores(a.atom_count(), 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < t; ++c)
    if (a.tokens()[c].kind == coftherm::TokenKind::Atom) {
      scores[static_cast<std::size_t>(a.tokens()[c].index)] = J[agg][c];
      total += J[agg][c];
    }
  for (auto& x : scores) x /= total;
  return scores;
}

// ---------------------------------------------------------------- forest

/// y = 2 x1 - x2 + N(0, sigma), x1..x5 standard normal (x3..x5 noise).
inline coftherm::FeatureTable linear_signal_table(std::size_t n, std::uint64_t seed, double sigma = 0.1) {
  coftherm::Xoshiro256 rng(seed);
  coftherm::FeatureTable t({"x1", "x2", "x3", "x4", "x5"}, "y");
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.normal();
    t.add_row("r" + std::to_string(i), x, 2.0 * x[0] - x[1] + sigma * rng.normal());
  }
  return t;
}

} // namespace fixtures
