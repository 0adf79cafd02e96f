#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "coftherm/dangling.hpp"
#include "coftherm/error.hpp"
#include "coftherm/reference.hpp"
#include "coftherm/rng.hpp"
#include "coftherm/spectral.hpp"
#include "fixtures.hpp"

using namespace coftherm;

namespace {

std::vector<std::size_t> all_atoms(const Trajectory& t) {
  std::vector<std::size_t> g(t.n_atoms());
  std::iota(g.begin(), g.end(), 0);
  return g;
}

Trajectory constant_velocity(std::size_t n_frames, std::size_t n_atoms) {
  std::vector<std::int64_t> steps(n_frames);
  std::iota(steps.begin(), steps.end(), 0);
  std::vector<double> v(n_frames * n_atoms * 3);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + static_cast<double>(i % 3);
  return Trajectory(1.0, steps, n_atoms, v);
}

SpectralProfile two_group_profile(std::vector<double> a, std::vector<double> b, double df = 0.5) {
  SpectralProfile p;
  for (std::size_t i = 0; i < a.size(); ++i) p.frequency.push_back(static_cast<double>(i) * df);
  p.group_names = {"A", "B"};
  p.vdos = {std::move(a), std::move(b)};
  return p;
}

double trapz(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

} // namespace

TEST_SUITE("spectral") {

TEST_CASE("VACF of constant velocities is one") {
  const auto t = constant_velocity(64, 3);
  const auto g = all_atoms(t);
  const auto c = vacf(t, g);
  REQUIRE(c.size() == 32);
  for (double v : c) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("VACF of phase-shifted cosines") {
  const double f0 = 0.01;
  const auto t = fixtures::cosine_trajectory(1024, 1.0, f0);
  const auto g = all_atoms(t);
  const auto c = vacf(t, g);
  CHECK(c.size() == 512);
  double worst = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k)
    worst = std::max(worst, std::abs(c[k] - std::cos(2 * std::numbers::pi * f0 * static_cast<double>(k))));
  CHECK(worst < 1e-6);
}

TEST_CASE("VACF of white noise decays immediately") {
  const std::size_t n = 4096, atoms = 8;
  const auto t = fixtures::white_noise(n, atoms, 11);
  const auto g = all_atoms(t);
  const auto c = vacf(t, g, {64, true});
  CHECK(c[0] == 1.0);
  for (std::size_t k = 1; k < c.size(); ++k)
    CHECK(std::abs(c[k]) < 3.0 / std::sqrt(static_cast<double>(3 * atoms * (n - k))));
}

TEST_CASE("VACF is unchanged by time reversal") {
  const auto t = fixtures::harmonic_chain(16, 400, 0.1, 5, 2);
  const auto g = all_atoms(t);
  const auto a = vacf(t, g);
  const auto b = vacf(t.time_reversed(), g);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-9);
}

TEST_CASE("unnormalized VACF is additive over disjoint groups") {
  const auto t = fixtures::white_noise(256, 6, 4);
  const std::vector<std::size_t> ga{0, 2, 4}, gb{1, 3, 5};
  const auto all = all_atoms(t);
  const VacfOptions raw{40, false};
  const auto ca = vacf(t, ga, raw), cb = vacf(t, gb, raw), cu = vacf(t, all, raw);
  for (std::size_t k = 0; k < cu.size(); ++k) CHECK(cu[k] == doctest::Approx(ca[k] + cb[k]).epsilon(1e-10));
  // the magnitude spectrum is subadditive
  const auto sa = vdos(ca, 1.0), sb = vdos(cb, 1.0), su = vdos(cu, 1.0);
  for (std::size_t k = 0; k < su.values.size(); ++k)
    CHECK(su.values[k] <= sa.values[k] + sb.values[k] + 1e-9);
}

TEST_CASE("FFT VACF matches the direct origin average") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto t = fixtures::harmonic_chain(12, 300, 0.1, 3, seed);
    std::vector<std::size_t> g{0, 3, 7, 11};
    for (bool norm : {true, false}) {
      const auto fast = vacf(t, g, {100, norm});
      const auto slow = reference::vacf(t, g, {100, norm});
      REQUIRE(fast.size() == slow.size());
      for (std::size_t k = 0; k < fast.size(); ++k)
        CHECK(fast[k] == doctest::Approx(slow[k]).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("VACF argument checks") {
  const auto t = fixtures::white_noise(64, 2, 1);
  const std::vector<std::size_t> none, bad{5}, ok{0};
  CHECK_THROWS_AS(vacf(t, none), InvalidInput);
  CHECK_THROWS_AS(vacf(t, bad), InvalidInput);
  CHECK_THROWS_AS(vacf(t, ok, {33, true}), InvalidInput);
  std::vector<std::int64_t> steps{0, 1, 2, 3};
  const Trajectory still(1.0, steps, 1, std::vector<double>(12, 0.0));
  CHECK_THROWS_AS(vacf(still, ok), NumericalError);
}

TEST_CASE("VDOS peaks at the oscillation frequency") {
  const double f0 = 0.01; // 1/fs, i.e. 10 THz
  const auto t = fixtures::cosine_trajectory(2048, 1.0, f0);
  const auto g = all_atoms(t);
  const auto c = vacf(t, g);
  for (std::size_t pad : {1, 4}) {
    for (Window w : {Window::None, Window::Hann}) {
      const auto s = vdos(c, 1.0, {w, pad});
      const auto peak = std::max_element(s.values.begin(), s.values.end()) - s.values.begin();
      const double df = s.frequency[1];
      CHECK(df == doctest::Approx(1000.0 / (1024.0 * static_cast<double>(pad))));
      CHECK(std::abs(s.frequency[static_cast<std::size_t>(peak)] - 10.0) <= df);
    }
  }
}

TEST_CASE("VDOS of an impulse is flat") {
  std::vector<double> c(64, 0.0);
  c[0] = 1.0;
  const auto s = vdos(c, 2.0);
  CHECK(s.values.size() == 33);
  for (double v : s.values) CHECK(v == doctest::Approx(1.0));
  CHECK(s.frequency.back() == doctest::Approx(250.0));
}

TEST_CASE("zero padding interpolates the spectrum") {
  const auto t = fixtures::harmonic_chain(8, 256, 0.1, 4, 9);
  const auto g = all_atoms(t);
  const auto c = vacf(t, g);
  const auto s1 = vdos(c, 1.0, {Window::None, 1});
  const auto s2 = vdos(c, 1.0, {Window::None, 2});
  REQUIRE(s2.values.size() == 2 * s1.values.size() - 1);
  for (std::size_t k = 0; k < s1.values.size(); ++k) {
    CHECK(s2.values[2 * k] == doctest::Approx(s1.values[k]).epsilon(1e-12).scale(1.0));
    CHECK(s2.frequency[2 * k] == doctest::Approx(s1.frequency[k]));
  }
  CHECK_THROWS_AS(vdos(c, 1.0, {Window::None, 0}), InvalidInput);
  CHECK_THROWS_AS(vdos(std::vector<double>{1.0}, 1.0), InvalidInput);
}

TEST_CASE("groups") {
  const Structure s = fixtures::chain_h();
  auto groups = make_groups(s, 6);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].name() == "C");
  CHECK(groups[0].members == std::vector<std::size_t>{0, 2, 4});
  groups = make_groups(s, 6, nullptr, {true});
  CHECK(groups.size() == 2);
  const auto labels = classify_branches(build_bond_graph(s), s).labels;
  groups = make_groups(s, 4, &labels, {true});
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].name() == "C");
  CHECK(groups[1].name() == "H(d)");
  CHECK(groups[1].members == std::vector<std::size_t>{1, 3});
  CHECK_THROWS_AS(make_groups(s, 5), InvalidInput);
}

TEST_CASE("overlap metric") {
  SUBCASE("identical groups overlap fully") {
    const std::vector<double> a{0, 1, 3, 2, 0.5, 0};
    CHECK(overlap_s(two_group_profile(a, a)) == doctest::Approx(1.0));
  }
  SUBCASE("disjoint supports do not overlap") {
    CHECK(overlap_s(two_group_profile({0, 2, 1, 0, 0, 0, 0}, {0, 0, 0, 0, 3, 1, 0})) == 0.0);
  }
  SUBCASE("hand computed") {
    // min = {0, 1, 1, 0}, max = {0, 2, 3, 0}, unit spacing
    CHECK(overlap_s(two_group_profile({0, 1, 3, 0}, {0, 2, 1, 0}, 1.0)) == doctest::Approx(2.0 / 5.0));
  }
  SUBCASE("group order and frequency scale do not matter") {
    Xoshiro256 rng(8);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<std::vector<double>> g(3, std::vector<double>(50));
      for (auto& row : g)
        for (auto& v : row) v = rng.uniform();
      SpectralProfile p;
      for (int i = 0; i < 50; ++i) p.frequency.push_back(0.25 * i);
      p.group_names = {"a", "b", "c"};
      p.vdos = g;
      const double s0 = overlap_s(p);
      CHECK(s0 > 0.0);
      CHECK(s0 < 1.0);
      std::swap(p.vdos[0], p.vdos[2]);
      CHECK(overlap_s(p) == doctest::Approx(s0).epsilon(1e-12));
      for (auto& f : p.frequency) f *= 7.3;
      CHECK(overlap_s(p) == doctest::Approx(s0).epsilon(1e-12));
    }
  }
  SUBCASE("renormalized areas") {
    auto p = two_group_profile({0, 1, 3, 0}, {0, 4, 2, 0}, 1.0);
    renormalize_area(p);
    CHECK(trapz(p.frequency, p.vdos[0]) == doctest::Approx(1.0));
    CHECK(trapz(p.frequency, p.vdos[1]) == doctest::Approx(1.0));
  }
  SUBCASE("rejections") {
    auto p = two_group_profile({0, 1, 3}, {0, 2, 1});
    p.vdos.pop_back();
    p.group_names.pop_back();
    CHECK_THROWS_AS(overlap_s(p), InvalidInput);
    CHECK_THROWS_AS(overlap_s(two_group_profile({0, 0, 0}, {0, 0, 0})), NumericalError);
    auto q = two_group_profile({0, 1, 3}, {0, 2, 1});
    q.frequency[2] = 5.0;
    CHECK_THROWS_AS(overlap_s(q), InvalidInput);
  }
}

TEST_CASE("profile from a trajectory") {
  const auto t = fixtures::harmonic_chain(16, 256, 0.1, 5, 21);
  std::vector<SpectralGroup> groups{{"A", false, {0, 2, 4, 6, 8, 10, 12, 14}},
                                    {"B", false, {1, 3, 5, 7, 9, 11, 13, 15}}};
  auto p = compute_vdos_profile(t, groups);
  CHECK(p.n_groups() == 2);
  CHECK(p.frequency.size() == 65);
  renormalize_area(p);
  const double s = overlap_s(p);
  // both sublattices of a monatomic chain see the same spectrum
  CHECK(s > 0.6);
  CHECK(s <= 1.0);
  CHECK(profile_to_csv(p).rfind("frequency_THz,A,B\n", 0) == 0);
}

TEST_CASE("pSED of a resting chain is zero") {
  const std::size_t n = 8, nf = 16;
  std::vector<std::int64_t> steps(nf);
  std::iota(steps.begin(), steps.end(), 0);
  std::vector<double> pos(nf * n * 3, 0.0);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t i = 0; i < n; ++i) pos[(f * n + i) * 3] = static_cast<double>(i);
  const Trajectory t(1.0, steps, n, std::vector<double>(nf * n * 3, 0.0), pos,
                     {static_cast<double>(n), 10, 10});
  const auto m = psed(t, fixtures::chain_unit_cell(), {0, n, Window::None});
  CHECK(m.n_q() == n);
  CHECK(m.n_freq() == nf / 2 + 1);
  for (double v : m.values) CHECK(v == 0.0);
  CHECK_THROWS_AS(emit_psed_plotdata(m), NumericalError);
}

TEST_CASE("pSED grids and the q = 0 line") {
  const std::size_t n = 16, nf = 128;
  const double dt = 0.1;
  const auto t = fixtures::harmonic_chain(n, nf, dt, 5, 3);
  const Structure cell = fixtures::chain_unit_cell();
  const auto m = psed(t, cell, {0, n, Window::None});
  CHECK(m.q[1] == doctest::Approx(2 * std::numbers::pi / 16.0));
  CHECK(m.frequency[1] == doctest::Approx(1000.0 / (nf * 0.5)));
  // direct sum over cells and frames at q = 0
  const double tau0 = nf * 0.5;
  const double pref = 0.25 / (4 * std::numbers::pi * tau0 * n);
  const double mass = cell.atoms()[0].mass;
  for (std::size_t j = 0; j < m.n_freq(); ++j) {
    double expect = 0.0;
    for (int d = 0; d < 3; ++d) {
      std::complex<double> acc = 0.0;
      for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t i = 0; i < n; ++i)
          acc += t.velocity(f, i, d) * std::polar(1.0, -2 * std::numbers::pi * double(j * f) / double(nf));
      expect += mass * std::norm(acc);
    }
    CHECK(m.at(0, j) == doctest::Approx(pref * expect).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("pSED follows the chain dispersion") {
  const std::size_t n = 32, nf = 512;
  const auto t = fixtures::harmonic_chain(n, nf, 0.1, 5, 7);
  const auto m = psed(t, fixtures::chain_unit_cell(), {0, n, Window::None});
  const double df = m.frequency[1];
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double omega = 2.0 * std::abs(std::sin(m.q[k] / 2.0)); // unit mass, stiffness, spacing
    const double f_expect = omega / (2 * std::numbers::pi) * 1000.0;
    std::size_t best = 0;
    for (std::size_t j = 1; j < m.n_freq(); ++j)
      if (m.at(k, j) > m.at(k, best)) best = j;
    CHECK(std::abs(m.frequency[best] - f_expect) <= 2 * df);
  }
}

TEST_CASE("pSED symmetries and the direct sum") {
  const std::size_t n = 10, nf = 64;
  const auto t = fixtures::harmonic_chain(n, nf, 0.1, 4, 12);
  const Structure cell = fixtures::chain_unit_cell();
  for (Window w : {Window::None, Window::Hann}) {
    const auto m = psed(t, cell, {0, n, w});
    const auto r = reference::psed(t, cell, {0, n, w});
    REQUIRE(r.values.size() == m.values.size());
    double peak = *std::max_element(m.values.begin(), m.values.end());
    for (std::size_t i = 0; i < m.values.size(); ++i)
      CHECK(std::abs(m.values[i] - r.values[i]) <= 1e-9 * peak);
  }
  std::vector<double> vel(t.velocities().begin(), t.velocities().end());
  for (auto& v : vel) v = -v;
  const Trajectory flipped(t.fs_per_step(), t.timesteps(), n, vel,
                           std::vector<double>(t.positions().begin(), t.positions().end()), t.box());
  const auto a = psed(t, cell, {0, n, Window::None});
  const auto b = psed(flipped, cell, {0, n, Window::None});
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(b.values[i] == doctest::Approx(a.values[i]).epsilon(1e-12));
}

TEST_CASE("site assignment") {
  const auto t = fixtures::harmonic_chain(8, 32, 0.1, 2, 1);
  const auto sa = assign_sites(t, fixtures::chain_unit_cell(), 0, 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(sa.cell[i] == i);
    CHECK(sa.basis[i] == 0);
  }
  CHECK_THROWS_AS(assign_sites(t, fixtures::chain_unit_cell(), 0, 4), InvalidInput);
  CHECK_THROWS_AS(psed(t, fixtures::chain_unit_cell(), {0, 1, Window::None}), InvalidInput);
  CHECK_THROWS_AS(psed(fixtures::white_noise(8, 8, 1), fixtures::chain_unit_cell(), {0, 8, Window::None}),
                  InvalidInput);
}

TEST_CASE("plot bounds") {
  PsedMap m;
  m.q = {0, 1};
  m.frequency = {0, 1, 2};
  m.values.assign(6, 10.0);
  const auto one = emit_psed_plotdata(m);
  CHECK(one.bounds.lower == doctest::Approx(1.0));
  CHECK(one.bounds.upper == doctest::Approx(1.0));
  PsedMap low = m;
  low.values.assign(6, 1.0);
  low.values[3] = 0.0; // clamped to the smallest positive value
  const auto pair = emit_psed_plotdata(m, &low);
  CHECK(pair.bounds.lower == doctest::Approx(0.0));
  CHECK(pair.bounds.upper == doctest::Approx(1.0));
  CHECK(pair.log_second[3] == doctest::Approx(0.0));
  CHECK(psed_to_csv(m, one.log_first).rfind("q_inv_A,0,1,2\n0,1,1,1\n", 0) == 0);
}

TEST_CASE("percentile agrees with a full sort") {
  Xoshiro256 rng(99);
  std::vector<double> v(10000);
  for (auto& x : v) x = rng.normal();
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (double p : {0.0, 1.0, 37.3, 50.0, 99.0, 100.0}) {
    const double rank = p / 100.0 * 9999.0;
    const auto lo = static_cast<std::size_t>(rank);
    const double frac = rank - static_cast<double>(lo);
    const double expect = lo + 1 < sorted.size() ? sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]) : sorted[lo];
    CHECK(percentile(v, p) == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK(percentile({3.0}, 99.0) == 3.0);
  CHECK_THROWS_AS(percentile({}, 50.0), InvalidInput);
  CHECK_THROWS_AS(percentile({1.0}, 101.0), InvalidInput);
}

} // TEST_SUITE
