#include <doctest.h>

#include <cmath>
#include <vector>

#include "coftherm/error.hpp"
#include "coftherm/nemd.hpp"
#include "coftherm/structio.hpp"
#include "fixtures.hpp"

using namespace coftherm;

TEST_SUITE("nemd") {

TEST_CASE("unit conversion") {
  CHECK(kKcalPerMolFsToWatt == doctest::Approx(6.9477e-6).epsilon(1e-4));
  // independent: 1 kcal = 4184 J, N_A from CODATA 2018, 1 fs = 1e-15 s
  CHECK(kKcalPerMolFsToWatt == doctest::Approx(4184.0 / 6.02214076e23 / 1e-15).epsilon(1e-15));
}

TEST_CASE("heat rate scales with size") {
  CHECK(heat_rate(1000) == doctest::Approx(1e-4));
  CHECK(heat_rate(4893, 1e-7) == doctest::Approx(4.893e-4));
  CHECK(heat_rate(10, 0.0) == 0.0);
  CHECK(heat_rate(2000) == doctest::Approx(2 * heat_rate(1000)));
  CHECK_THROWS_AS(heat_rate(0), InvalidInput);
  CHECK_THROWS_AS(heat_rate(10, -1.0), InvalidInput);
}

TEST_CASE("least squares line") {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  const std::vector<double> same{1, 1, 1, 1};
  CHECK_THROWS_AS(fit_line(same, y), NumericalError);
}

TEST_CASE("fit halves") {
  const auto p = fixtures::synthetic_profile(1.0);
  const auto h = fit_halves(p);
  REQUIRE(h.left.size() == 48);
  REQUIRE(h.right.size() == 48);
  CHECK(h.left.front() == 1);
  CHECK(h.left.back() == 48);
  CHECK(h.right.front() == 51);
  CHECK(h.right.back() == 98);
  const auto t = fit_halves(p, 2);
  CHECK(t.left.size() == 44);
  CHECK(t.left.front() == 3);
  CHECK(t.right.back() == 96);
}

TEST_CASE("synthetic profile recovers the conductivity") {
  const auto r = extract_kappa(fixtures::synthetic_profile(1.0));
  CHECK(std::abs(r.kappa - 1.0) < 1e-3);
  CHECK(r.slope_left == doctest::Approx(0.5));
  CHECK(r.slope_right == doctest::Approx(-0.5));
  CHECK(std::abs(r.fit_r2_left - 1.0) < 1e-12);
  CHECK(std::abs(r.fit_r2_right - 1.0) < 1e-12);
  CHECK(r.n_left == 48);
  CHECK(std::abs(extract_kappa(fixtures::synthetic_profile(2.0)).kappa - 2.0) < 2e-3);
}

TEST_CASE("profile files") {
  const std::filesystem::path data = COFTHERM_TEST_DATA;
  const auto p1 = parse_bin_profile(data / "synthetic_k1.csv");
  CHECK(p1.heat_rate == doctest::Approx(0.0004893709030592735).epsilon(1e-12));
  CHECK(std::abs(extract_kappa(p1).kappa - 1.0) < 1e-3);
  CHECK(std::abs(extract_kappa(parse_bin_profile(data / "synthetic_k2.csv")).kappa - 2.0) < 2e-3);
}

TEST_CASE("conductivity scaling laws") {
  const auto base = fixtures::synthetic_profile(1.0);
  const double k0 = extract_kappa(base).kappa;
  SUBCASE("doubling the cross-section halves it") {
    auto p = base;
    p.cross_section *= 2;
    CHECK(extract_kappa(p).kappa == doctest::Approx(k0 / 2).epsilon(1e-12));
  }
  SUBCASE("linear in the heat rate") {
    for (double f : {0.5, 3.0, 10.0}) {
      auto p = base;
      p.heat_rate *= f;
      CHECK(extract_kappa(p).kappa == doctest::Approx(f * k0).epsilon(1e-12));
    }
  }
  SUBCASE("temperature offset does not matter") {
    for (double off : {-250.0, 0.0, 1000.0}) {
      auto p = base;
      for (auto& t : p.temperature) t += off;
      CHECK(extract_kappa(p).kappa == doctest::Approx(k0).epsilon(1e-9));
    }
  }
  SUBCASE("mirror image profile") {
    auto p = base;
    std::reverse(p.temperature.begin(), p.temperature.end());
    const auto r = extract_kappa(p);
    CHECK(r.kappa == doctest::Approx(k0).epsilon(1e-9));
    CHECK(r.slope_left == doctest::Approx(-extract_kappa(base).slope_right).epsilon(1e-9));
  }
  SUBCASE("asymmetric halves average the slopes") {
    auto p = base;
    for (std::size_t i = 51; i < 100; ++i) p.temperature[i] = 300.0 + 1.5 * (70.0 - (i + 0.5) * 0.7);
    const auto r = extract_kappa(p);
    CHECK(r.kappa == doctest::Approx(k0 * 0.5 / 1.0).epsilon(1e-9));
  }
}

TEST_CASE("degenerate profiles") {
  SUBCASE("too few points") {
    BinProfile p;
    p.n_bins = 6;
    p.bin_width = 1.0;
    p.cross_section = 10.0;
    p.heat_rate = 1e-4;
    p.source_bins = {3};
    p.sink_bins = {0};
    p.temperature = {300, 301, 302, 303, 302, 301};
    CHECK_THROWS_AS(extract_kappa(p), InvalidInput);
  }
  SUBCASE("flat profile") {
    auto p = fixtures::synthetic_profile(1.0);
    std::fill(p.temperature.begin(), p.temperature.end(), 300.0);
    CHECK_THROWS_AS(extract_kappa(p), NumericalError);
  }
  SUBCASE("trim eats the halves") {
    CHECK_THROWS_AS(extract_kappa(fixtures::synthetic_profile(1.0), 23), InvalidInput);
  }
}

TEST_CASE("averaging and stability") {
  const auto a = average_kappa(1.0, 2.0);
  CHECK(a.mean == doctest::Approx(1.5));
  CHECK(a.ratio == doctest::Approx(0.5));
  CHECK_THROWS_AS(average_kappa(0.0, 1.0), InvalidInput);
  CHECK_FALSE(stability_filter(70.0, 62.0));
  CHECK(stability_filter(70.0, 63.1));
  CHECK(stability_filter(70.0, 76.9));
  CHECK_FALSE(stability_filter(70.0, 77.1));
  CHECK_THROWS_AS(stability_filter(0.0, 1.0), InvalidInput);
}

TEST_CASE("anisotropy statistics") {
  const std::vector<double> kx{1, 2, 3, 4}, ky{1, 2, 3, 4};
  const auto s = anisotropy_stats(kx, ky);
  CHECK(s.mean_ratio == doctest::Approx(1.0));
  CHECK(s.std_ratio == doctest::Approx(0.0));
  CHECK(s.parity_r2 == doctest::Approx(1.0));
  CHECK(s.linear_r2 == doctest::Approx(1.0));
  const std::vector<double> ky2{2, 4, 6, 8};
  const auto t = anisotropy_stats(kx, ky2);
  CHECK(t.mean_ratio == doctest::Approx(0.5));
  CHECK(t.linear_r2 == doctest::Approx(1.0));
  CHECK(t.parity_r2 < 1.0);
  CHECK_THROWS_AS(anisotropy_stats(std::vector<double>{1}, std::vector<double>{1}), InvalidInput);
}

} // TEST_SUITE
