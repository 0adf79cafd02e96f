#include "coftherm/nemd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coftherm/error.hpp"
#include "coftherm/mlkit.hpp"
#include "coftherm/structio.hpp"

namespace coftherm {

double heat_rate(std::size_t n_atoms, double k) {
  if (n_atoms == 0) throw InvalidInput("heat rate needs a positive atom count");
  if (k < 0.0 || !std::isfinite(k)) throw InvalidInput("heat constant must be >= 0");
  return k * static_cast<double>(n_atoms);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("fit_line: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw InvalidInput("fit_line: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw NumericalError("fit_line: x values are all equal");
  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

FitHalves fit_halves(const BinProfile& p, std::size_t trim) {
  p.validate();
  const auto n = static_cast<long>(p.n_bins);
  const long src_lo = static_cast<long>(*std::min_element(p.source_bins.begin(), p.source_bins.end()));
  const long src_hi = static_cast<long>(*std::max_element(p.source_bins.begin(), p.source_bins.end()));

  // nearest sink below the sources and above them; periodic wrap otherwise
  long sink_below = -1;
  long sink_above = n;
  bool found_below = false, found_above = false;
  for (auto s : p.sink_bins) {
    const auto b = static_cast<long>(s);
    if (b < src_lo && (!found_below || b > sink_below)) {
      sink_below = b;
      found_below = true;
    }
    if (b > src_hi && (!found_above || b < sink_above)) {
      sink_above = b;
      found_above = true;
    }
  }
  if (!found_below) {
    // only sinks above: the lower half wraps around through index n-1
    sink_below = *std::max_element(p.sink_bins.begin(), p.sink_bins.end()) - n;
  }
  if (!found_above) {
    sink_above = static_cast<long>(*std::min_element(p.sink_bins.begin(), p.sink_bins.end())) + n;
  }

  const auto t = static_cast<long>(trim);
  FitHalves h;
  for (long b = sink_below + 1 + t; b <= src_lo - 1 - t; ++b) {
    const auto idx = static_cast<std::size_t>(((b % n) + n) % n);
    if (!p.is_reservoir(idx)) h.left.push_back(idx);
  }
  for (long b = src_hi + 1 + t; b <= sink_above - 1 - t; ++b) {
    const auto idx = static_cast<std::size_t>(((b % n) + n) % n);
    if (!p.is_reservoir(idx)) h.right.push_back(idx);
  }
  return h;
}

namespace {

LinearFit fit_half(const BinProfile& p, const std::vector<std::size_t>& bins,
                   const char* which) {
  if (bins.size() < 3)
    throw InvalidInput(std::string("fewer than 3 fit points in the ") + which + " half (" +
                       std::to_string(bins.size()) + ")");
  std::vector<double> x, y;
  long prev = -1;
  long unwrap = 0;
  for (auto b : bins) {
    // positions continue past the periodic boundary when a half wraps
    if (prev >= 0 && static_cast<long>(b) < prev) unwrap += static_cast<long>(p.n_bins);
    prev = static_cast<long>(b);
    const double center = (static_cast<double>(static_cast<long>(b) + unwrap) + 0.5) *
                          p.bin_width;
    x.push_back(center);
    y.push_back(p.temperature[b]);
  }
  return fit_line(x, y);
}

} // namespace

KappaResult extract_kappa(const BinProfile& p, std::size_t trim) {
  const FitHalves h = fit_halves(p, trim);
  const LinearFit left = fit_half(p, h.left, "left");
  const LinearFit right = fit_half(p, h.right, "right");
  const double grad = 0.5 * (std::abs(left.slope) + std::abs(right.slope));
  if (!(grad > 0.0) || !std::isfinite(grad))
    throw NumericalError("zero temperature gradient (left slope " + format_double(left.slope) +
                         " K/A, right slope " + format_double(right.slope) +
                         " K/A): conductivity is unbounded");
  KappaResult r;
  r.slope_left = left.slope;
  r.slope_right = right.slope;
  r.fit_r2_left = left.r2;
  r.fit_r2_right = right.r2;
  r.n_left = left.n;
  r.n_right = right.n;
  r.dE_dt_watts = p.heat_rate * kKcalPerMolFsToWatt;
  // W / (Å^2 * K/Å) = W / (Å K) = 1e10 W/(m K)
  r.kappa = r.dE_dt_watts / (p.cross_section * grad) * 1e10;
  return r;
}

KappaPair average_kappa(double kx, double ky) {
  if (!(kx > 0.0) || !(ky > 0.0)) throw InvalidInput("conductivities must be positive");
  return {0.5 * (kx + ky), kx / ky};
}

bool stability_filter(double l0, double l1, double threshold) {
  if (!(l0 > 0.0)) throw InvalidInput("reference length must be positive");
  return std::abs(l1 - l0) / l0 < threshold;
}

AnisotropyStats anisotropy_stats(std::span<const double> kx, std::span<const double> ky) {
  if (kx.size() != ky.size() || kx.size() < 2)
    throw InvalidInput("anisotropy_stats needs two equal-length columns of >= 2 values");
  const std::size_t n = kx.size();
  AnisotropyStats s;
  std::vector<double> ratio(n);
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ratio[i] = average_kappa(kx[i], ky[i]).ratio;
    s.mean_ratio += ratio[i];
    my += ky[i];
  }
  s.mean_ratio /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s.std_ratio += (ratio[i] - s.mean_ratio) * (ratio[i] - s.mean_ratio);
    ss_res += (ky[i] - kx[i]) * (ky[i] - kx[i]);
    ss_tot += (ky[i] - my) * (ky[i] - my);
  }
  s.std_ratio = std::sqrt(s.std_ratio / static_cast<double>(n));
  s.parity_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  const double r = pearson(kx, ky);
  s.linear_r2 = r * r;
  return s;
}

} // namespace coftherm
