#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace coftherm {

struct BinProfile;

/// Per-atom heat exchange constant, kcal/mol/fs.
inline constexpr double kDefaultHeatConstant = 1e-7;

inline constexpr double kJoulePerKcal = 4184.0;
inline constexpr double kAvogadro = 6.02214076e23;
/// 1 kcal/mol/fs expressed in watts (~6.9477e-6).
inline constexpr double kKcalPerMolFsToWatt = kJoulePerKcal / kAvogadro * 1e15;

/// Heat exchange rate proportional to system size: k * n_atoms.
/// A zero rate is returned as-is; callers decide whether to warn.
double heat_rate(std::size_t n_atoms, double k = kDefaultHeatConstant);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = a x + b via the closed-form normal equations.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct KappaResult {
  double kappa = 0.0;        ///< W/m/K
  double slope_left = 0.0;   ///< K/Å
  double slope_right = 0.0;  ///< K/Å
  double fit_r2_left = 0.0;
  double fit_r2_right = 0.0;
  double dE_dt_watts = 0.0;
  std::size_t n_left = 0;    ///< fit points per half
  std::size_t n_right = 0;
};

/// Bin indices used for the two linear fits: the run of non-reservoir bins
/// between the lower sink and the sources, and between the sources and the
/// upper sink (wrapping periodically when a sink sits only on one side).
/// `trim` drops that many extra bins next to every reservoir.
struct FitHalves {
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
};
FitHalves fit_halves(const BinProfile& p, std::size_t trim = 0);

/// Fourier's law on a steady-state profile:
/// kappa = dE/dt / (S * mean(|slope_left|, |slope_right|)).
KappaResult extract_kappa(const BinProfile& p, std::size_t trim = 0);

struct KappaPair {
  double mean = 0.0;
  double ratio = 0.0; ///< kx / ky
};
KappaPair average_kappa(double kx, double ky);

/// True when the relative change of a supercell dimension stays below
/// `threshold`.
bool stability_filter(double l0, double l1, double threshold = 0.10);

struct AnisotropyStats {
  double mean_ratio = 0.0;
  double std_ratio = 0.0;
  double parity_r2 = 0.0; ///< 1 - SS(ky - kx) / SS(ky - mean ky)
  double linear_r2 = 0.0; ///< squared Pearson r between kx and ky
};
AnisotropyStats anisotropy_stats(std::span<const double> kx, std::span<const double> ky);

} // namespace coftherm
