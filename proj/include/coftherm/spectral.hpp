#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coftherm/dangling.hpp"
#include "coftherm/structio.hpp"

namespace coftherm {

/// Converts 1/fs to THz.
inline constexpr double kPerFsToTHz = 1000.0;

struct VacfOptions {
  std::size_t max_lag = 0; ///< number of lags; 0 means n_frames / 2
  bool normalize = true;   ///< divide by the lag-0 value
};

/// Velocity autocorrelation of an atom group, averaged over every valid
/// time origin: C(t) = sum_{xyz} sum_{j} <v(t0 + t) v(t0)>. Returns
/// `max_lag` values; normalized so that C(0) = 1 unless disabled.
///
/// Correlations are computed per (atom, component) channel with
/// zero-padded FFTs, channels in parallel.
std::vector<double> vacf(const Trajectory& t, std::span<const std::size_t> group,
                         const VacfOptions& opt = {});

enum class Window { None, Hann };

struct VdosOptions {
  Window window = Window::None;
  std::size_t pad_factor = 1; ///< zero-pad the VACF to pad_factor * n_lag
};

struct Spectrum {
  std::vector<double> frequency; ///< THz, uniform, starts at 0
  std::vector<double> values;
};

/// Magnitude of the one-sided discrete Fourier transform of a VACF sampled
/// every `dt_fs`. Output length is M/2 + 1 with M = pad_factor * n_lag and
/// spacing 1 / (M dt).
Spectrum vdos(std::span<const double> vacf_values, double dt_fs, const VdosOptions& opt = {});

/// Atom group keyed by element and branch membership.
struct SpectralGroup {
  std::string element;
  bool dangling = false;
  std::vector<std::size_t> members; ///< trajectory atom indices

  std::string name() const { return dangling ? element + "(d)" : element; }
};

struct GroupOptions {
  bool include_h = false;
};

/// One group per element x branch combination present in the structure.
/// Trajectory atom i maps to structure atom i % n_structure_atoms, which is
/// how a replicated supercell is ordered. Without labels every atom counts
/// as main branch. Hydrogen is skipped unless requested.
std::vector<SpectralGroup> make_groups(const Structure& s, std::size_t n_traj_atoms,
                                       const std::vector<BranchLabel>* labels = nullptr,
                                       const GroupOptions& opt = {});

struct SpectralProfile {
  std::vector<double> frequency; ///< THz
  std::vector<std::string> group_names;
  std::vector<std::vector<double>> vdos; ///< [group][frequency]

  std::size_t n_groups() const noexcept { return vdos.size(); }
  void validate() const;
};

SpectralProfile compute_vdos_profile(const Trajectory& t, std::span<const SpectralGroup> groups,
                                     const VacfOptions& vacf_opt = {},
                                     const VdosOptions& vdos_opt = {});

/// Scale every group to unit trapezoidal area.
void renormalize_area(SpectralProfile& p);

/// Overlap metric: area under the pointwise minimum over groups divided by
/// the area under the pointwise maximum (trapezoidal rule).
double overlap_s(const SpectralProfile& p);

struct PsedOptions {
  int axis = 0;             ///< 0, 1, 2 for x, y, z
  std::size_t n_cells = 0;  ///< unit cells along the axis
  Window window = Window::None;
};

/// Phonon spectral energy density on the 1D q-path along `axis`.
/// Values are stored row-major [q][frequency].
struct PsedMap {
  std::vector<double> q;         ///< 1/Å, 2 pi k / (n_cells a)
  std::vector<double> frequency; ///< THz, non-negative half
  std::vector<double> values;

  std::size_t n_q() const noexcept { return q.size(); }
  std::size_t n_freq() const noexcept { return frequency.size(); }
  double at(std::size_t iq, std::size_t ifreq) const { return values[iq * n_freq() + ifreq]; }
};

/// Lattice site (cell n, basis atom b) of every trajectory atom, found from
/// its time-averaged position. Throws when an atom is farther than half a
/// cell from every site or two atoms claim the same site.
struct SiteAssignment {
  std::vector<std::size_t> cell;
  std::vector<std::size_t> basis;
};
SiteAssignment assign_sites(const Trajectory& t, const Structure& unit_cell, int axis,
                            std::size_t n_cells);

/// Phi(q, w) = 1 / (4 pi tau0 N) sum_a sum_b m_b |sum_n int v_a(n,b;t)
/// exp(i q r_n - i w t) dt|^2, evaluated with a 2D FFT over (cell, frame)
/// for every (basis atom, component) pair in parallel.
PsedMap psed(const Trajectory& t, const Structure& unit_cell, const PsedOptions& opt);

struct PlotBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Linear-interpolated percentile (p in [0, 100]) of `values`.
double percentile(std::vector<double> values, double p);

/// log10 maps plus shared color bounds for one map or a pair: lower is the
/// minimum over both log maps, upper the 99th percentile of the pooled log
/// values. Non-positive entries are clamped to the smallest positive value.
struct PsedPlotData {
  std::vector<double> log_first;
  std::vector<double> log_second;
  PlotBounds bounds;
};
PsedPlotData emit_psed_plotdata(const PsedMap& first, const PsedMap* second = nullptr);

std::string psed_to_csv(const PsedMap& m, std::span<const double> values);
std::string profile_to_csv(const SpectralProfile& p);

} // namespace coftherm
