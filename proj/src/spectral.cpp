#include "coftherm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include <fftw3.h>

#include "coftherm/error.hpp"

namespace coftherm {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <typename T>
struct FftwFree {
  void operator()(T* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree<T>>;

FftwBuffer<double> alloc_real(std::size_t n) {
  return FftwBuffer<double>(fftw_alloc_real(n));
}
FftwBuffer<fftw_complex> alloc_complex(std::size_t n) {
  return FftwBuffer<fftw_complex>(fftw_alloc_complex(n));
}

class Plan {
public:
  explicit Plan(fftw_plan p) : plan_(p) {
    if (!plan_) throw NumericalError("FFTW plan creation failed");
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  fftw_plan get() const { return plan_; }

private:
  fftw_plan plan_;
};

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double hann_half(std::size_t i, std::size_t n) {
  // decaying half window for one-sided correlation data: 1 at i=0, 0 at i=n
  return 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)));
}

double hann_full(std::size_t i, std::size_t n) {
  if (n < 2) return 1.0;
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                               static_cast<double>(n - 1)));
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return area;
}

constexpr std::size_t kReductionChunks = 16;

} // namespace

std::vector<double> vacf(const Trajectory& t, std::span<const std::size_t> group,
                         const VacfOptions& opt) {
  if (group.empty()) throw InvalidInput("VACF group is empty");
  for (auto a : group)
    if (a >= t.n_atoms())
      throw InvalidInput("VACF group index " + std::to_string(a) + " out of range");
  const std::size_t n = t.n_frames();
  const std::size_t lags = opt.max_lag == 0 ? n / 2 : opt.max_lag;
  if (lags < 1 || n < 2 * lags)
    throw InvalidInput("VACF needs n_frames >= 2 * max_lag (n_frames " + std::to_string(n) +
                       ", max_lag " + std::to_string(lags) + ")");

  const std::size_t pad = next_pow2(n + lags);
  const std::size_t n_complex = pad / 2 + 1;
  const std::size_t channels = group.size() * 3;
  const std::size_t chunks = std::min(channels, kReductionChunks);

  auto probe_in = alloc_real(pad);
  auto probe_out = alloc_complex(n_complex);
  std::unique_ptr<Plan> fwd, bwd;
  {
    std::lock_guard lock(planner_mutex());
    fwd = std::make_unique<Plan>(
        fftw_plan_dft_r2c_1d(static_cast<int>(pad), probe_in.get(), probe_out.get(), FFTW_ESTIMATE));
    bwd = std::make_unique<Plan>(
        fftw_plan_dft_c2r_1d(static_cast<int>(pad), probe_out.get(), probe_in.get(), FFTW_ESTIMATE));
  }

  std::vector<std::vector<double>> partial(chunks, std::vector<double>(lags, 0.0));

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t c = 0; c < chunks; ++c) {
    auto in = alloc_real(pad);
    auto spec = alloc_complex(n_complex);
    const std::size_t begin = c * channels / chunks;
    const std::size_t end = (c + 1) * channels / chunks;
    auto& acc = partial[c];
    for (std::size_t ch = begin; ch < end; ++ch) {
      const std::size_t atom = group[ch / 3];
      const int dim = static_cast<int>(ch % 3);
      for (std::size_t f = 0; f < n; ++f) in[f] = t.velocity(f, atom, dim);
      std::fill(in.get() + n, in.get() + pad, 0.0);
      fftw_execute_dft_r2c(fwd->get(), in.get(), spec.get());
      for (std::size_t k = 0; k < n_complex; ++k) {
        spec[k][0] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
        spec[k][1] = 0.0;
      }
      fftw_execute_dft_c2r(bwd->get(), spec.get(), in.get());
      for (std::size_t lag = 0; lag < lags; ++lag)
        acc[lag] += in[lag] / static_cast<double>(pad) / static_cast<double>(n - lag);
    }
  }

  std::vector<double> out(lags, 0.0);
  for (const auto& p : partial)
    for (std::size_t lag = 0; lag < lags; ++lag) out[lag] += p[lag];

  if (opt.normalize) {
    const double norm = out[0];
    if (!(norm > 0.0))
      throw NumericalError("all velocities in the group are zero; VACF normalization undefined");
    for (auto& v : out) v /= norm;
    out[0] = 1.0;
  }
  return out;
}

Spectrum vdos(std::span<const double> vacf_values, double dt_fs, const VdosOptions& opt) {
  const std::size_t lags = vacf_values.size();
  if (lags < 2) throw InvalidInput("VDOS needs at least 2 VACF lags");
  if (!(dt_fs > 0.0)) throw InvalidInput("sampling interval must be positive");
  if (opt.pad_factor < 1) throw InvalidInput("pad factor must be >= 1");
  for (double v : vacf_values)
    if (!std::isfinite(v)) throw InvalidInput("VACF contains non-finite values");

  const std::size_t m = lags * opt.pad_factor;
  const std::size_t n_out = m / 2 + 1;
  auto in = alloc_real(m);
  auto out = alloc_complex(n_out);
  std::unique_ptr<Plan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<Plan>(
        fftw_plan_dft_r2c_1d(static_cast<int>(m), in.get(), out.get(), FFTW_ESTIMATE));
  }
  for (std::size_t i = 0; i < m; ++i) {
    double v = i < lags ? vacf_values[i] : 0.0;
    if (opt.window == Window::Hann && i < lags) v *= hann_half(i, lags);
    in[i] = v;
  }
  fftw_execute(plan->get());

  Spectrum s;
  s.frequency.resize(n_out);
  s.values.resize(n_out);
  const double df = kPerFsToTHz / (static_cast<double>(m) * dt_fs);
  for (std::size_t k = 0; k < n_out; ++k) {
    s.frequency[k] = static_cast<double>(k) * df;
    s.values[k] = std::hypot(out[k][0], out[k][1]);
  }
  return s;
}

std::vector<SpectralGroup> make_groups(const Structure& s, std::size_t n_traj_atoms,
                                       const std::vector<BranchLabel>* labels,
                                       const GroupOptions& opt) {
  const std::size_t b = s.size();
  if (b == 0) throw InvalidInput("structure has no atoms");
  if (n_traj_atoms % b != 0)
    throw InvalidInput("trajectory atom count " + std::to_string(n_traj_atoms) +
                       " is not a multiple of the structure atom count " + std::to_string(b));
  if (labels && labels->size() != b) throw InvalidInput("label count does not match structure");

  std::map<std::pair<std::string, bool>, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < n_traj_atoms; ++i) {
    const std::size_t site = i % b;
    const auto& el = s.atoms()[site].element;
    if (el == "H" && !opt.include_h) continue;
    const bool dangling = labels && (*labels)[site] != BranchLabel::Main;
    buckets[{el, dangling}].push_back(i);
  }
  std::vector<SpectralGroup> groups;
  for (auto& [key, members] : buckets)
    groups.push_back({key.first, key.second, std::move(members)});
  return groups;
}

void SpectralProfile::validate() const {
  if (frequency.size() < 2) throw InvalidInput("frequency grid needs at least 2 points");
  const double df = frequency[1] - frequency[0];
  for (std::size_t i = 1; i < frequency.size(); ++i) {
    const double d = frequency[i] - frequency[i - 1];
    if (!(d > 0.0) || std::abs(d - df) > 1e-9 * std::max(1.0, std::abs(df)))
      throw InvalidInput("frequency grid must be strictly increasing and uniform");
  }
  if (group_names.size() != vdos.size()) throw InvalidInput("group name count mismatch");
  for (const auto& g : vdos) {
    if (g.size() != frequency.size()) throw InvalidInput("groups must share one frequency grid");
    for (double v : g)
      if (!std::isfinite(v)) throw InvalidInput("VDOS contains non-finite values");
  }
}

SpectralProfile compute_vdos_profile(const Trajectory& t, std::span<const SpectralGroup> groups,
                                     const VacfOptions& vacf_opt, const VdosOptions& vdos_opt) {
  SpectralProfile p;
  for (const auto& g : groups) {
    const auto c = vacf(t, g.members, vacf_opt);
    auto spec = vdos(c, t.dt_sample(), vdos_opt);
    if (p.frequency.empty()) p.frequency = std::move(spec.frequency);
    p.group_names.push_back(g.name());
    p.vdos.push_back(std::move(spec.values));
  }
  return p;
}

void renormalize_area(SpectralProfile& p) {
  for (auto& g : p.vdos) {
    const double area = trapezoid(p.frequency, g);
    if (!(area > 0.0)) throw NumericalError("cannot renormalize a group with zero area");
    for (auto& v : g) v /= area;
  }
}

double overlap_s(const SpectralProfile& p) {
  if (p.n_groups() < 2) throw InvalidInput("overlap metric needs at least 2 groups");
  p.validate();
  const std::size_t nf = p.frequency.size();
  std::vector<double> lo(nf), hi(nf);
  for (std::size_t k = 0; k < nf; ++k) {
    lo[k] = hi[k] = p.vdos[0][k];
    for (std::size_t g = 1; g < p.n_groups(); ++g) {
      lo[k] = std::min(lo[k], p.vdos[g][k]);
      hi[k] = std::max(hi[k], p.vdos[g][k]);
    }
  }
  const double num = trapezoid(p.frequency, lo);
  const double den = trapezoid(p.frequency, hi);
  if (!(den > 0.0)) throw NumericalError("max-envelope integral is zero; overlap undefined");
  return num / den;
}

// -------------------------------------------------------------------- pSED

SiteAssignment assign_sites(const Trajectory& t, const Structure& unit_cell, int axis,
                            std::size_t n_cells) {
  if (axis < 0 || axis > 2) throw InvalidInput("axis must be x, y or z");
  if (n_cells < 2) throw InvalidInput("pSED needs at least 2 cells along the axis");
  if (!t.has_positions()) throw InvalidInput("pSED needs positions in the trajectory");
  const std::size_t nb = unit_cell.size();
  if (t.n_atoms() != nb * n_cells)
    throw InvalidInput("trajectory has " + std::to_string(t.n_atoms()) + " atoms, expected " +
                       std::to_string(nb * n_cells) + " (unit cell x cells)");

  const Vec3& L = unit_cell.cell_lengths();
  Vec3 box = L;
  box[axis] *= static_cast<double>(n_cells);
  const double half_cell = 0.5 * std::min({L[0], L[1], L[2]});

  SiteAssignment sa;
  sa.cell.resize(t.n_atoms());
  sa.basis.resize(t.n_atoms());
  std::vector<int> owner(t.n_atoms(), -1);
  for (std::size_t a = 0; a < t.n_atoms(); ++a) {
    Vec3 mean{};
    for (int d = 0; d < 3; ++d) {
      const double p0 = t.position(0, a, d);
      double acc = 0.0;
      for (std::size_t f = 0; f < t.n_frames(); ++f) {
        double dd = t.position(f, a, d) - p0;
        dd -= box[d] * std::round(dd / box[d]);
        acc += dd;
      }
      mean[d] = p0 + acc / static_cast<double>(t.n_frames());
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_b = 0;
    long best_n = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      const Vec3 site = unit_cell.cartesian(b);
      double d2 = 0.0;
      long cell = 0;
      for (int d = 0; d < 3; ++d) {
        double dd = mean[d] - site[d];
        const double k = std::round(dd / L[d]);
        if (d == axis) cell = static_cast<long>(k);
        dd -= k * L[d];
        d2 += dd * dd;
      }
      const double dist = std::sqrt(d2);
      if (dist < best) {
        best = dist;
        best_b = b;
        best_n = cell;
      }
    }
    if (best > half_cell)
      throw InvalidInput("atom " + std::to_string(a) + " is " + format_double(best) +
                         " A from every lattice site; cannot assign it to a unit cell");
    const auto nc = static_cast<long>(n_cells);
    sa.cell[a] = static_cast<std::size_t>(((best_n % nc) + nc) % nc);
    sa.basis[a] = best_b;
    const std::size_t slot = sa.cell[a] * nb + best_b;
    if (owner[slot] >= 0)
      throw InvalidInput("atoms " + std::to_string(owner[slot]) + " and " + std::to_string(a) +
                         " map to the same lattice site");
    owner[slot] = static_cast<int>(a);
  }
  return sa;
}

PsedMap psed(const Trajectory& t, const Structure& unit_cell, const PsedOptions& opt) {
  const SiteAssignment sa = assign_sites(t, unit_cell, opt.axis, opt.n_cells);
  const std::size_t nb = unit_cell.size();
  const std::size_t ncell = opt.n_cells;
  const std::size_t nf = t.n_frames();
  const std::size_t nfc = nf / 2 + 1;
  const double dt = t.dt_sample();
  const double a = unit_cell.cell_lengths()[opt.axis];

  // site -> trajectory atom
  std::vector<std::size_t> atom_at(ncell * nb);
  for (std::size_t i = 0; i < t.n_atoms(); ++i) atom_at[sa.cell[i] * nb + sa.basis[i]] = i;

  auto probe_in = alloc_real(ncell * nf);
  auto probe_out = alloc_complex(ncell * nfc);
  std::unique_ptr<Plan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<Plan>(fftw_plan_dft_r2c_2d(static_cast<int>(ncell), static_cast<int>(nf),
                                                       probe_in.get(), probe_out.get(),
                                                       FFTW_ESTIMATE));
  }

  const std::size_t tasks = nb * 3;
  const std::size_t chunks = std::min(tasks, kReductionChunks);
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(ncell * nfc, 0.0));

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t c = 0; c < chunks; ++c) {
    auto in = alloc_real(ncell * nf);
    auto out = alloc_complex(ncell * nfc);
    auto& acc = partial[c];
    for (std::size_t task = c * tasks / chunks; task < (c + 1) * tasks / chunks; ++task) {
      const std::size_t b = task / 3;
      const int alpha = static_cast<int>(task % 3);
      for (std::size_t n = 0; n < ncell; ++n) {
        const std::size_t atom = atom_at[n * nb + b];
        for (std::size_t f = 0; f < nf; ++f) {
          double v = t.velocity(f, atom, alpha);
          if (opt.window == Window::Hann) v *= hann_full(f, nf);
          in[n * nf + f] = v;
        }
      }
      fftw_execute_dft_r2c(plan->get(), in.get(), out.get());
      const double m = unit_cell.atoms()[b].mass;
      for (std::size_t k = 0; k < ncell; ++k) {
        // forward FFT carries exp(-i 2pi k' n / N); exp(+i q r_n) is k' = -k
        const std::size_t kp = (ncell - k) % ncell;
        for (std::size_t j = 0; j < nfc; ++j) {
          const double re = out[kp * nfc + j][0];
          const double im = out[kp * nfc + j][1];
          acc[k * nfc + j] += m * (re * re + im * im);
        }
      }
    }
  }

  PsedMap map;
  map.q.resize(ncell);
  map.frequency.resize(nfc);
  map.values.assign(ncell * nfc, 0.0);
  const double tau0 = static_cast<double>(nf) * dt;
  const double pref = dt * dt / (4.0 * std::numbers::pi * tau0 * static_cast<double>(ncell));
  for (std::size_t k = 0; k < ncell; ++k)
    map.q[k] = 2.0 * std::numbers::pi * static_cast<double>(k) / (static_cast<double>(ncell) * a);
  for (std::size_t j = 0; j < nfc; ++j)
    map.frequency[j] = static_cast<double>(j) * kPerFsToTHz / (static_cast<double>(nf) * dt);
  for (const auto& p : partial)
    for (std::size_t i = 0; i < p.size(); ++i) map.values[i] += p[i];
  for (auto& v : map.values) v *= pref;
  return map;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidInput("percentile of an empty set");
  if (p < 0.0 || p > 100.0) throw InvalidInput("percentile must lie in [0, 100]");
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double v_lo = values[lo];
  if (frac == 0.0 || lo + 1 >= values.size()) return v_lo;
  const double v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return v_lo + frac * (v_hi - v_lo);
}

PsedPlotData emit_psed_plotdata(const PsedMap& first, const PsedMap* second) {
  if (first.values.empty() || (second && second->values.empty()))
    throw InvalidInput("pSED map is empty");
  double floor_value = std::numeric_limits<double>::infinity();
  auto scan = [&](const PsedMap& m) {
    for (double v : m.values)
      if (v > 0.0) floor_value = std::min(floor_value, v);
  };
  scan(first);
  if (second) scan(*second);
  if (!std::isfinite(floor_value))
    throw NumericalError("pSED map is identically zero; log scale undefined");

  PsedPlotData out;
  auto to_log = [&](const PsedMap& m) {
    std::vector<double> l(m.values.size());
    for (std::size_t i = 0; i < l.size(); ++i)
      l[i] = std::log10(m.values[i] > 0.0 ? m.values[i] : floor_value);
    return l;
  };
  out.log_first = to_log(first);
  if (second) out.log_second = to_log(*second);

  std::vector<double> pooled = out.log_first;
  pooled.insert(pooled.end(), out.log_second.begin(), out.log_second.end());
  out.bounds.lower = *std::min_element(pooled.begin(), pooled.end());
  out.bounds.upper = percentile(std::move(pooled), 99.0);
  return out;
}

namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

} // namespace

std::string psed_to_csv(const PsedMap& m, std::span<const double> values) {
  if (values.size() != m.values.size()) throw InvalidInput("value count does not match map");
  std::ostringstream out;
  out << "q_inv_A";
  for (double f : m.frequency) out << "," << fmt6(f);
  out << "\n";
  for (std::size_t k = 0; k < m.n_q(); ++k) {
    out << fmt6(m.q[k]);
    for (std::size_t j = 0; j < m.n_freq(); ++j) out << "," << fmt6(values[k * m.n_freq() + j]);
    out << "\n";
  }
  return out.str();
}

std::string profile_to_csv(const SpectralProfile& p) {
  std::ostringstream out;
  out << "frequency_THz";
  for (const auto& g : p.group_names) out << "," << g;
  out << "\n";
  for (std::size_t k = 0; k < p.frequency.size(); ++k) {
    out << fmt6(p.frequency[k]);
    for (const auto& g : p.vdos) out << "," << fmt6(g[k]);
    out << "\n";
  }
  return out.str();
}

} // namespace coftherm
