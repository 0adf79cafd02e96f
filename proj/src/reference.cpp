#include "coftherm/reference.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "coftherm/elements.hpp"
#include "coftherm/error.hpp"
#include "coftherm/rng.hpp"

namespace coftherm::reference {

BondGraph bond_graph(const Structure& s, double scale) {
  if (!(scale >= 1.0 && scale <= 1.5))
    throw InvalidInput("bond scale factor must lie in [1.0, 1.5]");
  const std::size_t n = s.size();
  std::vector<double> radii(n);
  double r_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto rad = covalent_radius(s.atoms()[i].element);
    if (!rad) throw InvalidInput("no covalent radius for element " + s.atoms()[i].element);
    radii[i] = *rad;
    r_max = std::max(r_max, radii[i]);
  }
  const double cutoff = std::max(2.0 * scale * r_max, kOverlapDistance);
  const Vec3& L = s.cell_lengths();
  std::array<int, 3> span{};
  for (int d = 0; d < 3; ++d) span[d] = static_cast<int>(std::ceil(cutoff / L[d])) + 1;

  std::vector<std::vector<Edge>> adjacency(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 ri = s.cartesian(i);
    for (std::size_t j = 0; j < n; ++j) {
      const Vec3 rj = s.cartesian(j);
      for (int sx = -span[0]; sx <= span[0]; ++sx)
        for (int sy = -span[1]; sy <= span[1]; ++sy)
          for (int sz = -span[2]; sz <= span[2]; ++sz) {
            const ImageShift shift{sx, sy, sz};
            if (i == j && is_zero(shift)) continue;
            double d2 = 0.0;
            for (int d = 0; d < 3; ++d) {
              const double dd = rj[d] + shift[d] * L[d] - ri[d];
              d2 += dd * dd;
            }
            const double dist = std::sqrt(d2);
            if (dist < kOverlapDistance)
              throw InvalidInput("overlapping atoms " + std::to_string(std::min(i, j)) + " and " +
                                 std::to_string(std::max(i, j)));
            if (dist <= scale * (radii[i] + radii[j])) adjacency[i].push_back({j, shift, dist});
          }
    }
  }
  return BondGraph(std::move(adjacency));
}

std::vector<double> vacf(const Trajectory& t, std::span<const std::size_t> group,
                         const VacfOptions& opt) {
  if (group.empty()) throw InvalidInput("VACF group is empty");
  const std::size_t n = t.n_frames();
  const std::size_t lags = opt.max_lag == 0 ? n / 2 : opt.max_lag;
  if (lags < 1 || n < 2 * lags) throw InvalidInput("VACF needs n_frames >= 2 * max_lag");
  std::vector<double> out(lags, 0.0);
  for (std::size_t lag = 0; lag < lags; ++lag) {
    double acc = 0.0;
    for (auto a : group)
      for (int d = 0; d < 3; ++d) {
        double s = 0.0;
        for (std::size_t t0 = 0; t0 + lag < n; ++t0) s += t.velocity(t0 + lag, a, d) * t.velocity(t0, a, d);
        acc += s / static_cast<double>(n - lag);
      }
    out[lag] = acc;
  }
  if (opt.normalize) {
    const double norm = out[0];
    if (!(norm > 0.0)) throw NumericalError("all velocities in the group are zero");
    for (auto& v : out) v /= norm;
  }
  return out;
}

PsedMap psed(const Trajectory& t, const Structure& unit_cell, const PsedOptions& opt) {
  const SiteAssignment sa = assign_sites(t, unit_cell, opt.axis, opt.n_cells);
  const std::size_t nb = unit_cell.size();
  const std::size_t ncell = opt.n_cells;
  const std::size_t nf = t.n_frames();
  const std::size_t nfc = nf / 2 + 1;
  const double dt = t.dt_sample();
  const double a = unit_cell.cell_lengths()[opt.axis];
  const double two_pi = 2.0 * std::numbers::pi;

  PsedMap map;
  map.q.resize(ncell);
  map.frequency.resize(nfc);
  map.values.assign(ncell * nfc, 0.0);
  for (std::size_t k = 0; k < ncell; ++k)
    map.q[k] = two_pi * static_cast<double>(k) / (static_cast<double>(ncell) * a);
  for (std::size_t j = 0; j < nfc; ++j)
    map.frequency[j] = static_cast<double>(j) * kPerFsToTHz / (static_cast<double>(nf) * dt);

  for (std::size_t k = 0; k < ncell; ++k)
    for (std::size_t j = 0; j < nfc; ++j) {
      double total = 0.0;
      for (std::size_t b = 0; b < nb; ++b)
        for (int alpha = 0; alpha < 3; ++alpha) {
          std::complex<double> sum{0.0, 0.0};
          for (std::size_t i = 0; i < t.n_atoms(); ++i) {
            if (sa.basis[i] != b) continue;
            const double qr = map.q[k] * static_cast<double>(sa.cell[i]) * a;
            for (std::size_t f = 0; f < nf; ++f) {
              double v = t.velocity(f, i, alpha);
              if (opt.window == Window::Hann && nf > 1)
                v *= 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(f) / static_cast<double>(nf - 1)));
              const double wt = two_pi * static_cast<double>(j * f % nf) / static_cast<double>(nf);
              sum += v * std::polar(1.0, qr - wt);
            }
          }
          total += unit_cell.atoms()[b].mass * std::norm(sum * dt);
        }
      const double tau0 = static_cast<double>(nf) * dt;
      map.values[k * nfc + j] = total / (4.0 * std::numbers::pi * tau0 * static_cast<double>(ncell));
    }
  return map;
}

AtomAttention rollout(const AttentionStack& a, const RolloutOptions& opt) {
  if (!(opt.residual_weight >= 0.0 && opt.residual_weight < 1.0))
    throw InvalidInput("residual weight must lie in [0, 1)");
  const std::size_t t = a.n_tokens();
  const double w = opt.residual_weight;
  std::vector<double> joint(t * t, 0.0);
  for (std::size_t i = 0; i < t; ++i) joint[i * t + i] = 1.0;

  for (std::size_t l = 0; l < a.n_layers(); ++l) {
    std::vector<double> layer(t * t, 0.0);
    for (std::size_t r = 0; r < t; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < t; ++c) {
        double mean = 0.0;
        for (std::size_t h = 0; h < a.n_heads(); ++h) mean += a.at(l, h, r, c);
        mean /= static_cast<double>(a.n_heads());
        layer[r * t + c] = (1.0 - w) * mean + (r == c ? w : 0.0);
        sum += layer[r * t + c];
      }
      for (std::size_t c = 0; c < t; ++c) layer[r * t + c] /= sum;
    }
    // joint <- layer * joint, so the top layer ends up leftmost
    std::vector<double> next(t * t, 0.0);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t m = 0; m < t; ++m)
        for (std::size_t c = 0; c < t; ++c) next[r * t + c] += layer[r * t + m] * joint[m * t + c];
    joint.swap(next);
  }

  std::vector<double> row(t, 0.0);
  if (opt.reduction == Reduction::AggregateRow) {
    const std::size_t agg = a.aggregate_token();
    for (std::size_t c = 0; c < t; ++c) row[c] = joint[agg * t + c];
  } else {
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < t; ++c) row[c] += joint[r * t + c];
  }
  AtomAttention out;
  out.scores.assign(a.atom_count(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < t; ++i)
    if (a.tokens()[i].kind == TokenKind::Atom) {
      out.scores[static_cast<std::size_t>(a.tokens()[i].index)] = row[i];
      total += row[i];
    }
  if (!(total > 0.0)) throw NumericalError("rollout assigns no attention to atom tokens");
  for (auto& s : out.scores) s /= total;
  return out;
}

ForestModel fit_forest(const FeatureTable& t, const ForestConfig& cfg) {
  t.validate();
  if (t.rows() < 20) throw InvalidInput("fit_forest needs at least 20 rows");
  const auto& y = t.target();
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); }))
    throw InvalidInput("degenerate constant target; nothing to learn");
  ForestModel m;
  m.feature_names = t.feature_names();
  m.config = cfg;
  const std::size_t n = t.rows();
  for (std::size_t k = 0; k < cfg.n_trees; ++k) {
    auto rng = Xoshiro256::derive(cfg.seed, k, 0);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
    m.trees.push_back(grow_tree(t, sample, cfg, rng.next()));
  }
  m.oob_prediction.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    std::size_t c = 0;
    for (const auto& tree : m.trees)
      if (tree.in_bag[r] == 0) {
        s += tree.predict(t.row(r));
        ++c;
      }
    if (c) m.oob_prediction[r] = s / static_cast<double>(c);
  }
  return m;
}

} // namespace coftherm::reference
