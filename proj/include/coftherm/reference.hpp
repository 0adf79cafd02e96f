#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coftherm/attention.hpp"
#include "coftherm/bondgraph.hpp"
#include "coftherm/mlkit.hpp"
#include "coftherm/spectral.hpp"
#include "coftherm/structio.hpp"

/// Straightforward single-threaded versions of the parallel kernels. They
/// share no code with the fast paths and exist for cross-checking and for
/// the benchmark target.
namespace coftherm::reference {

/// O(n^2) pair scan over every periodic image within the cutoff.
BondGraph bond_graph(const Structure& s, double scale = kDefaultBondScale);

/// Direct O(n_frames * max_lag) origin average.
std::vector<double> vacf(const Trajectory& t, std::span<const std::size_t> group,
                         const VacfOptions& opt = {});

/// Direct double sum over cells and frames for every (q, frequency).
PsedMap psed(const Trajectory& t, const Structure& unit_cell, const PsedOptions& opt);

/// Forms J = A'_L ... A'_1 as a dense matrix before reading the scores.
AtomAttention rollout(const AttentionStack& a, const RolloutOptions& opt = {});

/// Same trees as fit_forest, grown one after another on the calling thread.
ForestModel fit_forest(const FeatureTable& t, const ForestConfig& cfg = {});

} // namespace coftherm::reference
