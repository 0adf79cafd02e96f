#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coftherm/bondgraph.hpp"
#include "coftherm/mlkit.hpp"

namespace coftherm {

/// One COF in a batch manifest. Empty paths mean "not available".
struct ManifestEntry {
  std::string name;
  std::filesystem::path structure;
  std::filesystem::path profile_x;
  std::filesystem::path profile_y;
  std::filesystem::path trajectory;
  std::optional<double> fs_per_step;
};

/// CSV manifest with a header naming any of: name, structure, profile_x,
/// profile_y, trajectory, fs_per_step. Relative paths resolve against the
/// manifest's directory. Throws ParseError on malformed input.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Worker count from COFTHERM_THREADS, else the hardware concurrency.
std::size_t worker_count();

struct PipelineOptions {
  double bond_scale = kDefaultBondScale;
  std::size_t trim = 0;
  bool exclude_h = false;
  bool include_h_groups = false;
  std::size_t workers = 0; ///< 0 means worker_count()
};

/// Result row; NaN marks a quantity that was not computed.
struct PipelineRow {
  std::string name;
  bool ok = true;
  std::string error;
  double density = 0.0;
  double dmr = 0.0;
  double kx = 0.0;
  double ky = 0.0;
  double k_mean = 0.0;
  double ratio = 0.0;
  double s = 0.0;
};

/// Processes every entry on a bounded worker pool. A failing entry yields
/// an error row with whatever was computed before the failure.
std::vector<PipelineRow> run_pipeline(const std::vector<ManifestEntry>& entries,
                                      const PipelineOptions& opt = {});
std::string pipeline_to_csv(const std::vector<PipelineRow>& rows);
/// name,kx,ky,mean,ratio,status,error
std::string kappa_batch_to_csv(const std::vector<PipelineRow>& rows);

struct FeatureBuild {
  FeatureTable table;
  std::vector<std::string> skipped; ///< "name: reason"
};

/// Joins a directory of structure files (<name>.cif / .xyz / .extxyz) with a
/// descriptor CSV holding `name`, the target column and any extra numeric
/// descriptors. Density and DMR are computed from the structure; rows whose
/// structure is missing or fails are skipped and reported.
FeatureBuild build_feature_table(const std::filesystem::path& structures_dir,
                                 const std::filesystem::path& descriptors,
                                 const std::string& target = "kappa",
                                 double bond_scale = kDefaultBondScale);

} // namespace coftherm
