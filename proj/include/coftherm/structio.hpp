#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace coftherm {

using Vec3 = std::array<double, 3>;

/// Wrap a fractional coordinate into [0, 1).
double wrap_fractional(double x);

struct Atom {
  std::string element; ///< canonical symbol, e.g. "C", "Cl"
  double mass = 0.0;   ///< amu
  Vec3 frac{};         ///< fractional coordinates in [0,1)
};

/// Periodic crystal structure in an orthogonal cell.
///
/// The constructor validates everything a parsed file must satisfy:
/// positive cell lengths, right angles, known element symbols. Fractional
/// coordinates are wrapped into [0,1) and masses filled from the element
/// table, so any constructed Structure is valid.
class Structure {
public:
  struct AtomSite {
    std::string element;
    Vec3 frac{};
  };

  Structure(std::string name, Vec3 cell_lengths, std::vector<AtomSite> sites,
            Vec3 cell_angles = {90.0, 90.0, 90.0});

  const std::string& name() const noexcept { return name_; }
  const Vec3& cell_lengths() const noexcept { return lengths_; }
  const Vec3& cell_angles() const noexcept { return angles_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }

  Vec3 cartesian(std::size_t i) const;
  double volume() const;      ///< Å^3
  double total_mass() const;  ///< amu
  /// Mass density in g/cm^3.
  double density() const;

  /// Replicate the cell (nx, ny, nz) times. Atom order is image-major:
  /// all atoms of image (0,0,0), then (1,0,0), ... with x fastest.
  Structure replicate(int nx, int ny, int nz) const;

private:
  std::string name_;
  Vec3 lengths_;
  Vec3 angles_;
  std::vector<Atom> atoms_;
};

enum class StructureFormat { Cif, ExtendedXyz };

/// Guess the format from the file extension (.cif, .xyz/.extxyz).
StructureFormat format_from_path(const std::filesystem::path& path);

Structure parse_structure(const std::filesystem::path& path, StructureFormat format);
Structure parse_structure(const std::filesystem::path& path);

/// Strict CIF subset: one data block, `_cell_length_*`, `_cell_angle_*`
/// and an `_atom_site_` loop with fractional coordinates. Uncertainties
/// in parentheses ("1.234(5)") are accepted and dropped.
Structure parse_cif(std::string_view text, const std::string& source = "<cif>");
std::string write_cif(const Structure& s);

/// Extra per-atom column appended to extended-XYZ output.
struct XyzColumn {
  std::string name;
  std::vector<std::string> values; ///< one entry per atom, already formatted
  bool is_real = false;            ///< R vs S in the Properties string
};

/// Extended XYZ with a diagonal `Lattice="..."` and Cartesian `pos`.
Structure parse_extxyz(std::string_view text, const std::string& source = "<xyz>");
std::string write_extxyz(const Structure& s, std::span<const XyzColumn> extra = {});

/// Per-frame per-atom velocities (Å/fs) and optional positions (Å).
class Trajectory {
public:
  /// `velocities` and `positions` are laid out [frame][atom][xyz];
  /// positions may be empty.
  Trajectory(double fs_per_step, std::vector<std::int64_t> timesteps,
             std::size_t n_atoms, std::vector<double> velocities,
             std::vector<double> positions = {}, Vec3 box = {0.0, 0.0, 0.0});

  double dt_sample() const noexcept { return dt_sample_; }
  double fs_per_step() const noexcept { return fs_per_step_; }
  std::size_t n_frames() const noexcept { return timesteps_.size(); }
  std::size_t n_atoms() const noexcept { return n_atoms_; }
  bool has_positions() const noexcept { return !positions_.empty(); }
  const std::vector<std::int64_t>& timesteps() const noexcept { return timesteps_; }
  const Vec3& box() const noexcept { return box_; }

  double velocity(std::size_t frame, std::size_t atom, int dim) const {
    return velocities_[(frame * n_atoms_ + atom) * 3 + static_cast<std::size_t>(dim)];
  }
  double position(std::size_t frame, std::size_t atom, int dim) const {
    return positions_[(frame * n_atoms_ + atom) * 3 + static_cast<std::size_t>(dim)];
  }
  std::span<const double> velocities() const noexcept { return velocities_; }
  std::span<const double> positions() const noexcept { return positions_; }

  /// Same trajectory with frame order reversed (velocities keep their sign).
  Trajectory time_reversed() const;

private:
  double fs_per_step_;
  double dt_sample_;
  std::vector<std::int64_t> timesteps_;
  std::size_t n_atoms_;
  std::vector<double> velocities_;
  std::vector<double> positions_;
  Vec3 box_;
};

/// LAMMPS-style text dump ("ITEM: TIMESTEP" ...). Atoms are sorted by id;
/// `vx vy vz` are required, `x y z` (or `xu yu zu`) optional.
Trajectory parse_dump(std::string_view text, double fs_per_step,
                      const std::string& source = "<dump>");
Trajectory parse_trajectory(const std::filesystem::path& path, double fs_per_step);
std::string write_dump(const Trajectory& t);

/// Time-averaged NEMD bin temperatures plus the run geometry.
struct BinProfile {
  std::size_t n_bins = 0;
  /// Kelvin; NaN for source/sink bins that were not recorded.
  std::vector<double> temperature;
  std::vector<std::size_t> source_bins;
  std::vector<std::size_t> sink_bins;
  double heat_rate = 0.0;     ///< kcal/mol/fs
  double bin_width = 0.0;     ///< Å
  double cross_section = 0.0; ///< Å^2

  /// Throws InvalidInput when an invariant is broken.
  void validate() const;
  bool is_reservoir(std::size_t bin) const;
};

/// CSV `bin_index,temperature_K` plus a JSON sidecar. When `sidecar` is
/// not given, the CSV path with extension replaced by `.json` is used.
BinProfile parse_bin_profile(const std::filesystem::path& csv,
                             std::optional<std::filesystem::path> sidecar = std::nullopt);
void write_bin_profile(const BinProfile& p, const std::filesystem::path& csv,
                       std::optional<std::filesystem::path> sidecar = std::nullopt);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);

} // namespace coftherm
