#include "coftherm/structio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "coftherm/elements.hpp"
#include "coftherm/error.hpp"
#include "coftherm/nemd.hpp"
#include "json.hpp"

namespace coftherm {

namespace fs = std::filesystem;

double wrap_fractional(double x) {
  double w = x - std::floor(x);
  // x slightly below an integer can round up to exactly 1.0
  if (w >= 1.0) w = 0.0;
  return w;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- Structure

Structure::Structure(std::string name, Vec3 cell_lengths, std::vector<AtomSite> sites,
                     Vec3 cell_angles)
    : name_(std::move(name)), lengths_(cell_lengths), angles_(cell_angles) {
  for (int d = 0; d < 3; ++d) {
    if (!(lengths_[d] > 0.0) || !std::isfinite(lengths_[d]))
      throw InvalidInput("non-positive cell length: " + format_double(lengths_[d]));
    if (std::abs(angles_[d] - 90.0) > 1e-6)
      throw InvalidInput("non-orthogonal cell (angle " + format_double(angles_[d]) +
                         "); orthogonalize the cell before import");
  }
  atoms_.reserve(sites.size());
  for (auto& site : sites) {
    const std::string symbol = normalize_symbol(site.element);
    const auto mass = atomic_mass(symbol);
    if (!mass) throw InvalidInput("unknown element symbol: '" + site.element + "'");
    Atom a;
    a.element = symbol;
    a.mass = *mass;
    for (int d = 0; d < 3; ++d) {
      if (!std::isfinite(site.frac[d])) throw InvalidInput("non-finite coordinate");
      a.frac[d] = wrap_fractional(site.frac[d]);
    }
    atoms_.push_back(std::move(a));
  }
}

Vec3 Structure::cartesian(std::size_t i) const {
  const auto& f = atoms_[i].frac;
  return {f[0] * lengths_[0], f[1] * lengths_[1], f[2] * lengths_[2]};
}

double Structure::volume() const { return lengths_[0] * lengths_[1] * lengths_[2]; }

double Structure::total_mass() const {
  return std::accumulate(atoms_.begin(), atoms_.end(), 0.0,
                         [](double acc, const Atom& a) { return acc + a.mass; });
}

double Structure::density() const {
  // 1 amu = 1.66053906660e-24 g, 1 Å^3 = 1e-24 cm^3
  constexpr double kAmuGram = 1.66053906660e-24;
  constexpr double kA3Cm3 = 1e-24;
  return total_mass() * kAmuGram / (volume() * kA3Cm3);
}

Structure Structure::replicate(int nx, int ny, int nz) const {
  if (nx < 1 || ny < 1 || nz < 1) throw InvalidInput("replication counts must be >= 1");
  const std::array<int, 3> n{nx, ny, nz};
  std::vector<AtomSite> sites;
  sites.reserve(atoms_.size() * static_cast<std::size_t>(nx * ny * nz));
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::array<int, 3> img{i, j, k};
        for (const auto& a : atoms_) {
          AtomSite s{a.element, {}};
          for (int d = 0; d < 3; ++d) s.frac[d] = (a.frac[d] + img[d]) / n[d];
          sites.push_back(std::move(s));
        }
      }
  Vec3 len{lengths_[0] * nx, lengths_[1] * ny, lengths_[2] * nz};
  return Structure(name_, len, std::move(sites), angles_);
}

StructureFormat format_from_path(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".cif") return StructureFormat::Cif;
  if (ext == ".xyz" || ext == ".extxyz") return StructureFormat::ExtendedXyz;
  throw InvalidInput("cannot infer structure format from extension: " + path.string());
}

Structure parse_structure(const fs::path& path, StructureFormat format) {
  const std::string text = read_text_file(path);
  Structure s = format == StructureFormat::Cif ? parse_cif(text, path.string())
                                               : parse_extxyz(text, path.string());
  return s;
}

Structure parse_structure(const fs::path& path) {
  return parse_structure(path, format_from_path(path));
}

// ---------------------------------------------------------------------- CIF

namespace {

struct Token {
  std::string text;
  std::size_t line;
  std::size_t column;
  bool quoted = false;
};

std::vector<Token> tokenize_cif(std::string_view text, const std::string& source) {
  std::vector<Token> tokens;
  std::size_t line = 1;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t line_end = std::min(text.find('\n', pos), text.size());
    std::string_view ln = text.substr(pos, line_end - pos);
    if (!ln.empty() && ln.back() == '\r') ln.remove_suffix(1);

    if (!ln.empty() && ln.front() == ';') {
      // multi-line text field; kept as a single token
      Token tok{std::string(ln.substr(1)), line, 1, true};
      std::size_t scan = line_end + 1;
      std::size_t scan_line = line + 1;
      bool closed = false;
      while (scan < text.size()) {
        const std::size_t e = std::min(text.find('\n', scan), text.size());
        std::string_view l2 = text.substr(scan, e - scan);
        if (!l2.empty() && l2.front() == ';') {
          closed = true;
          pos = e + 1;
          line = scan_line + 1;
          break;
        }
        tok.text += "\n";
        tok.text += l2;
        scan = e + 1;
        ++scan_line;
      }
      if (!closed) throw ParseError(source, tok.line, 1, "unterminated text field");
      tokens.push_back(std::move(tok));
      continue;
    }

    std::size_t i = 0;
    while (i < ln.size()) {
      const char c = ln[i];
      if (c == ' ' || c == '\t') {
        ++i;
        continue;
      }
      if (c == '#') break;
      if (c == '\'' || c == '"') {
        std::size_t j = i + 1;
        // closing quote must be followed by whitespace or end of line
        while (j < ln.size() &&
               !(ln[j] == c && (j + 1 == ln.size() || ln[j + 1] == ' ' || ln[j + 1] == '\t')))
          ++j;
        if (j >= ln.size()) throw ParseError(source, line, i + 1, "unterminated quoted string");
        tokens.push_back({std::string(ln.substr(i + 1, j - i - 1)), line, i + 1, true});
        i = j + 1;
        continue;
      }
      std::size_t j = i;
      while (j < ln.size() && ln[j] != ' ' && ln[j] != '\t') ++j;
      tokens.push_back({std::string(ln.substr(i, j - i)), line, i + 1, false});
      i = j;
    }
    pos = line_end + 1;
    ++line;
  }
  return tokens;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  return s;
}

bool starts_with_ci(const std::string& s, std::string_view prefix) {
  return s.size() >= prefix.size() && lower(s.substr(0, prefix.size())) == prefix;
}

double cif_number(const Token& tok, const std::string& source) {
  std::string t = tok.text;
  if (auto p = t.find('('); p != std::string::npos) t.erase(p);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto res = std::from_chars(first, last, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != last)
    throw ParseError(source, tok.line, tok.column, "expected a number, got '" + tok.text + "'");
  return v;
}

std::string element_from_label(const std::string& label) {
  std::string letters;
  for (char c : label) {
    if (!std::isalpha(static_cast<unsigned char>(c))) break;
    letters += c;
  }
  if (letters.size() >= 2 && atomic_mass(letters.substr(0, 2))) return letters.substr(0, 2);
  if (!letters.empty() && atomic_mass(letters.substr(0, 1))) return letters.substr(0, 1);
  return letters;
}

} // namespace

Structure parse_cif(std::string_view text, const std::string& source) {
  const auto tokens = tokenize_cif(text, source);
  std::string name;
  bool seen_block = false;
  std::map<std::string, Token> items;
  std::vector<std::string> atom_tags;
  std::vector<Token> atom_values;
  std::size_t atom_loop_line = 0;

  auto is_keyword = [](const Token& t) {
    if (t.quoted) return false;
    return t.text.front() == '_' || starts_with_ci(t.text, "loop_") ||
           starts_with_ci(t.text, "data_");
  };

  std::size_t i = 0;
  while (i < tokens.size()) {
    const Token& tok = tokens[i];
    if (!tok.quoted && starts_with_ci(tok.text, "data_")) {
      if (seen_block)
        throw ParseError(source, tok.line, tok.column, "multiple data blocks are not supported");
      seen_block = true;
      name = tok.text.substr(5);
      ++i;
    } else if (!tok.quoted && lower(tok.text) == "loop_") {
      const std::size_t loop_line = tok.line;
      ++i;
      std::vector<std::string> tags;
      while (i < tokens.size() && !tokens[i].quoted && tokens[i].text.front() == '_')
        tags.push_back(lower(tokens[i++].text));
      if (tags.empty()) throw ParseError(source, tok.line, tok.column, "loop_ without tags");
      std::vector<Token> values;
      while (i < tokens.size() && !is_keyword(tokens[i])) values.push_back(tokens[i++]);
      if (values.size() % tags.size() != 0)
        throw ParseError(source, loop_line, 1,
                         "loop value count " + std::to_string(values.size()) +
                             " is not a multiple of tag count " + std::to_string(tags.size()));
      const bool is_atom_loop =
          std::find(tags.begin(), tags.end(), "_atom_site_fract_x") != tags.end();
      if (is_atom_loop) {
        if (!atom_tags.empty())
          throw ParseError(source, loop_line, 1, "duplicate _atom_site_ loop");
        atom_tags = std::move(tags);
        atom_values = std::move(values);
        atom_loop_line = loop_line;
      }
    } else if (!tok.quoted && tok.text.front() == '_') {
      if (i + 1 >= tokens.size() || is_keyword(tokens[i + 1]))
        throw ParseError(source, tok.line, tok.column, "tag " + tok.text + " has no value");
      items[lower(tok.text)] = tokens[i + 1];
      i += 2;
    } else {
      throw ParseError(source, tok.line, tok.column, "unexpected token '" + tok.text + "'");
    }
  }

  if (!seen_block) throw ParseError(source, 1, 1, "missing data_ block");

  auto required = [&](const std::string& tag) -> double {
    auto it = items.find(tag);
    if (it == items.end()) throw ParseError(source, 1, 1, "missing required tag " + tag);
    return cif_number(it->second, source);
  };
  auto optional_angle = [&](const std::string& tag) -> double {
    auto it = items.find(tag);
    return it == items.end() ? 90.0 : cif_number(it->second, source);
  };

  const Vec3 lengths{required("_cell_length_a"), required("_cell_length_b"),
                     required("_cell_length_c")};
  const Vec3 angles{optional_angle("_cell_angle_alpha"), optional_angle("_cell_angle_beta"),
                    optional_angle("_cell_angle_gamma")};
  for (int d = 0; d < 3; ++d) {
    if (!(lengths[d] > 0.0)) {
      static const char* tags[] = {"_cell_length_a", "_cell_length_b", "_cell_length_c"};
      const Token& t = items.at(tags[d]);
      throw ParseError(source, t.line, t.column, "non-positive cell length");
    }
  }

  if (atom_tags.empty()) throw ParseError(source, 1, 1, "missing _atom_site_ loop");
  auto col = [&](const std::string& tag) -> std::optional<std::size_t> {
    auto it = std::find(atom_tags.begin(), atom_tags.end(), tag);
    if (it == atom_tags.end()) return std::nullopt;
    return static_cast<std::size_t>(it - atom_tags.begin());
  };
  const auto cx = col("_atom_site_fract_x");
  const auto cy = col("_atom_site_fract_y");
  const auto cz = col("_atom_site_fract_z");
  const auto csym = col("_atom_site_type_symbol");
  const auto clabel = col("_atom_site_label");
  if (!cy || !cz) throw ParseError(source, atom_loop_line, 1, "atom loop lacks fract_y/z");
  if (!csym && !clabel)
    throw ParseError(source, atom_loop_line, 1, "atom loop lacks type_symbol and label");

  std::vector<Structure::AtomSite> sites;
  const std::size_t ncol = atom_tags.size();
  for (std::size_t r = 0; r * ncol < atom_values.size(); ++r) {
    const Token* row = &atom_values[r * ncol];
    const Token& sym_tok = csym ? row[*csym] : row[*clabel];
    std::string symbol = csym ? sym_tok.text : element_from_label(sym_tok.text);
    // strip oxidation state suffixes like "O2-"
    symbol.erase(std::find_if(symbol.begin(), symbol.end(),
                              [](char c) { return !std::isalpha(static_cast<unsigned char>(c)); }),
                 symbol.end());
    if (!atomic_mass(symbol))
      throw ParseError(source, sym_tok.line, sym_tok.column,
                       "unknown element symbol '" + sym_tok.text + "'");
    sites.push_back({symbol,
                     {cif_number(row[*cx], source), cif_number(row[*cy], source),
                      cif_number(row[*cz], source)}});
  }
  try {
    return Structure(name, lengths, std::move(sites), angles);
  } catch (const InvalidInput& e) {
    throw ParseError(source, atom_loop_line, 1, e.what());
  }
}

std::string write_cif(const Structure& s) {
  std::ostringstream out;
  std::string name = s.name().empty() ? "structure" : s.name();
  std::replace_if(name.begin(), name.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }, '_');
  out << "data_" << name << "\n";
  const char* axes[] = {"a", "b", "c"};
  for (int d = 0; d < 3; ++d)
    out << "_cell_length_" << axes[d] << " " << format_double(s.cell_lengths()[d]) << "\n";
  out << "_cell_angle_alpha " << format_double(s.cell_angles()[0]) << "\n";
  out << "_cell_angle_beta " << format_double(s.cell_angles()[1]) << "\n";
  out << "_cell_angle_gamma " << format_double(s.cell_angles()[2]) << "\n";
  out << "loop_\n_atom_site_label\n_atom_site_type_symbol\n"
         "_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& a = s.atoms()[i];
    out << a.element << i + 1 << " " << a.element << " " << format_double(a.frac[0]) << " "
        << format_double(a.frac[1]) << " " << format_double(a.frac[2]) << "\n";
  }
  return out.str();
}

// ------------------------------------------------------------- extended XYZ

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_number(std::string_view s, double& v) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty();
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t e = text.find('\n', pos);
    if (e == std::string_view::npos) e = text.size();
    std::string_view ln = text.substr(pos, e - pos);
    if (!ln.empty() && ln.back() == '\r') ln.remove_suffix(1);
    lines.push_back(ln);
    if (e == text.size()) break;
    pos = e + 1;
  }
  return lines;
}

// key=value / key="quoted value" pairs of the extended-XYZ comment line
std::map<std::string, std::string> parse_kv(std::string_view s, const std::string& source) {
  std::map<std::string, std::string> kv;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    std::size_t k = i;
    while (k < s.size() && s[k] != '=' && !std::isspace(static_cast<unsigned char>(s[k]))) ++k;
    std::string key = lower(std::string(s.substr(i, k - i)));
    if (k >= s.size() || s[k] != '=') {
      kv[key] = "T";
      i = k;
      continue;
    }
    ++k;
    std::string value;
    if (k < s.size() && (s[k] == '"' || s[k] == '\'')) {
      const char q = s[k];
      const std::size_t e = s.find(q, k + 1);
      if (e == std::string_view::npos) throw ParseError(source, 2, k + 1, "unterminated quote");
      value = std::string(s.substr(k + 1, e - k - 1));
      i = e + 1;
    } else {
      std::size_t e = k;
      while (e < s.size() && !std::isspace(static_cast<unsigned char>(s[e]))) ++e;
      value = std::string(s.substr(k, e - k));
      i = e;
    }
    kv[key] = value;
  }
  return kv;
}

} // namespace

Structure parse_extxyz(std::string_view text, const std::string& source) {
  const auto lines = split_lines(text);
  if (lines.size() < 2) throw ParseError(source, 1, 1, "truncated extended-XYZ header");
  double count_d = 0.0;
  const auto head = split_ws(lines[0]);
  if (head.size() != 1 || !parse_number(head[0], count_d) || count_d < 0 ||
      count_d != std::floor(count_d))
    throw ParseError(source, 1, 1, "first line must be the atom count");
  const auto n = static_cast<std::size_t>(count_d);

  const auto kv = parse_kv(lines[1], source);
  auto lat_it = kv.find("lattice");
  if (lat_it == kv.end()) throw ParseError(source, 2, 1, "missing Lattice=\"...\"");
  const auto lat_tok = split_ws(lat_it->second);
  if (lat_tok.size() != 9) throw ParseError(source, 2, 1, "Lattice needs 9 numbers");
  std::array<double, 9> lat{};
  for (std::size_t k = 0; k < 9; ++k)
    if (!parse_number(lat_tok[k], lat[k]))
      throw ParseError(source, 2, 1, "bad Lattice entry '" + std::string(lat_tok[k]) + "'");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (r != c && std::abs(lat[static_cast<std::size_t>(3 * r + c)]) > 1e-9)
        throw ParseError(source, 2, 1, "non-orthogonal lattice; orthogonalize before import");
  const Vec3 lengths{lat[0], lat[4], lat[8]};
  for (double L : lengths)
    if (!(L > 0.0)) throw ParseError(source, 2, 1, "non-positive cell length");

  // Properties=species:S:1:pos:R:3:...
  std::size_t species_col = 0;
  std::size_t pos_col = 1;
  std::size_t ncols = 4;
  if (auto p = kv.find("properties"); p != kv.end()) {
    std::vector<std::string> parts;
    std::stringstream ss(p->second);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() % 3 != 0) throw ParseError(source, 2, 1, "malformed Properties");
    bool have_species = false;
    bool have_pos = false;
    std::size_t col = 0;
    for (std::size_t k = 0; k < parts.size(); k += 3) {
      const std::string key = lower(parts[k]);
      const int width = std::stoi(parts[k + 2]);
      if (key == "species") {
        species_col = col;
        have_species = true;
      } else if (key == "pos") {
        pos_col = col;
        have_pos = true;
      }
      col += static_cast<std::size_t>(width);
    }
    if (!have_species || !have_pos)
      throw ParseError(source, 2, 1, "Properties must include species and pos");
    ncols = col;
  }

  std::string name;
  if (auto it = kv.find("name"); it != kv.end())
    name = it->second;
  else
    name = fs::path(source).stem().string();

  if (lines.size() < 2 + n) throw ParseError(source, lines.size(), 1, "fewer atom lines than declared");
  std::vector<Structure::AtomSite> sites;
  sites.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line_no = i + 3;
    const auto tok = split_ws(lines[i + 2]);
    if (tok.size() < ncols)
      throw ParseError(source, line_no, 1, "expected " + std::to_string(ncols) + " columns");
    const std::string symbol(tok[species_col]);
    if (!atomic_mass(symbol))
      throw ParseError(source, line_no, 1, "unknown element symbol '" + symbol + "'");
    Vec3 frac{};
    for (int d = 0; d < 3; ++d) {
      double x = 0.0;
      if (!parse_number(tok[pos_col + static_cast<std::size_t>(d)], x))
        throw ParseError(source, line_no, 1, "bad coordinate");
      frac[d] = x / lengths[d];
    }
    sites.push_back({symbol, frac});
  }
  return Structure(name, lengths, std::move(sites));
}

std::string write_extxyz(const Structure& s, std::span<const XyzColumn> extra) {
  for (const auto& c : extra)
    if (c.values.size() != s.size())
      throw InvalidInput("extra column '" + c.name + "' length does not match atom count");
  std::ostringstream out;
  out << s.size() << "\n";
  const auto& L = s.cell_lengths();
  out << "Lattice=\"" << format_double(L[0]) << " 0 0 0 " << format_double(L[1]) << " 0 0 0 "
      << format_double(L[2]) << "\" Properties=species:S:1:pos:R:3";
  for (const auto& c : extra) out << ":" << c.name << ":" << (c.is_real ? "R" : "S") << ":1";
  std::string name = s.name();
  std::replace_if(name.begin(), name.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)) || c == '"'; }, '_');
  if (!name.empty()) out << " name=\"" << name << "\"";
  out << " pbc=\"T T T\"\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = s.cartesian(i);
    out << s.atoms()[i].element << " " << format_double(r[0]) << " " << format_double(r[1])
        << " " << format_double(r[2]);
    for (const auto& c : extra) out << " " << c.values[i];
    out << "\n";
  }
  return out.str();
}

// --------------------------------------------------------------- Trajectory

Trajectory::Trajectory(double fs_per_step, std::vector<std::int64_t> timesteps,
                       std::size_t n_atoms, std::vector<double> velocities,
                       std::vector<double> positions, Vec3 box)
    : fs_per_step_(fs_per_step), dt_sample_(0.0), timesteps_(std::move(timesteps)),
      n_atoms_(n_atoms), velocities_(std::move(velocities)), positions_(std::move(positions)),
      box_(box) {
  if (!(fs_per_step_ > 0.0)) throw InvalidInput("fs-per-step must be positive");
  if (n_atoms_ == 0) throw InvalidInput("trajectory has no atoms");
  if (timesteps_.size() < 2) throw InvalidInput("trajectory needs at least 2 frames");
  const std::size_t expected = timesteps_.size() * n_atoms_ * 3;
  if (velocities_.size() != expected) throw InvalidInput("velocity array size mismatch");
  if (!positions_.empty() && positions_.size() != expected)
    throw InvalidInput("position array size mismatch");
  const std::int64_t stride = timesteps_[1] - timesteps_[0];
  for (std::size_t f = 1; f < timesteps_.size(); ++f) {
    const std::int64_t d = timesteps_[f] - timesteps_[f - 1];
    if (d <= 0)
      throw InvalidInput("non-monotonic timesteps at frame " + std::to_string(f) + " (" +
                         std::to_string(timesteps_[f - 1]) + " -> " +
                         std::to_string(timesteps_[f]) + ")");
    if (d != stride)
      throw InvalidInput("non-uniform sampling interval at frame " + std::to_string(f));
  }
  dt_sample_ = static_cast<double>(stride) * fs_per_step_;
}

Trajectory Trajectory::time_reversed() const {
  const std::size_t nf = n_frames();
  const std::size_t block = n_atoms_ * 3;
  std::vector<double> v(velocities_.size());
  std::vector<double> p(positions_.size());
  for (std::size_t f = 0; f < nf; ++f) {
    std::copy_n(velocities_.begin() + static_cast<std::ptrdiff_t>((nf - 1 - f) * block), block,
                v.begin() + static_cast<std::ptrdiff_t>(f * block));
    if (!positions_.empty())
      std::copy_n(positions_.begin() + static_cast<std::ptrdiff_t>((nf - 1 - f) * block), block,
                  p.begin() + static_cast<std::ptrdiff_t>(f * block));
  }
  return Trajectory(fs_per_step_, timesteps_, n_atoms_, std::move(v), std::move(p), box_);
}

Trajectory parse_dump(std::string_view text, double fs_per_step, const std::string& source) {
  const auto lines = split_lines(text);
  std::vector<std::int64_t> steps;
  std::vector<double> vel;
  std::vector<double> pos;
  std::size_t n_atoms = 0;
  bool with_positions = false;
  Vec3 box{0.0, 0.0, 0.0};
  Vec3 box_lo{0.0, 0.0, 0.0};

  std::size_t i = 0;
  auto next_line = [&](const char* what) -> std::string_view {
    if (i >= lines.size()) throw ParseError(source, i + 1, 1, std::string("unexpected end of file, expected ") + what);
    return lines[i++];
  };

  std::size_t frame_atoms = 0;
  bool have_count = false;
  while (i < lines.size()) {
    std::string_view ln = lines[i];
    const std::size_t line_no = i + 1;
    ++i;
    if (split_ws(ln).empty()) continue;
    if (ln.rfind("ITEM: TIMESTEP", 0) == 0) {
      const auto t = split_ws(next_line("timestep"));
      double v = 0.0;
      if (t.size() != 1 || !parse_number(t[0], v) || v != std::floor(v))
        throw ParseError(source, i, 1, "bad timestep");
      const auto step = static_cast<std::int64_t>(v);
      if (!steps.empty() && step <= steps.back())
        throw ParseError(source, i, 1,
                         "non-monotonic timesteps (" + std::to_string(steps.back()) + " -> " +
                             std::to_string(step) + ")");
      steps.push_back(step);
      have_count = false;
    } else if (ln.rfind("ITEM: NUMBER OF ATOMS", 0) == 0) {
      const auto t = split_ws(next_line("atom count"));
      double v = 0.0;
      if (t.size() != 1 || !parse_number(t[0], v) || v < 1 || v != std::floor(v))
        throw ParseError(source, i, 1, "bad atom count");
      frame_atoms = static_cast<std::size_t>(v);
      if (steps.size() == 1)
        n_atoms = frame_atoms;
      else if (frame_atoms != n_atoms)
        throw ParseError(source, i, 1,
                         "inconsistent atom count: frame " + std::to_string(steps.size() - 1) +
                             " has " + std::to_string(frame_atoms) + ", expected " +
                             std::to_string(n_atoms));
      have_count = true;
    } else if (ln.rfind("ITEM: BOX BOUNDS", 0) == 0) {
      for (int d = 0; d < 3; ++d) {
        const auto t = split_ws(next_line("box bounds"));
        double lo = 0.0, hi = 0.0;
        if (t.size() < 2 || !parse_number(t[0], lo) || !parse_number(t[1], hi))
          throw ParseError(source, i, 1, "bad box bounds");
        box_lo[d] = lo;
        box[d] = hi - lo;
      }
    } else if (ln.rfind("ITEM: ATOMS", 0) == 0) {
      if (steps.empty() || !have_count)
        throw ParseError(source, line_no, 1, "ATOMS section before TIMESTEP/NUMBER OF ATOMS");
      const auto cols = split_ws(ln.substr(11));
      auto find_col = [&](std::initializer_list<std::string_view> names) -> std::optional<std::size_t> {
        for (auto nm : names)
          for (std::size_t c = 0; c < cols.size(); ++c)
            if (cols[c] == nm) return c;
        return std::nullopt;
      };
      const auto cid = find_col({"id"});
      const auto cvx = find_col({"vx"});
      const auto cvy = find_col({"vy"});
      const auto cvz = find_col({"vz"});
      if (!cid || !cvx || !cvy || !cvz)
        throw ParseError(source, line_no, 1, "ATOMS section needs id vx vy vz columns");
      auto cx = find_col({"x", "xu"});
      auto cy = find_col({"y", "yu"});
      auto cz = find_col({"z", "zu"});
      const auto csx = find_col({"xs"});
      const auto csy = find_col({"ys"});
      const auto csz = find_col({"zs"});
      const bool scaled = !cx && csx && csy && csz;
      if (scaled) {
        cx = csx;
        cy = csy;
        cz = csz;
      }
      const bool frame_pos = cx && cy && cz;
      if (steps.size() == 1)
        with_positions = frame_pos;
      else if (frame_pos != with_positions)
        throw ParseError(source, line_no, 1, "position columns differ between frames");

      std::vector<std::pair<std::int64_t, std::array<double, 6>>> rows;
      rows.reserve(frame_atoms);
      for (std::size_t a = 0; a < frame_atoms; ++a) {
        const auto t = split_ws(next_line("atom row"));
        if (t.size() < cols.size())
          throw ParseError(source, i, 1, "atom row has " + std::to_string(t.size()) +
                                             " columns, expected " + std::to_string(cols.size()));
        std::array<double, 6> r{};
        double id = 0.0;
        if (!parse_number(t[*cid], id)) throw ParseError(source, i, 1, "bad atom id");
        const std::size_t vc[3] = {*cvx, *cvy, *cvz};
        for (int d = 0; d < 3; ++d)
          if (!parse_number(t[vc[d]], r[static_cast<std::size_t>(3 + d)]))
            throw ParseError(source, i, 1, "bad velocity value");
        if (frame_pos) {
          const std::size_t pc[3] = {*cx, *cy, *cz};
          for (int d = 0; d < 3; ++d) {
            if (!parse_number(t[pc[d]], r[static_cast<std::size_t>(d)]))
              throw ParseError(source, i, 1, "bad position value");
            if (scaled) r[static_cast<std::size_t>(d)] = box_lo[d] + r[static_cast<std::size_t>(d)] * box[d];
          }
        }
        rows.emplace_back(static_cast<std::int64_t>(id), r);
      }
      std::sort(rows.begin(), rows.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (std::size_t a = 1; a < rows.size(); ++a)
        if (rows[a].first == rows[a - 1].first)
          throw ParseError(source, line_no, 1, "duplicate atom id " + std::to_string(rows[a].first));
      for (const auto& [id, r] : rows) {
        vel.insert(vel.end(), r.begin() + 3, r.end());
        if (frame_pos) pos.insert(pos.end(), r.begin(), r.begin() + 3);
      }
    } else {
      throw ParseError(source, line_no, 1, "unexpected line '" + std::string(ln) + "'");
    }
  }
  if (vel.size() != steps.size() * n_atoms * 3)
    throw ParseError(source, lines.size(), 1, "frame without ATOMS section");
  try {
    return Trajectory(fs_per_step, std::move(steps), n_atoms, std::move(vel), std::move(pos), box);
  } catch (const InvalidInput& e) {
    throw ParseError(source, 1, 1, e.what());
  }
}

Trajectory parse_trajectory(const fs::path& path, double fs_per_step) {
  return parse_dump(read_text_file(path), fs_per_step, path.string());
}

std::string write_dump(const Trajectory& t) {
  std::string out;
  const auto& box = t.box();
  for (std::size_t f = 0; f < t.n_frames(); ++f) {
    out += "ITEM: TIMESTEP\n" + std::to_string(t.timesteps()[f]) + "\n";
    out += "ITEM: NUMBER OF ATOMS\n" + std::to_string(t.n_atoms()) + "\n";
    out += "ITEM: BOX BOUNDS pp pp pp\n";
    for (int d = 0; d < 3; ++d) out += "0 " + format_double(box[d]) + "\n";
    out += t.has_positions() ? "ITEM: ATOMS id type x y z vx vy vz\n"
                             : "ITEM: ATOMS id type vx vy vz\n";
    for (std::size_t a = 0; a < t.n_atoms(); ++a) {
      out += std::to_string(a + 1) + " 1";
      if (t.has_positions())
        for (int d = 0; d < 3; ++d) out += " " + format_double(t.position(f, a, d));
      for (int d = 0; d < 3; ++d) out += " " + format_double(t.velocity(f, a, d));
      out += "\n";
    }
  }
  return out;
}

// --------------------------------------------------------------- BinProfile

bool BinProfile::is_reservoir(std::size_t bin) const {
  return std::find(source_bins.begin(), source_bins.end(), bin) != source_bins.end() ||
         std::find(sink_bins.begin(), sink_bins.end(), bin) != sink_bins.end();
}

void BinProfile::validate() const {
  if (n_bins == 0) throw InvalidInput("n_bins must be positive");
  if (temperature.size() != n_bins) throw InvalidInput("temperature array size != n_bins");
  if (source_bins.empty()) throw InvalidInput("no source bins");
  if (sink_bins.empty()) throw InvalidInput("no sink bins");
  for (auto b : source_bins)
    if (b >= n_bins) throw InvalidInput("source bin out of range: " + std::to_string(b));
  for (auto b : sink_bins)
    if (b >= n_bins) throw InvalidInput("sink bin out of range: " + std::to_string(b));
  for (auto b : source_bins)
    if (std::find(sink_bins.begin(), sink_bins.end(), b) != sink_bins.end())
      throw InvalidInput("overlapping source and sink sets (bin " + std::to_string(b) + ")");
  std::vector<std::size_t> missing;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double T = temperature[b];
    if (std::isnan(T)) {
      if (!is_reservoir(b)) missing.push_back(b);
      continue;
    }
    if (!(T > 0.0) || !std::isfinite(T))
      throw InvalidInput("non-positive temperature in bin " + std::to_string(b));
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t k = 0; k < missing.size() && k < 10; ++k)
      list += (k ? "," : "") + std::to_string(missing[k]);
    throw InvalidInput("missing bins: " + list + (missing.size() > 10 ? ",..." : ""));
  }
  if (!(bin_width > 0.0)) throw InvalidInput("bin width must be positive");
  if (!(cross_section > 0.0)) throw InvalidInput("cross-section must be positive");
  if (!(heat_rate > 0.0) || !std::isfinite(heat_rate))
    throw InvalidInput("heat rate must be positive");
}

namespace {

fs::path sidecar_for(const fs::path& csv, const std::optional<fs::path>& sidecar) {
  if (sidecar) return *sidecar;
  fs::path p = csv;
  p.replace_extension(".json");
  return p;
}

} // namespace

BinProfile parse_bin_profile(const fs::path& csv, std::optional<fs::path> sidecar) {
  const fs::path meta_path = sidecar_for(csv, sidecar);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path.string(), 1, 1, e.what());
  }

  BinProfile p;
  try {
    p.n_bins = meta.at("n_bins").get<std::size_t>();
    p.source_bins = meta.at("source_bins").get<std::vector<std::size_t>>();
    p.sink_bins = meta.at("sink_bins").get<std::vector<std::size_t>>();
    p.cross_section = meta.at("cross_section_A2").get<double>();
    if (meta.contains("bin_width_A"))
      p.bin_width = meta.at("bin_width_A").get<double>();
    else
      p.bin_width = meta.at("length_A").get<double>() / static_cast<double>(p.n_bins);
    if (meta.contains("heat_rate_kcal_mol_fs")) {
      p.heat_rate = meta.at("heat_rate_kcal_mol_fs").get<double>();
    } else {
      const auto n_atoms = meta.at("n_atoms").get<std::size_t>();
      const double k = meta.value("k_kcal_mol_fs", kDefaultHeatConstant);
      p.heat_rate = heat_rate(n_atoms, k);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path.string(), 1, 1, std::string("bad sidecar: ") + e.what());
  }
  if (p.n_bins == 0 || p.n_bins > 1000000) throw InvalidInput("implausible n_bins");

  p.temperature.assign(p.n_bins, std::numeric_limits<double>::quiet_NaN());
  const std::string text = read_text_file(csv);
  const auto lines = split_lines(text);
  bool header_seen = false;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::string_view ln = lines[li];
    if (split_ws(ln).empty()) continue;
    std::string row(ln);
    std::replace(row.begin(), row.end(), ',', ' ');
    const auto t = split_ws(row);
    if (!header_seen) {
      if (t.size() < 2 || t[0] != "bin_index" || t[1] != "temperature_K")
        throw ParseError(csv.string(), li + 1, 1, "expected header 'bin_index,temperature_K'");
      header_seen = true;
      continue;
    }
    double b = 0.0, T = 0.0;
    if (t.size() != 2 || !parse_number(t[0], b) || !parse_number(t[1], T) || b < 0 ||
        b != std::floor(b))
      throw ParseError(csv.string(), li + 1, 1, "expected '<bin_index>,<temperature>'");
    const auto bin = static_cast<std::size_t>(b);
    if (bin >= p.n_bins)
      throw ParseError(csv.string(), li + 1, 1, "bin index " + std::to_string(bin) + " >= n_bins");
    if (!std::isnan(p.temperature[bin]))
      throw ParseError(csv.string(), li + 1, 1, "duplicate bin " + std::to_string(bin));
    if (!(T > 0.0))
      throw ParseError(csv.string(), li + 1, 1, "non-positive temperature");
    p.temperature[bin] = T;
  }
  if (!header_seen) throw ParseError(csv.string(), 1, 1, "empty profile CSV");
  p.validate();
  return p;
}

void write_bin_profile(const BinProfile& p, const fs::path& csv, std::optional<fs::path> sidecar) {
  p.validate();
  {
    std::ofstream out(csv);
    if (!out) throw InvalidInput("cannot write " + csv.string());
    out << "bin_index,temperature_K\n";
    for (std::size_t b = 0; b < p.n_bins; ++b)
      if (!std::isnan(p.temperature[b])) out << b << "," << format_double(p.temperature[b]) << "\n";
  }
  nlohmann::json meta{{"n_bins", p.n_bins},
                      {"source_bins", p.source_bins},
                      {"sink_bins", p.sink_bins},
                      {"heat_rate_kcal_mol_fs", p.heat_rate},
                      {"bin_width_A", p.bin_width},
                      {"cross_section_A2", p.cross_section}};
  const fs::path meta_path = sidecar_for(csv, sidecar);
  std::ofstream out(meta_path);
  if (!out) throw InvalidInput("cannot write " + meta_path.string());
  out << meta.dump(2) << "\n";
}

} // namespace coftherm
