#include "coftherm/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "coftherm/dangling.hpp"
#include "coftherm/error.hpp"
#include "coftherm/nemd.hpp"
#include "coftherm/spectral.hpp"
#include "coftherm/structio.hpp"

namespace fs = std::filesystem;

namespace coftherm {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"')
      quoted = !quoted;
    else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r')
      cur += c;
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

std::string fmt6(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

PipelineRow process(const ManifestEntry& e, const PipelineOptions& opt) {
  PipelineRow row;
  row.name = e.name;
  row.density = row.dmr = row.kx = row.ky = row.k_mean = row.ratio = row.s = kNaN;
  std::vector<std::string> errors;
  auto attempt = [&](const char* what, auto&& fn) {
    try {
      fn();
      return true;
    } catch (const std::exception& ex) {
      errors.push_back(std::string(what) + ": " + ex.what());
      return false;
    }
  };

  std::optional<Structure> s;
  std::optional<BranchLabeling> labels;
  if (!e.structure.empty()) {
    if (attempt("structure", [&] { s = parse_structure(e.structure); })) {
      row.density = s->density();
      attempt("dmr", [&] {
        const auto g = build_bond_graph(*s, opt.bond_scale);
        ClassifyOptions co;
        co.exclude_h = opt.exclude_h;
        labels = classify_branches(g, *s, co);
        row.dmr = labels->dmr;
      });
    }
  }
  if (!e.profile_x.empty())
    attempt("kappa_x", [&] { row.kx = extract_kappa(parse_bin_profile(e.profile_x), opt.trim).kappa; });
  if (!e.profile_y.empty())
    attempt("kappa_y", [&] { row.ky = extract_kappa(parse_bin_profile(e.profile_y), opt.trim).kappa; });
  if (!std::isnan(row.kx) && !std::isnan(row.ky)) {
    const auto pair = average_kappa(row.kx, row.ky);
    row.k_mean = pair.mean;
    row.ratio = pair.ratio;
  }
  if (!e.trajectory.empty()) {
    attempt("overlap", [&] {
      if (!e.fs_per_step) throw InvalidInput("fs_per_step is required with a trajectory");
      if (!s) throw InvalidInput("a valid structure is required with a trajectory");
      const auto t = parse_trajectory(e.trajectory, *e.fs_per_step);
      GroupOptions go;
      go.include_h = opt.include_h_groups;
      const auto groups = make_groups(*s, t.n_atoms(), labels ? &labels->labels : nullptr, go);
      row.s = overlap_s(compute_vdos_profile(t, groups));
    });
  }
  if (!errors.empty()) {
    row.ok = false;
    for (std::size_t i = 0; i < errors.size(); ++i) row.error += (i ? "; " : "") + errors[i];
  }
  return row;
}

} // namespace

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  const fs::path base = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line) || line[0] == '#') continue;
    header = split_csv(line);
    break;
  }
  std::vector<ManifestEntry> out;
  if (header.empty()) return out;

  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    static const char* known[] = {"name", "structure", "profile_x", "profile_y", "trajectory",
                                  "fs_per_step"};
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return header[c] == k; }) == std::end(known))
      throw ParseError(path.string(), line_no, 1, "unknown manifest column '" + header[c] + "'");
    if (col.count(header[c]))
      throw ParseError(path.string(), line_no, 1, "duplicate manifest column '" + header[c] + "'");
    col[header[c]] = c;
  }
  if (!col.count("name")) throw ParseError(path.string(), line_no, 1, "manifest needs a 'name' column");

  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line) || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw ParseError(path.string(), line_no, 1,
                       "expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()));
    auto cell = [&](const char* key) -> std::string {
      auto it = col.find(key);
      return it == col.end() ? std::string() : cells[it->second];
    };
    auto resolve = [&](const char* key) -> fs::path {
      const std::string v = cell(key);
      if (v.empty()) return {};
      fs::path p(v);
      return p.is_absolute() ? p : base / p;
    };
    ManifestEntry e;
    e.name = cell("name");
    if (e.name.empty()) throw ParseError(path.string(), line_no, 1, "empty name");
    e.structure = resolve("structure");
    e.profile_x = resolve("profile_x");
    e.profile_y = resolve("profile_y");
    e.trajectory = resolve("trajectory");
    const std::string fs_text = cell("fs_per_step");
    if (!fs_text.empty()) {
      double v = 0.0;
      auto r = std::from_chars(fs_text.data(), fs_text.data() + fs_text.size(), v);
      if (r.ec != std::errc() || r.ptr != fs_text.data() + fs_text.size() || !(v > 0.0))
        throw ParseError(path.string(), line_no, 1, "fs_per_step must be a positive number");
      e.fs_per_step = v;
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("COFTHERM_THREADS")) {
    std::size_t v = 0;
    const std::string_view s(env);
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec == std::errc() && r.ptr == s.data() + s.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<PipelineRow> run_pipeline(const std::vector<ManifestEntry>& entries,
                                      const PipelineOptions& opt) {
  std::vector<PipelineRow> rows(entries.size());
  if (entries.empty()) return rows;
  const std::size_t workers =
      std::min(entries.size(), opt.workers ? opt.workers : worker_count());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    if (workers > 1) omp_set_num_threads(1);
    for (std::size_t i = next++; i < entries.size(); i = next++) rows[i] = process(entries[i], opt);
  };
  if (workers == 1) {
    work();
    return rows;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  return rows;
}

std::string pipeline_to_csv(const std::vector<PipelineRow>& rows) {
  std::ostringstream out;
  out << "name,status,error,density,dmr,kx,ky,k_mean,ratio,S\n";
  for (const auto& r : rows)
    out << csv_escape(r.name) << "," << (r.ok ? "ok" : "error") << "," << csv_escape(r.error)
        << "," << fmt6(r.density) << "," << fmt6(r.dmr) << "," << fmt6(r.kx) << ","
        << fmt6(r.ky) << "," << fmt6(r.k_mean) << "," << fmt6(r.ratio) << "," << fmt6(r.s)
        << "\n";
  return out.str();
}

std::string kappa_batch_to_csv(const std::vector<PipelineRow>& rows) {
  std::ostringstream out;
  out << "name,kx,ky,mean,ratio,status,error\n";
  for (const auto& r : rows)
    out << csv_escape(r.name) << "," << fmt6(r.kx) << "," << fmt6(r.ky) << "," << fmt6(r.k_mean)
        << "," << fmt6(r.ratio) << "," << (r.ok ? "ok" : "error") << "," << csv_escape(r.error)
        << "\n";
  return out.str();
}

FeatureBuild build_feature_table(const fs::path& structures_dir, const fs::path& descriptors,
                                 const std::string& target, double bond_scale) {
  if (!fs::is_directory(structures_dir))
    throw InvalidInput("not a directory: " + structures_dir.string());
  std::istringstream in(read_text_file(descriptors));
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    header = split_csv(line);
    break;
  }
  const auto name_it = std::find(header.begin(), header.end(), "name");
  const auto target_it = std::find(header.begin(), header.end(), target);
  if (name_it == header.end() || target_it == header.end())
    throw ParseError(descriptors.string(), line_no, 1,
                     "descriptor CSV needs 'name' and '" + target + "' columns");
  const auto name_col = static_cast<std::size_t>(name_it - header.begin());
  const auto target_col = static_cast<std::size_t>(target_it - header.begin());

  std::vector<std::size_t> extra_cols;
  std::vector<std::string> features{"density"};
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == name_col || c == target_col || header[c] == "density" || header[c] == "dmr") continue;
    extra_cols.push_back(c);
    features.push_back(header[c]);
  }
  features.push_back("dmr");

  FeatureBuild fb{FeatureTable(features, target), {}};
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw ParseError(descriptors.string(), line_no, 1, "wrong number of cells");
    auto number = [&](std::size_t c) {
      double v = 0.0;
      const std::string& s = cells[c];
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ParseError(descriptors.string(), line_no, 1,
                         "missing or non-numeric value in column '" + header[c] + "'");
      return v;
    };
    const std::string& name = cells[name_col];
    std::vector<double> row;
    const double y = number(target_col);
    std::vector<double> extra;
    for (auto c : extra_cols) extra.push_back(number(c));

    fs::path file;
    for (const char* ext : {".cif", ".xyz", ".extxyz"})
      if (fs::exists(structures_dir / (name + ext))) {
        file = structures_dir / (name + ext);
        break;
      }
    if (file.empty()) {
      fb.skipped.push_back(name + ": no structure file");
      continue;
    }
    try {
      const Structure s = parse_structure(file);
      const auto labels = classify_branches(build_bond_graph(s, bond_scale), s);
      row.push_back(s.density());
      row.insert(row.end(), extra.begin(), extra.end());
      row.push_back(labels.dmr);
    } catch (const std::exception& ex) {
      fb.skipped.push_back(name + ": " + ex.what());
      continue;
    }
    fb.table.add_row(name, std::move(row), y);
  }
  fb.table.validate();
  return fb;
}

} // namespace coftherm
