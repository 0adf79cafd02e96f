// coftherm: command-line front end for the analysis library.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coftherm/attention.hpp"
#include "coftherm/bondgraph.hpp"
#include "coftherm/dangling.hpp"
#include "coftherm/error.hpp"
#include "coftherm/mlkit.hpp"
#include "coftherm/nemd.hpp"
#include "coftherm/pipeline.hpp"
#include "coftherm/spectral.hpp"
#include "coftherm/structio.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace coftherm;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Artifacts collected by a subcommand; written under --out together with
/// manifest.json describing the resolved options.
struct Run {
  std::string subcommand;
  json options = json::object();
  std::vector<std::pair<std::string, std::string>> artifacts;
  std::optional<fs::path> out_dir;

  void add(std::string name, std::string content) {
    artifacts.emplace_back(std::move(name), std::move(content));
  }
};

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw InvalidInput(std::string(what) + " not found: " + p.string());
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw InvalidInput("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".coftherm_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw InvalidInput("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InvalidInput("cannot write " + p.string());
  f << content;
}

void finish(const Run& run) {
  if (!run.out_dir) return;
  json manifest;
  manifest["tool"] = "coftherm";
  manifest["version"] = kVersion;
  manifest["subcommand"] = run.subcommand;
  manifest["options"] = run.options;
  manifest["artifacts"] = json::array();
  for (const auto& [name, content] : run.artifacts) {
    write_file(*run.out_dir / name, content);
    manifest["artifacts"].push_back(name);
  }
  write_file(*run.out_dir / "manifest.json", manifest.dump(2) + "\n");
}

json maybe(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

Window parse_window(const std::string& w) { return w == "hann" ? Window::Hann : Window::None; }

int axis_index(const std::string& a) { return a == "x" ? 0 : a == "y" ? 1 : 2; }

// ------------------------------------------------------------------ dmr

struct DmrArgs {
  std::string structure;
  double scale = kDefaultBondScale;
  bool exclude_h = false;
  std::size_t max_ring = kDefaultMaxRingSize;
  std::string xyz_out;
  std::string emit_graph;
};

void run_dmr(const DmrArgs& a, Run& run) {
  require_file(a.structure, "structure");
  run.options = {{"structure", a.structure}, {"scale", a.scale},
                 {"exclude_h", a.exclude_h}, {"max_ring", a.max_ring},
                 {"xyz_out", a.xyz_out},     {"emit_graph", a.emit_graph}};
  const Structure s = parse_structure(a.structure);
  const BondGraph g = build_bond_graph(s, a.scale);
  ClassifyOptions co;
  co.exclude_h = a.exclude_h;
  co.max_ring_size = a.max_ring;
  const BranchLabeling l = classify_branches(g, s, co);

  json out;
  out["name"] = s.name();
  out["dmr"] = l.dmr;
  out["counts"] = {{"main", l.main_count},
                   {"dangling", l.dangling_count},
                   {"dangling_h", l.dangling_h_count}};
  out["dangling_mass"] = l.dangling_mass;
  out["total_mass"] = l.total_mass;
  out["n_bonds"] = g.edge_count();
  out["boundary_atoms"] = boundary_atoms(g);
  json labels = json::array();
  for (auto lab : l.labels) labels.push_back(std::string(to_string(lab)));
  out["labels"] = labels;
  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  run.add("dmr.json", text);

  if (!a.xyz_out.empty() || run.out_dir) {
    XyzColumn col{"branch", {}, false};
    for (auto lab : l.labels) col.values.emplace_back(to_string(lab));
    const std::string xyz = write_extxyz(s, std::span<const XyzColumn>(&col, 1));
    if (!a.xyz_out.empty()) write_file(a.xyz_out, xyz);
    run.add("labels.xyz", xyz);
  }
  if (!a.emit_graph.empty()) {
    const bool dot = fs::path(a.emit_graph).extension() == ".dot";
    write_file(a.emit_graph, dot ? graph_to_dot(g, s) : graph_to_csv(g));
  }
}

// ---------------------------------------------------------------- kappa

void run_kappa(const std::string& csv, const std::string& meta, std::size_t trim, Run& run) {
  require_file(csv, "bin profile");
  std::optional<fs::path> sidecar;
  if (!meta.empty()) {
    require_file(meta, "sidecar");
    sidecar = meta;
  }
  run.options = {{"profile", csv}, {"meta", meta}, {"trim", trim}};
  const BinProfile p = parse_bin_profile(csv, sidecar);
  const KappaResult k = extract_kappa(p, trim);
  json out;
  out["kappa"] = k.kappa;
  out["slope_left"] = k.slope_left;
  out["slope_right"] = k.slope_right;
  out["fit_r2_left"] = k.fit_r2_left;
  out["fit_r2_right"] = k.fit_r2_right;
  out["dE_dt_watts"] = k.dE_dt_watts;
  out["n_left"] = k.n_left;
  out["n_right"] = k.n_right;
  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  run.add("kappa.json", text);
}

void warn_failures(const std::vector<PipelineRow>& rows) {
  std::size_t failed = 0;
  for (const auto& r : rows)
    if (!r.ok) {
      ++failed;
      std::cerr << "warning: " << r.name << ": " << r.error << "\n";
    }
  if (failed) std::cerr << "warning: " << failed << " of " << rows.size() << " rows failed\n";
}

void run_kappa_batch(const std::string& manifest, std::size_t trim, Run& run) {
  require_file(manifest, "manifest");
  run.options = {{"manifest", manifest}, {"trim", trim}};
  auto entries = read_manifest(manifest);
  for (auto& e : entries) e.structure.clear(), e.trajectory.clear();
  PipelineOptions po;
  po.trim = trim;
  const auto rows = run_pipeline(entries, po);
  warn_failures(rows);
  const std::string csv = kappa_batch_to_csv(rows);
  std::cout << csv;
  run.add("kappa_batch.csv", csv);
}

// ----------------------------------------------------------------- vdos

struct VdosArgs {
  std::string trajectory;
  std::string structure;
  double fs_per_step = 0.0;
  std::string labels = "none";
  std::string window = "none";
  std::string renorm = "none";
  bool include_h = false;
  std::size_t max_lag = 0;
  std::size_t pad = 1;
  double scale = kDefaultBondScale;
};

void run_vdos(const VdosArgs& a, Run& run) {
  require_file(a.trajectory, "trajectory");
  require_file(a.structure, "structure");
  run.options = {{"trajectory", a.trajectory}, {"structure", a.structure},
                 {"fs_per_step", a.fs_per_step}, {"labels", a.labels},
                 {"window", a.window},         {"renorm", a.renorm},
                 {"include_h", a.include_h},   {"max_lag", a.max_lag},
                 {"pad", a.pad},               {"scale", a.scale}};
  const Structure s = parse_structure(a.structure);
  const Trajectory t = parse_trajectory(a.trajectory, a.fs_per_step);
  std::optional<BranchLabeling> labels;
  if (a.labels == "from-dmr") labels = classify_branches(build_bond_graph(s, a.scale), s);

  GroupOptions go;
  go.include_h = a.include_h;
  const auto groups = make_groups(s, t.n_atoms(), labels ? &labels->labels : nullptr, go);
  VacfOptions vo;
  vo.max_lag = a.max_lag;
  VdosOptions wo;
  wo.window = parse_window(a.window);
  wo.pad_factor = a.pad;
  SpectralProfile p = compute_vdos_profile(t, groups, vo, wo);
  if (a.renorm == "area") renormalize_area(p);

  json out;
  out["groups"] = p.group_names;
  json sizes = json::array();
  for (const auto& g : groups) sizes.push_back(g.members.size());
  out["group_sizes"] = sizes;
  out["n_frequency"] = p.frequency.size();
  out["frequency_step_THz"] = p.frequency.size() > 1 ? p.frequency[1] - p.frequency[0] : 0.0;
  if (p.n_groups() >= 2)
    out["S"] = overlap_s(p);
  else
    out["S"] = nullptr;
  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  run.add("overlap.json", text);
  run.add("vdos.csv", profile_to_csv(p));
}

// ----------------------------------------------------------------- psed

struct PsedArgs {
  std::string trajectory;
  std::string structure;
  double fs_per_step = 0.0;
  std::string axis = "x";
  std::size_t cells = 0;
  std::string window = "none";
  std::string pair_trajectory;
  std::string pair_structure;
};

void run_psed(const PsedArgs& a, Run& run) {
  require_file(a.trajectory, "trajectory");
  require_file(a.structure, "structure");
  if (!a.pair_trajectory.empty()) require_file(a.pair_trajectory, "pair trajectory");
  if (!a.pair_structure.empty()) require_file(a.pair_structure, "pair structure");
  run.options = {{"trajectory", a.trajectory}, {"structure", a.structure},
                 {"fs_per_step", a.fs_per_step}, {"axis", a.axis},
                 {"cells", a.cells},           {"window", a.window},
                 {"pair_trajectory", a.pair_trajectory}, {"pair_structure", a.pair_structure}};
  PsedOptions po;
  po.axis = axis_index(a.axis);
  po.n_cells = a.cells;
  po.window = parse_window(a.window);
  const PsedMap first = psed(parse_trajectory(a.trajectory, a.fs_per_step),
                             parse_structure(a.structure), po);
  std::optional<PsedMap> second;
  if (!a.pair_trajectory.empty())
    second = psed(parse_trajectory(a.pair_trajectory, a.fs_per_step),
                  parse_structure(a.pair_structure), po);
  const PsedPlotData pd = emit_psed_plotdata(first, second ? &*second : nullptr);

  json out;
  out["bounds"] = {{"lower", pd.bounds.lower}, {"upper", pd.bounds.upper}};
  out["n_q"] = first.n_q();
  out["n_freq"] = first.n_freq();
  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  run.add("bounds.json", text);
  run.add("psed_log10.csv", psed_to_csv(first, pd.log_first));
  if (second) run.add("psed_pair_log10.csv", psed_to_csv(*second, pd.log_second));
}

// ----------------------------------------------------------------- attn

struct AttnArgs {
  std::string stack;
  std::string structure;
  double residual = 0.5;
  std::string reduction = "aggregate";
  std::string xyz_out;
};

void run_attn(const AttnArgs& a, Run& run) {
  require_file(a.stack, "attention stack");
  if (!a.structure.empty()) require_file(a.structure, "structure");
  run.options = {{"stack", a.stack}, {"structure", a.structure}, {"residual", a.residual},
                 {"reduction", a.reduction}, {"xyz_out", a.xyz_out}};
  std::optional<Structure> s;
  if (!a.structure.empty()) s = parse_structure(a.structure);
  const AttentionStack st =
      load_attention(a.stack, s ? std::optional<std::size_t>(s->size()) : std::nullopt);
  RolloutOptions ro;
  ro.residual_weight = a.residual;
  ro.reduction = a.reduction == "column" ? Reduction::ColumnMass : Reduction::AggregateRow;
  const AtomAttention att = rollout(st, ro);

  json out;
  out["n_layers"] = st.n_layers();
  out["n_heads"] = st.n_heads();
  out["n_atoms"] = att.scores.size();
  out["scores"] = att.scores;
  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  run.add("attention.json", text);
  if (s) {
    XyzColumn col{"attention", {}, true};
    for (double v : att.scores) col.values.push_back(format_double(v));
    const std::string xyz = write_extxyz(*s, std::span<const XyzColumn>(&col, 1));
    if (!a.xyz_out.empty()) write_file(a.xyz_out, xyz);
    run.add("attention.xyz", xyz);
  }
}

// ------------------------------------------------------------- features

void run_features(const std::string& dir, const std::string& descriptors,
                  const std::string& target, double scale, Run& run) {
  if (!fs::is_directory(dir)) throw InvalidInput("structure directory not found: " + dir);
  require_file(descriptors, "descriptor table");
  run.options = {{"dir", dir}, {"descriptors", descriptors}, {"target", target}, {"scale", scale}};
  const FeatureBuild fb = build_feature_table(dir, descriptors, target, scale);
  for (const auto& s : fb.skipped) std::cerr << "warning: skipped " << s << "\n";
  const std::string csv = feature_table_to_csv(fb.table);
  std::cout << csv;
  run.add("features.csv", csv);
}

// ---------------------------------------------------------------- rf-cv

struct RfArgs {
  std::string table;
  std::string target = "kappa";
  std::size_t k = 10;
  std::uint64_t seed = 7;
  std::size_t trees = 100;
  std::size_t mtry = 0;
  std::size_t min_leaf = 1;
  std::vector<std::string> drop;
  std::size_t repeats = 10;
  double test_fraction = 0.1;
};

json named(const std::vector<std::string>& names, const std::vector<double>& v) {
  json o;
  for (std::size_t i = 0; i < names.size(); ++i) o[names[i]] = v[i];
  return o;
}

void run_rf(const RfArgs& a, Run& run) {
  require_file(a.table, "feature table");
  run.options = {{"table", a.table}, {"target", a.target}, {"k", a.k},
                 {"seed", a.seed},   {"trees", a.trees},   {"mtry", a.mtry},
                 {"min_leaf", a.min_leaf}, {"drop", a.drop}, {"repeats", a.repeats},
                 {"test_fraction", a.test_fraction}};
  FeatureTable t = read_feature_table(a.table, a.target);
  for (const auto& d : a.drop) t = t.without(d);

  ForestConfig cfg;
  cfg.n_trees = a.trees;
  cfg.mtry = a.mtry;
  cfg.min_leaf = a.min_leaf;
  cfg.seed = a.seed;
  const CvResult cv = kfold_cv(t, a.k, cfg);

  json out;
  out["n_rows"] = t.rows();
  out["features"] = t.feature_names();
  out["cv"] = {{"k", a.k},           {"mean_r2", cv.mean_r2}, {"std_r2", cv.std_r2},
               {"mae", cv.mae},      {"fold_r2", cv.fold_r2}, {"fold_mae", cv.fold_mae}};

  std::vector<double> r;
  for (std::size_t c = 0; c < t.cols(); ++c) {
    try {
      r.push_back(pearson(t.column(c), t.target()));
    } catch (const Error&) {
      r.push_back(std::nan(""));
    }
  }
  json pr;
  for (std::size_t c = 0; c < t.cols(); ++c) pr[t.feature_names()[c]] = maybe(r[c]);
  out["pearson"] = pr;

  const auto [train, test] = train_test_split(t.rows(), a.test_fraction, a.seed);
  const ForestModel m = fit_forest(t.subset(train), cfg);
  const FeatureTable held = t.subset(test);
  out["split"] = {{"train_rows", train.size()}, {"test_rows", test.size()},
                  {"test_r2", r2_score(held.target(), m.predict(held))}};
  out["gini"] = named(t.feature_names(), gini_importance(m));
  out["pfi"] = named(t.feature_names(), permutation_importance(m, held, a.repeats, a.seed));

  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  run.add("rf_cv.json", text);
}

// ------------------------------------------------------------- pipeline

void run_pipeline_cmd(const std::string& manifest, const PipelineOptions& po, Run& run) {
  require_file(manifest, "manifest");
  run.options = {{"manifest", manifest},      {"scale", po.bond_scale},
                 {"trim", po.trim},           {"exclude_h", po.exclude_h},
                 {"include_h", po.include_h_groups}, {"workers", worker_count()}};
  const auto entries = read_manifest(manifest);
  const auto rows = run_pipeline(entries, po);
  warn_failures(rows);
  const std::string csv = pipeline_to_csv(rows);
  std::cout << csv;
  run.add("dataset.csv", csv);
}

int emit_error(const std::string& kind, const std::string& msg, int code) {
  json e;
  e["error"] = msg;
  e["kind"] = kind;
  std::cout << e.dump() << "\n";
  return code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"coftherm: structure, NEMD, spectral and regression analysis for COF thermal data"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_dir;
  app.add_option("--out", out_dir, "Write artifacts and manifest.json to this directory");

  Run run;
  std::function<void()> action;

  DmrArgs dmr;
  auto* c_dmr = app.add_subcommand("dmr", "Main/dangling branch labels and dangling mass ratio");
  c_dmr->add_option("structure", dmr.structure, "CIF or extended XYZ file")->required();
  c_dmr->add_option("--scale", dmr.scale, "Bond cutoff factor on covalent radii")
      ->check(CLI::Range(1.0, 1.5));
  c_dmr->add_flag("--exclude-h", dmr.exclude_h, "Leave dangling H out of the DMR numerator");
  c_dmr->add_option("--max-ring", dmr.max_ring, "Largest ring size")->check(CLI::Range(3, 12));
  c_dmr->add_option("--xyz-out", dmr.xyz_out, "Extended XYZ with a per-atom branch column");
  c_dmr->add_option("--emit-graph", dmr.emit_graph, "Bond graph as .dot or .csv edge list");
  c_dmr->callback([&] { action = [&] { run_dmr(dmr, run); }; });

  std::string kappa_csv, kappa_meta;
  std::size_t trim = 0;
  auto* c_kappa = app.add_subcommand("kappa", "Thermal conductivity from a bin temperature profile");
  c_kappa->add_option("profile", kappa_csv, "bin_index,temperature_K CSV")->required();
  c_kappa->add_option("--meta", kappa_meta, "JSON sidecar (default: <profile>.json)");
  c_kappa->add_option("--trim", trim, "Extra bins dropped next to every reservoir");
  c_kappa->callback([&] { action = [&] { run_kappa(kappa_csv, kappa_meta, trim, run); }; });

  std::string batch_manifest;
  auto* c_batch = app.add_subcommand("kappa-batch", "kx, ky, mean and ratio for a manifest");
  c_batch->add_option("manifest", batch_manifest, "CSV with name, profile_x, profile_y")->required();
  c_batch->add_option("--trim", trim, "Extra bins dropped next to every reservoir");
  c_batch->callback([&] { action = [&] { run_kappa_batch(batch_manifest, trim, run); }; });

  VdosArgs vd;
  auto* c_vdos = app.add_subcommand("vdos", "Group VDOS profiles and the overlap metric S");
  c_vdos->add_option("trajectory", vd.trajectory, "Dump with vx vy vz")->required();
  c_vdos->add_option("structure", vd.structure, "Unit cell (trajectory may be a replica)")->required();
  c_vdos->add_option("--fs-per-step", vd.fs_per_step, "Femtoseconds per MD timestep")
      ->required()
      ->check(CLI::PositiveNumber);
  c_vdos->add_option("--labels", vd.labels, "Split groups by branch")
      ->check(CLI::IsMember({"none", "from-dmr"}));
  c_vdos->add_option("--window", vd.window, "VACF window")->check(CLI::IsMember({"none", "hann"}));
  c_vdos->add_option("--renorm", vd.renorm, "Rescale groups before S")
      ->check(CLI::IsMember({"none", "area"}));
  c_vdos->add_flag("--include-h", vd.include_h, "Keep hydrogen groups");
  c_vdos->add_option("--max-lag", vd.max_lag, "VACF lags (default n_frames/2)");
  c_vdos->add_option("--pad", vd.pad, "Zero-padding factor for the VDOS FFT")
      ->check(CLI::Range(1, 64));
  c_vdos->add_option("--scale", vd.scale, "Bond cutoff factor for --labels from-dmr")
      ->check(CLI::Range(1.0, 1.5));
  c_vdos->callback([&] { action = [&] { run_vdos(vd, run); }; });

  PsedArgs ps;
  auto* c_psed = app.add_subcommand("psed", "Phonon spectral energy density along one axis");
  c_psed->add_option("trajectory", ps.trajectory, "Dump with positions and velocities")->required();
  c_psed->add_option("structure", ps.structure, "Unit cell")->required();
  c_psed->add_option("--fs-per-step", ps.fs_per_step, "Femtoseconds per MD timestep")
      ->required()
      ->check(CLI::PositiveNumber);
  c_psed->add_option("--axis", ps.axis, "Supercell axis")->check(CLI::IsMember({"x", "y", "z"}));
  c_psed->add_option("--cells", ps.cells, "Unit cells along the axis")->required();
  c_psed->add_option("--window", ps.window, "Time window")->check(CLI::IsMember({"none", "hann"}));
  auto* pair_t = c_psed->add_option("--pair-trajectory", ps.pair_trajectory,
                                    "Second trajectory sharing the color scale");
  auto* pair_s = c_psed->add_option("--pair-structure", ps.pair_structure,
                                    "Unit cell of the second trajectory");
  pair_t->needs(pair_s);
  pair_s->needs(pair_t);
  c_psed->callback([&] { action = [&] { run_psed(ps, run); }; });

  AttnArgs at;
  auto* c_attn = app.add_subcommand("attn", "Per-atom attention rollout from an ATNS stack");
  c_attn->add_option("stack", at.stack, "ATNS container")->required();
  c_attn->add_option("--structure", at.structure, "Structure for atom-count check and XYZ output");
  c_attn->add_option("--residual", at.residual, "Identity mixing weight in [0, 1)");
  c_attn->add_option("--reduction", at.reduction, "Score read-out")
      ->check(CLI::IsMember({"aggregate", "column"}));
  c_attn->add_option("--xyz-out", at.xyz_out, "Extended XYZ with an attention column")
      ->needs("--structure");
  c_attn->callback([&] { action = [&] { run_attn(at, run); }; });

  std::string feat_dir, feat_desc, feat_target = "kappa";
  double feat_scale = kDefaultBondScale;
  auto* c_feat = app.add_subcommand("features", "Feature table from structures and descriptors");
  c_feat->add_option("dir", feat_dir, "Directory of <name>.cif / .xyz files")->required();
  c_feat->add_option("--descriptors", feat_desc, "CSV with name, target and extra descriptors")
      ->required();
  c_feat->add_option("--target", feat_target, "Target column name");
  c_feat->add_option("--scale", feat_scale, "Bond cutoff factor")->check(CLI::Range(1.0, 1.5));
  c_feat->callback([&] {
    action = [&] { run_features(feat_dir, feat_desc, feat_target, feat_scale, run); };
  });

  RfArgs rf;
  auto* c_rf = app.add_subcommand("rf-cv", "Random forest k-fold CV, Gini and permutation importance");
  c_rf->add_option("table", rf.table, "Feature table CSV")->required();
  c_rf->add_option("--target", rf.target, "Target column name");
  c_rf->add_option("--k", rf.k, "Folds")->check(CLI::Range(2, 1000000));
  c_rf->add_option("--seed", rf.seed, "RNG seed");
  c_rf->add_option("--trees", rf.trees, "Trees per forest")->check(CLI::Range(1, 100000));
  c_rf->add_option("--mtry", rf.mtry, "Candidate features per split (0: ceil(p/3))");
  c_rf->add_option("--min-leaf", rf.min_leaf, "Minimum rows per leaf")->check(CLI::Range(1, 1000000));
  c_rf->add_option("--drop", rf.drop, "Feature columns to leave out");
  c_rf->add_option("--repeats", rf.repeats, "Shuffles per feature for PFI")->check(CLI::Range(5, 100000));
  c_rf->add_option("--test-fraction", rf.test_fraction, "Held-out share for importances")
      ->check(CLI::Range(0.01, 0.99));
  c_rf->callback([&] { action = [&] { run_rf(rf, run); }; });

  std::string pipe_manifest;
  PipelineOptions po;
  auto* c_pipe = app.add_subcommand("pipeline", "Dataset CSV from a batch manifest");
  c_pipe->add_option("manifest", pipe_manifest,
                     "CSV: name,structure,profile_x,profile_y,trajectory,fs_per_step")
      ->required();
  c_pipe->add_option("--scale", po.bond_scale, "Bond cutoff factor")->check(CLI::Range(1.0, 1.5));
  c_pipe->add_option("--trim", po.trim, "Extra bins dropped next to every reservoir");
  c_pipe->add_flag("--exclude-h", po.exclude_h, "Leave dangling H out of the DMR numerator");
  c_pipe->add_flag("--include-h", po.include_h_groups, "Keep hydrogen VDOS groups");
  c_pipe->callback([&] { action = [&] { run_pipeline_cmd(pipe_manifest, po, run); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) return emit_error("usage", e.what(), 2);
    return app.exit(e);
  }

  try {
    run.subcommand = app.get_subcommands().front()->get_name();
    if (!out_dir.empty()) {
      prepare_out_dir(out_dir);
      run.out_dir = fs::path(out_dir);
    }
    action();
    finish(run);
  } catch (const Error& e) {
    return emit_error(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return emit_error("internal", e.what(), 1);
  }
  return 0;
}
