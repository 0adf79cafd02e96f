#include "coftherm/mlkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "coftherm/error.hpp"
#include "coftherm/rng.hpp"
#include "coftherm/structio.hpp"

namespace coftherm {

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw InvalidInput("pearson: need at least 2 samples");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidInput("pearson: zero variance column");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double r2_score(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size() || truth.empty()) throw InvalidInput("r2_score: bad lengths");
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) throw NumericalError("R^2 undefined: evaluation target is constant");
  return 1.0 - ss_res / ss_tot;
}

double mean_absolute_error(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size() || truth.empty()) throw InvalidInput("mae: bad lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - pred[i]);
  return s / static_cast<double>(truth.size());
}

// ------------------------------------------------------------- FeatureTable

FeatureTable::FeatureTable(std::vector<std::string> feature_names, std::string target_name)
    : feature_names_(std::move(feature_names)), target_name_(std::move(target_name)) {
  if (feature_names_.empty()) throw InvalidInput("feature table needs at least one feature");
}

void FeatureTable::add_row(std::string name, std::vector<double> features, double target) {
  if (features.size() != cols()) throw InvalidInput("row has the wrong number of features");
  row_names_.push_back(std::move(name));
  x_.insert(x_.end(), features.begin(), features.end());
  target_.push_back(target);
}

std::vector<double> FeatureTable::column(std::size_t c) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
  return out;
}

std::size_t FeatureTable::column_index(const std::string& name) const {
  auto it = std::find(feature_names_.begin(), feature_names_.end(), name);
  if (it == feature_names_.end()) throw InvalidInput("no feature column '" + name + "'");
  return static_cast<std::size_t>(it - feature_names_.begin());
}

FeatureTable FeatureTable::subset(std::span<const std::size_t> rows_idx) const {
  FeatureTable t(feature_names_, target_name_);
  for (auto r : rows_idx) {
    const auto rw = row(r);
    t.add_row(row_names_[r], std::vector<double>(rw.begin(), rw.end()), target_[r]);
  }
  return t;
}

FeatureTable FeatureTable::without(const std::string& feature) const {
  const std::size_t drop = column_index(feature);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < cols(); ++c)
    if (c != drop) keep.push_back(c);
  return permuted(keep);
}

FeatureTable FeatureTable::permuted(std::span<const std::size_t> order) const {
  std::vector<std::string> names;
  for (auto c : order) names.push_back(feature_names_.at(c));
  FeatureTable t(names, target_name_);
  for (std::size_t r = 0; r < rows(); ++r) {
    std::vector<double> v;
    for (auto c : order) v.push_back(at(r, c));
    t.add_row(row_names_[r], std::move(v), target_[r]);
  }
  return t;
}

void FeatureTable::validate() const {
  for (std::size_t r = 0; r < rows(); ++r) {
    if (!std::isfinite(target_[r]))
      throw InvalidInput("missing or non-finite target in row " + std::to_string(r));
    for (std::size_t c = 0; c < cols(); ++c) {
      const double v = at(r, c);
      if (!std::isfinite(v))
        throw InvalidInput("missing value in column '" + feature_names_[c] + "' row " +
                           std::to_string(r));
      const auto& nm = feature_names_[c];
      if ((nm == "void_fraction" || nm == "dmr") && (v < 0.0 || v > 1.0))
        throw InvalidInput("column '" + nm + "' must lie in [0, 1] (row " + std::to_string(r) + ")");
    }
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

} // namespace

FeatureTable read_feature_table(const std::filesystem::path& path, const std::string& target) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv(line);
    break;
  }
  if (header.empty()) throw ParseError(path.string(), 1, 1, "empty feature table");
  std::ptrdiff_t name_col = -1;
  std::ptrdiff_t target_col = -1;
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "name")
      name_col = static_cast<std::ptrdiff_t>(c);
    else if (header[c] == target)
      target_col = static_cast<std::ptrdiff_t>(c);
    else {
      feature_cols.push_back(c);
      feature_names.push_back(header[c]);
    }
  }
  if (target_col < 0) throw ParseError(path.string(), line_no, 1, "no target column '" + target + "'");
  FeatureTable t(feature_names, target);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw ParseError(path.string(), line_no, 1,
                       "expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()));
    auto number = [&](std::size_t c) {
      const std::string& s = cells[c];
      double v = 0.0;
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError(path.string(), line_no, 1,
                         "missing or non-numeric value in column '" + header[c] + "'");
      return v;
    };
    std::vector<double> f;
    for (auto c : feature_cols) f.push_back(number(c));
    const std::string name =
        name_col >= 0 ? cells[static_cast<std::size_t>(name_col)] : "row" + std::to_string(row);
    t.add_row(name, std::move(f), number(static_cast<std::size_t>(target_col)));
    ++row;
  }
  t.validate();
  return t;
}

std::string feature_table_to_csv(const FeatureTable& t) {
  std::ostringstream out;
  out << "name";
  for (const auto& f : t.feature_names()) out << "," << f;
  out << "," << t.target_name() << "\n";
  for (std::size_t r = 0; r < t.rows(); ++r) {
    out << t.row_names()[r];
    for (std::size_t c = 0; c < t.cols(); ++c) out << "," << fmt6(t.at(r, c));
    out << "," << fmt6(t.target()[r]) << "\n";
  }
  return out.str();
}

// ------------------------------------------------------------------ forest

double RegressionTree::predict(std::span<const double> x) const {
  std::uint32_t n = 0;
  while (nodes[n].feature >= 0)
    n = x[static_cast<std::size_t>(nodes[n].feature)] <= nodes[n].threshold ? nodes[n].left
                                                                              : nodes[n].right;
  return nodes[n].value;
}

double ForestModel::predict(std::span<const double> x) const {
  if (x.size() != n_features()) throw InvalidInput("prediction row has the wrong width");
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return s / static_cast<double>(trees.size());
}

std::vector<double> ForestModel::predict(const FeatureTable& t) const {
  if (t.feature_names() != feature_names)
    throw InvalidInput("feature columns differ from the ones the model was fitted on");
  std::vector<double> out(t.rows());
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < t.rows(); ++r) out[r] = predict(t.row(r));
  return out;
}

namespace {

std::size_t resolve_mtry(const ForestConfig& cfg, std::size_t p) {
  const std::size_t m = cfg.mtry == 0 ? (p + 2) / 3 : cfg.mtry;
  if (m < 1 || m > p) throw InvalidInput("mtry must lie in [1, n_features]");
  return m;
}

std::vector<std::size_t> resolve_order(const ForestConfig& cfg, std::size_t p) {
  if (cfg.feature_order.empty()) {
    std::vector<std::size_t> o(p);
    std::iota(o.begin(), o.end(), 0);
    return o;
  }
  std::vector<std::size_t> sorted = cfg.feature_order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != i || sorted.size() != p)
      throw InvalidInput("feature_order must be a permutation of 0..n_features-1");
  return cfg.feature_order;
}

struct Split {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

} // namespace

RegressionTree grow_tree(const FeatureTable& t, std::span<const std::size_t> sample,
                         const ForestConfig& cfg, std::uint64_t stream_seed) {
  const std::size_t p = t.cols();
  const std::size_t mtry = resolve_mtry(cfg, p);
  const auto order = resolve_order(cfg, p);
  const std::size_t min_leaf = std::max<std::size_t>(1, cfg.min_leaf);
  const auto& y = t.target();
  Xoshiro256 rng(stream_seed);

  RegressionTree tree;
  tree.impurity_decrease.assign(p, 0.0);
  tree.in_bag.assign(t.rows(), 0);
  for (auto r : sample) ++tree.in_bag[r];

  std::vector<std::size_t> idx(sample.begin(), sample.end());
  struct Work {
    std::uint32_t node;
    std::size_t begin, end, depth;
  };
  std::vector<Work> stack;
  tree.nodes.push_back({});
  stack.push_back({0, 0, idx.size(), 0});

  std::vector<std::size_t> positions(p);
  std::vector<std::pair<double, std::size_t>> sorted;

  while (!stack.empty()) {
    const Work w = stack.back();
    stack.pop_back();
    const std::size_t n = w.end - w.begin;
    double sum = 0.0;
    double y_min = std::numeric_limits<double>::infinity();
    double y_max = -y_min;
    for (std::size_t i = w.begin; i < w.end; ++i) {
      const double v = y[idx[i]];
      sum += v;
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
    tree.nodes[w.node].value = sum / static_cast<double>(n);

    const bool depth_capped = cfg.max_depth != 0 && w.depth >= cfg.max_depth;
    if (n < 2 * min_leaf || y_min == y_max || depth_capped) continue;

    // candidate features: mtry positions of the priority order, visited ascending
    std::iota(positions.begin(), positions.end(), 0);
    for (std::size_t k = 0; k < mtry; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(p - k));
      std::swap(positions[k], positions[j]);
    }
    std::sort(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(mtry));

    const double parent_term = sum * sum / static_cast<double>(n);
    Split best;
    for (std::size_t k = 0; k < mtry; ++k) {
      const std::size_t f = order[positions[k]];
      sorted.clear();
      for (std::size_t i = w.begin; i < w.end; ++i) sorted.emplace_back(t.at(idx[i], f), idx[i]);
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front().first == sorted.back().first) continue;
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += y[sorted[i].second];
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        if (sorted[i].first == sorted[i + 1].first) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - parent_term;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<std::int32_t>(f);
          double thr = 0.5 * (sorted[i].first + sorted[i + 1].first);
          if (!(thr < sorted[i + 1].first)) thr = sorted[i].first;
          best.threshold = thr;
        }
      }
    }
    if (best.feature < 0) continue;

    const auto f = static_cast<std::size_t>(best.feature);
    auto mid = std::stable_partition(idx.begin() + static_cast<std::ptrdiff_t>(w.begin),
                                     idx.begin() + static_cast<std::ptrdiff_t>(w.end),
                                     [&](std::size_t r) { return t.at(r, f) <= best.threshold; });
    const auto split_at = static_cast<std::size_t>(mid - idx.begin());
    tree.impurity_decrease[f] += best.gain;

    const auto left = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.push_back({});
    const auto right = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.push_back({});
    TreeNode& node = tree.nodes[w.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    stack.push_back({right, split_at, w.end, w.depth + 1});
    stack.push_back({left, w.begin, split_at, w.depth + 1});
  }
  return tree;
}

ForestModel fit_forest(const FeatureTable& t, const ForestConfig& cfg) {
  t.validate();
  if (t.rows() < 20) throw InvalidInput("fit_forest needs at least 20 rows");
  if (cfg.n_trees < 1) throw InvalidInput("n_trees must be >= 1");
  resolve_mtry(cfg, t.cols());
  resolve_order(cfg, t.cols());
  const auto& y = t.target();
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); }))
    throw InvalidInput("degenerate constant target; nothing to learn");

  ForestModel m;
  m.feature_names = t.feature_names();
  m.config = cfg;
  m.trees.resize(cfg.n_trees);
  const std::size_t n = t.rows();

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t k = 0; k < cfg.n_trees; ++k) {
    auto rng = Xoshiro256::derive(cfg.seed, k, 0);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
    m.trees[k] = grow_tree(t, sample, cfg, rng.next());
  }

  m.oob_prediction.assign(n, std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel for schedule(static)
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

std::vector<double> gini_importance(const ForestModel& m) {
  std::vector<double> imp(m.n_features(), 0.0);
  for (const auto& tree : m.trees) {
    const double total =
        std::accumulate(tree.impurity_decrease.begin(), tree.impurity_decrease.end(), 0.0);
    if (!(total > 0.0)) continue;
    for (std::size_t f = 0; f < imp.size(); ++f) imp[f] += tree.impurity_decrease[f] / total;
  }
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0.0)
    for (auto& v : imp) v /= total;
  return imp;
}

std::vector<double> permutation_importance(const ForestModel& m, const FeatureTable& held_out,
                                           std::size_t n_repeats, std::uint64_t seed) {
  if (held_out.feature_names() != m.feature_names)
    throw InvalidInput("held-out table columns differ from the model's");
  if (held_out.rows() < 10) throw InvalidInput("permutation importance needs >= 10 held-out rows");
  if (n_repeats < 5) throw InvalidInput("permutation importance needs >= 5 repeats");
  const std::size_t n = held_out.rows();
  const std::size_t p = held_out.cols();
  const auto baseline = r2_score(held_out.target(), m.predict(held_out));

  std::vector<double> drops(p * n_repeats, 0.0);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t task = 0; task < p * n_repeats; ++task) {
    const std::size_t f = task / n_repeats;
    const std::size_t rep = task % n_repeats;
    std::vector<double> x(n * p);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < p; ++c) x[r * p + c] = held_out.at(r, c);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    auto rng = Xoshiro256::derive(seed, f + 1, rep);
    rng.shuffle(std::span<std::size_t>(perm));
    for (std::size_t r = 0; r < n; ++r) x[r * p + f] = held_out.at(perm[r], f);
    std::vector<double> pred(n);
    for (std::size_t r = 0; r < n; ++r) pred[r] = m.predict(std::span<const double>(&x[r * p], p));
    drops[task] = baseline - r2_score(held_out.target(), pred);
  }

  std::vector<double> imp(p, 0.0);
  for (std::size_t f = 0; f < p; ++f) {
    for (std::size_t rep = 0; rep < n_repeats; ++rep) imp[f] += drops[f * n_repeats + rep];
    imp[f] /= static_cast<double>(n_repeats);
  }
  return imp;
}

std::vector<std::vector<std::size_t>> kfold_assignment(std::size_t n, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) throw InvalidInput("k must be at least 2");
  if (n < 2 * k)
    throw InvalidInput("every fold needs at least 2 rows (n_rows " + std::to_string(n) + ", k " +
                       std::to_string(k) + ")");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Xoshiro256 rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t size = n / k + (i < n % k ? 1 : 0);
    folds[i].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

CvResult kfold_cv(const FeatureTable& t, std::size_t k, const ForestConfig& cfg) {
  const auto folds = kfold_assignment(t.rows(), k, cfg.seed);
  CvResult res;
  for (std::size_t i = 0; i < k; ++i) {
    if (folds[i].size() < 2)
      throw InvalidInput("fold " + std::to_string(i) + " has fewer than 2 rows");
    std::vector<std::size_t> train;
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) train.insert(train.end(), folds[j].begin(), folds[j].end());
    std::sort(train.begin(), train.end());
    const FeatureTable train_t = t.subset(train);
    const FeatureTable test_t = t.subset(folds[i]);
    const ForestModel m = fit_forest(train_t, cfg);
    const auto pred = m.predict(test_t);
    res.fold_r2.push_back(r2_score(test_t.target(), pred));
    res.fold_mae.push_back(mean_absolute_error(test_t.target(), pred));
  }
  const double kk = static_cast<double>(k);
  res.mean_r2 = std::accumulate(res.fold_r2.begin(), res.fold_r2.end(), 0.0) / kk;
  res.mae = std::accumulate(res.fold_mae.begin(), res.fold_mae.end(), 0.0) / kk;
  double var = 0.0;
  for (double r : res.fold_r2) var += (r - res.mean_r2) * (r - res.mean_r2);
  res.std_r2 = std::sqrt(var / kk);
  return res;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (n < 2) throw InvalidInput("train_test_split needs at least 2 rows");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidInput("test fraction must lie in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Xoshiro256 rng(seed ^ 0x5851F42D4C957F2Dull);
  rng.shuffle(std::span<std::size_t>(order));
  auto n_test = static_cast<std::size_t>(std::round(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {train, test};
}

} // namespace coftherm
