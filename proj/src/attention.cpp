#include "coftherm/attention.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "coftherm/error.hpp"

namespace coftherm {

static_assert(std::endian::native == std::endian::little,
              "attention container I/O assumes a little-endian host");

AttentionStack::AttentionStack(std::size_t n_layers, std::size_t n_heads,
                               std::vector<TokenRef> tokens, std::vector<float> weights)
    : n_layers_(n_layers), n_heads_(n_heads), tokens_(std::move(tokens)),
      weights_(std::move(weights)) {
  if (n_layers_ == 0 || n_heads_ == 0 || tokens_.empty())
    throw InvalidInput("attention stack needs at least one layer, head and token");
  const std::size_t t = tokens_.size();
  if (weights_.size() != n_layers_ * n_heads_ * t * t)
    throw InvalidInput("attention weight count does not match layers x heads x tokens^2");
}

std::size_t AttentionStack::aggregate_token() const {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i].kind == TokenKind::Aggregate) return i;
  throw InvalidInput("token map has no aggregate token");
}

std::size_t AttentionStack::atom_count() const {
  std::size_t n = 0;
  for (const auto& t : tokens_)
    if (t.kind == TokenKind::Atom) ++n;
  return n;
}

void AttentionStack::validate(double tol, std::optional<std::size_t> expected_atoms) const {
  std::size_t aggregates = 0;
  const std::size_t n_atoms = expected_atoms.value_or(atom_count());
  std::vector<char> seen(n_atoms, 0);
  for (const auto& t : tokens_) {
    switch (t.kind) {
    case TokenKind::Aggregate: ++aggregates; break;
    case TokenKind::Patch: break;
    case TokenKind::Atom:
      if (t.index < 0 || static_cast<std::size_t>(t.index) >= n_atoms)
        throw InvalidInput("token map references atom " + std::to_string(t.index) +
                           " but the structure has " + std::to_string(n_atoms) + " atoms");
      if (seen[static_cast<std::size_t>(t.index)])
        throw InvalidInput("atom " + std::to_string(t.index) + " appears twice in the token map");
      seen[static_cast<std::size_t>(t.index)] = 1;
      break;
    default: throw InvalidInput("unknown token kind");
    }
  }
  if (aggregates != 1)
    throw InvalidInput("token map must contain exactly one aggregate token (found " +
                       std::to_string(aggregates) + ")");
  for (std::size_t a = 0; a < n_atoms; ++a)
    if (!seen[a])
      throw InvalidInput("atom " + std::to_string(a) + " has no token (token-map/atom-count mismatch)");

  const std::size_t t = n_tokens();
  for (std::size_t l = 0; l < n_layers_; ++l)
    for (std::size_t h = 0; h < n_heads_; ++h)
      for (std::size_t r = 0; r < t; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < t; ++c) {
          const float v = at(l, h, r, c);
          if (!(v >= 0.0f) || !std::isfinite(v))
            throw InvalidInput("negative or non-finite attention weight");
          sum += v;
        }
        if (std::abs(sum - 1.0) > tol)
          throw InvalidInput("attention row does not sum to 1 (layer " + std::to_string(l) +
                             ", head " + std::to_string(h) + ", row " + std::to_string(r) +
                             ", sum " + std::to_string(sum) + ")");
      }
}

namespace {

constexpr char kMagic[4] = {'A', 'T', 'N', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error("parse", "attention container truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

} // namespace

std::vector<std::uint8_t> serialize_attention(const AttentionStack& a) {
  std::vector<std::uint8_t> out;
  out.reserve(20 + a.n_tokens() * 8 + a.weights().size() * 4);
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.n_layers()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.n_heads()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.n_tokens()));
  for (const auto& t : a.tokens()) {
    put<std::int32_t>(out, static_cast<std::int32_t>(t.kind));
    put<std::int32_t>(out, t.index);
  }
  const auto* p = reinterpret_cast<const std::uint8_t*>(a.weights().data());
  out.insert(out.end(), p, p + a.weights().size() * sizeof(float));
  return out;
}

AttentionStack deserialize_attention(const std::vector<std::uint8_t>& bytes,
                                     std::optional<std::size_t> expected_atoms) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error("parse", "not an attention container (bad magic)");
  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kVersion)
    throw Error("parse", "unsupported attention container version " + std::to_string(version));
  const auto layers = get<std::uint32_t>(bytes, pos);
  const auto heads = get<std::uint32_t>(bytes, pos);
  const auto n_tok = get<std::uint32_t>(bytes, pos);
  const std::size_t n_weights = std::size_t{layers} * heads * n_tok * n_tok;
  if (bytes.size() != 20 + std::size_t{n_tok} * 8 + n_weights * 4)
    throw Error("parse", "attention container size does not match its header");
  std::vector<TokenRef> tokens(n_tok);
  for (auto& t : tokens) {
    const auto kind = get<std::int32_t>(bytes, pos);
    if (kind < 0 || kind > 2) throw Error("parse", "bad token kind " + std::to_string(kind));
    t.kind = static_cast<TokenKind>(kind);
    t.index = get<std::int32_t>(bytes, pos);
  }
  std::vector<float> w(n_weights);
  std::memcpy(w.data(), bytes.data() + pos, n_weights * sizeof(float));
  AttentionStack stack(layers, heads, std::move(tokens), std::move(w));
  stack.validate(kLoadRowTolerance, expected_atoms);
  return stack;
}

AttentionStack load_attention(const std::filesystem::path& path,
                              std::optional<std::size_t> expected_atoms) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open attention file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_attention(bytes, expected_atoms);
}

void save_attention(const AttentionStack& a, const std::filesystem::path& path) {
  const auto bytes = serialize_attention(a);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write attention file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

// Head-averaged, residual-mixed, row-normalized matrix of one layer.
std::vector<double> mixed_layer(const AttentionStack& a, std::size_t layer, double w) {
  const std::size_t t = a.n_tokens();
  std::vector<double> m(t * t, 0.0);
  const double inv_h = 1.0 / static_cast<double>(a.n_heads());
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < t; ++r) {
    double* row = &m[r * t];
    for (std::size_t h = 0; h < a.n_heads(); ++h)
      for (std::size_t c = 0; c < t; ++c) row[c] += static_cast<double>(a.at(layer, h, r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < t; ++c) {
      row[c] = (1.0 - w) * row[c] * inv_h + (c == r ? w : 0.0);
      sum += row[c];
    }
    for (std::size_t c = 0; c < t; ++c) row[c] /= sum;
  }
  return m;
}

} // namespace

AtomAttention rollout(const AttentionStack& a, const RolloutOptions& opt) {
  if (!(opt.residual_weight >= 0.0 && opt.residual_weight < 1.0))
    throw InvalidInput("residual weight must lie in [0, 1)");
  const std::size_t t = a.n_tokens();
  const std::size_t agg = a.aggregate_token();

  // v^T J = v^T A'_L ... A'_1, applied from the top layer down
  std::vector<double> v(t, 0.0);
  if (opt.reduction == Reduction::AggregateRow)
    v[agg] = 1.0;
  else
    std::fill(v.begin(), v.end(), 1.0);

  std::vector<double> next(t);
  for (std::size_t l = a.n_layers(); l-- > 0;) {
    const auto m = mixed_layer(a, l, opt.residual_weight);
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < t; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < t; ++r) acc += v[r] * m[r * t + c];
      next[c] = acc;
    }
    v.swap(next);
  }

  AtomAttention out;
  out.scores.assign(a.atom_count(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    const auto& tok = a.tokens()[i];
    if (tok.kind != TokenKind::Atom) continue;
    if (tok.index < 0 || static_cast<std::size_t>(tok.index) >= out.scores.size())
      throw InvalidInput("atom token index out of range");
    out.scores[static_cast<std::size_t>(tok.index)] = v[i];
    total += v[i];
  }
  if (!(total > 0.0))
    throw NumericalError("rollout assigns no attention to atom tokens (degenerate stack)");
  for (auto& s : out.scores) s /= total;
  return out;
}

} // namespace coftherm
