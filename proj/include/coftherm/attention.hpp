#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace coftherm {

enum class TokenKind : std::int32_t { Atom = 0, Patch = 1, Aggregate = 2 };

struct TokenRef {
  TokenKind kind = TokenKind::Atom;
  std::int32_t index = 0; ///< atom index for Atom tokens, patch index for Patch
};

/// Exported multi-layer multi-head attention, float32 storage.
/// Layout of `weights`: [layer][head][row][col], rows sum to one.
class AttentionStack {
public:
  AttentionStack(std::size_t n_layers, std::size_t n_heads, std::vector<TokenRef> tokens,
                 std::vector<float> weights);

  std::size_t n_layers() const noexcept { return n_layers_; }
  std::size_t n_heads() const noexcept { return n_heads_; }
  std::size_t n_tokens() const noexcept { return tokens_.size(); }
  const std::vector<TokenRef>& tokens() const noexcept { return tokens_; }
  const std::vector<float>& weights() const noexcept { return weights_; }

  float at(std::size_t layer, std::size_t head, std::size_t row, std::size_t col) const {
    const std::size_t t = n_tokens();
    return weights_[((layer * n_heads_ + head) * t + row) * t + col];
  }

  std::size_t aggregate_token() const;
  std::size_t atom_count() const;

  /// Row sums within `tol` of 1, non-negative entries, token map covers
  /// atoms 0..n-1 exactly once (n = expected_atoms when given) and has
  /// exactly one aggregate token.
  void validate(double tol, std::optional<std::size_t> expected_atoms = std::nullopt) const;

private:
  std::size_t n_layers_;
  std::size_t n_heads_;
  std::vector<TokenRef> tokens_;
  std::vector<float> weights_;
};

/// Container byte layout (little-endian):
///   "ATNS" | u32 version=1 | u32 layers | u32 heads | u32 tokens
///   | tokens x (i32 kind, i32 index) | layers*heads*tokens*tokens f32
std::vector<std::uint8_t> serialize_attention(const AttentionStack& a);
AttentionStack deserialize_attention(const std::vector<std::uint8_t>& bytes,
                                     std::optional<std::size_t> expected_atoms = std::nullopt);

AttentionStack load_attention(const std::filesystem::path& path,
                              std::optional<std::size_t> expected_atoms = std::nullopt);
void save_attention(const AttentionStack& a, const std::filesystem::path& path);

/// Row sum tolerance applied when loading exported tensors.
inline constexpr double kLoadRowTolerance = 1e-3;

enum class Reduction { AggregateRow, ColumnMass };

struct RolloutOptions {
  double residual_weight = 0.5;
  Reduction reduction = Reduction::AggregateRow;
};

struct AtomAttention {
  std::vector<double> scores; ///< indexed by atom, non-negative, sums to 1
};

/// Attention rollout. Per layer: head mean, mix with identity
/// (1 - w) A + w I, re-normalize rows; J = A'_L ... A'_1. Atom scores are
/// the aggregate-token row of J (or the column sums of J) restricted to
/// atom tokens and renormalized. J is never formed: a row vector is pushed
/// through the layers from the top, each step parallel over columns.
AtomAttention rollout(const AttentionStack& a, const RolloutOptions& opt = {});

} // namespace coftherm
