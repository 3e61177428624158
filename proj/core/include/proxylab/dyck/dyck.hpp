#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "proxylab/numerics/rng.hpp"

namespace proxylab::dyck {

using Token = std::int32_t;

/// Vocabulary: BOS = 0, brackets 1..2k where 2t-1 opens and 2t closes type t,
/// EOS = 2k+1.
constexpr Token kBos = 0;

struct DyckSpec {
  int bracket_types = 20;
  int max_depth = 10;
  /// Token budget including BOS and EOS.
  int max_len = 512;

  void validate() const;
  Token eos() const { return 2 * bracket_types + 1; }
  int vocab_size() const { return 2 * bracket_types + 2; }

  friend bool operator==(const DyckSpec&, const DyckSpec&) = default;
};

inline bool is_bracket(Token t, int k) { return t >= 1 && t <= 2 * k; }
inline bool is_opener(Token t, int k) { return is_bracket(t, k) && (t % 2) == 1; }
inline bool is_closer(Token t, int k) { return is_bracket(t, k) && (t % 2) == 0; }
/// 1-based bracket type of a bracket token.
inline int bracket_type(Token t) { return (t + 1) / 2; }
inline Token opener_of_type(int type) { return 2 * type - 1; }
inline Token closer_of_type(int type) { return 2 * type; }

class UnbalancedError : public std::invalid_argument {
 public:
  UnbalancedError(std::size_t position, const std::string& what)
      : std::invalid_argument(what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Per-position annotations. BOS/EOS positions are depth-neutral: their
/// prefix depth is the running depth, their token depth is 0 and they have no
/// match (-1).
struct DepthInfo {
  std::vector<int> prefix_depths;
  std::vector<int> token_depths;
  std::vector<int> match_index;
};

/// Single stack pass. Throws UnbalancedError at the first violation (a closer
/// with no opener, a mismatched type, or unclosed openers at the end).
DepthInfo depths_and_matches(std::span<const Token> tokens, int bracket_types);

/// O/C skeleton of the bracket tokens. BOS is allowed only at the front and
/// EOS only at the back; any other non-bracket token throws.
std::string structure_of(std::span<const Token> tokens, int bracket_types);

struct DyckSample {
  std::vector<Token> tokens;  ///< BOS ... EOS
  std::string structure;
  std::vector<int> prefix_depths;
  std::vector<int> token_depths;
  std::vector<int> match_index;

  std::size_t length() const { return tokens.size(); }
  int max_depth() const;
};

DyckSample annotate(std::vector<Token> tokens, int bracket_types);

/// Largest j <= position holding an opener, not closed before `position`,
/// whose prefix depth equals the token depth at `position`. An opener query
/// returns itself and a closer query returns its opener; nullopt at depth 0.
std::optional<std::size_t> most_recent_unmatched_opener(std::span<const Token> tokens,
                                                        std::size_t position,
                                                        int bracket_types);

struct LegalNext {
  /// The closer matching the top-of-stack opener; empty at depth 0.
  std::optional<Token> closer;
  /// Openers, present when depth < m and the length budget allows one more pair.
  std::vector<Token> openers;
  /// EOS is legal exactly at depth 0.
  bool eos = false;
};

/// Legal continuations of a prefix (BOS optional at the front).
LegalNext legal_next(const DyckSpec& spec, std::span<const Token> prefix);

/// Draws one sentence:
///   depth 0, nonempty  -> stop with probability 0.25, otherwise open;
///   remaining == depth -> forced close;
///   depth < m          -> open with probability 0.5, else close;
///   depth == m         -> close.
/// Opening types are uniform over k.
DyckSample sample_sentence(const DyckSpec& spec, Rng& rng);

/// Closer positions i with i - match_index[i] >= min_distance.
std::vector<std::size_t> closing_eval_positions(const DyckSample& sample,
                                                int min_distance = 10);

/// Printable form: "()[]{}<>" characters for k <= 4, otherwise space-separated
/// "(t" / "t)" symbols. BOS/EOS are omitted.
std::string render(std::span<const Token> tokens, int bracket_types);

/// Inverse of render() for the character alphabet (k <= 4). Returns brackets
/// only, without BOS/EOS.
std::vector<Token> parse_brackets(std::string_view text);

/// BOS + parse_brackets(text) + EOS.
std::vector<Token> parse_sentence(std::string_view text, int bracket_types);

}  // namespace proxylab::dyck
