#include "proxylab/dyck/dyck.hpp"

#include <algorithm>

namespace proxylab::dyck {
namespace {

constexpr std::string_view kAlphabet = "()[]{}<>";

}  // namespace

void DyckSpec::validate() const {
  if (bracket_types < 1) throw std::invalid_argument("dyck spec: bracket_types must be >= 1");
  if (max_depth < 1) throw std::invalid_argument("dyck spec: max_depth must be >= 1");
  if (max_len < 4) throw std::invalid_argument("dyck spec: max_len must be >= 4");
}

DepthInfo depths_and_matches(std::span<const Token> tokens, int k) {
  const std::size_t n = tokens.size();
  DepthInfo info;
  info.prefix_depths.assign(n, 0);
  info.token_depths.assign(n, 0);
  info.match_index.assign(n, -1);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    const Token t = tokens[i];
    if (is_opener(t, k)) {
      stack.push_back(i);
      info.prefix_depths[i] = static_cast<int>(stack.size());
      info.token_depths[i] = info.prefix_depths[i];
    } else if (is_closer(t, k)) {
      if (stack.empty()) throw UnbalancedError(i, "closer without an opener");
      const std::size_t j = stack.back();
      if (tokens[j] + 1 != t) throw UnbalancedError(i, "closer does not match its opener");
      stack.pop_back();
      info.prefix_depths[i] = static_cast<int>(stack.size());
      info.token_depths[i] = info.token_depths[j];
      info.match_index[i] = static_cast<int>(j);
      info.match_index[j] = static_cast<int>(i);
    } else {
      info.prefix_depths[i] = static_cast<int>(stack.size());
    }
  }
  if (!stack.empty()) throw UnbalancedError(stack.back(), "unclosed opener");
  return info;
}

std::string structure_of(std::span<const Token> tokens, int k) {
  std::string out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token t = tokens[i];
    if (is_opener(t, k)) {
      out.push_back('O');
    } else if (is_closer(t, k)) {
      out.push_back('C');
    } else if ((t == kBos && i == 0) || (t == 2 * k + 1 && i + 1 == tokens.size())) {
      continue;
    } else {
      throw std::invalid_argument("structure_of: non-bracket token " + std::to_string(t) +
                                  " at position " + std::to_string(i));
    }
  }
  return out;
}

int DyckSample::max_depth() const {
  return prefix_depths.empty() ? 0 : *std::max_element(prefix_depths.begin(), prefix_depths.end());
}

DyckSample annotate(std::vector<Token> tokens, int k) {
  DyckSample s;
  s.structure = structure_of(tokens, k);
  DepthInfo info = depths_and_matches(tokens, k);
  s.tokens = std::move(tokens);
  s.prefix_depths = std::move(info.prefix_depths);
  s.token_depths = std::move(info.token_depths);
  s.match_index = std::move(info.match_index);
  return s;
}

std::optional<std::size_t> most_recent_unmatched_opener(std::span<const Token> tokens,
                                                        std::size_t position, int k) {
  if (position >= tokens.size()) throw std::out_of_range("position outside sequence");
  // Openers still open just before `position`, plus the query itself when it
  // is an opener. A closer's token depth is that of the stack top it pops.
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < position; ++i) {
    if (is_opener(tokens[i], k)) {
      stack.push_back(i);
    } else if (is_closer(tokens[i], k) && !stack.empty()) {
      stack.pop_back();
    }
  }
  const Token q = tokens[position];
  if (is_opener(q, k)) return position;
  if (is_closer(q, k) && !stack.empty()) return stack.back();
  return std::nullopt;
}

LegalNext legal_next(const DyckSpec& spec, std::span<const Token> prefix) {
  const int k = spec.bracket_types;
  std::vector<Token> stack;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    const Token t = prefix[i];
    if (i == 0 && t == kBos) continue;
    if (is_opener(t, k)) {
      stack.push_back(t);
    } else if (is_closer(t, k)) {
      if (stack.empty() || stack.back() + 1 != t) {
        throw UnbalancedError(i, "invalid prefix");
      }
      stack.pop_back();
    } else {
      throw UnbalancedError(i, "non-bracket token in prefix");
    }
  }
  if (static_cast<int>(stack.size()) > spec.max_depth) {
    throw UnbalancedError(prefix.size(), "prefix exceeds the maximum depth");
  }
  LegalNext next;
  const int depth = static_cast<int>(stack.size());
  if (depth > 0) next.closer = stack.back() + 1;
  next.eos = depth == 0;
  // Current tokens, counting BOS even when the caller omitted it.
  const bool has_bos = !prefix.empty() && prefix.front() == kBos;
  const int used = static_cast<int>(prefix.size()) + (has_bos ? 0 : 1);
  // One more opener needs room for itself, depth+1 closers and EOS.
  if (depth < spec.max_depth && used + 1 + (depth + 1) + 1 <= spec.max_len) {
    for (int type = 1; type <= k; ++type) next.openers.push_back(opener_of_type(type));
  }
  return next;
}

DyckSample sample_sentence(const DyckSpec& spec, Rng& rng) {
  spec.validate();
  const int k = spec.bracket_types;
  const int budget = spec.max_len - 2;
  std::vector<Token> tokens{kBos};
  std::vector<Token> stack;
  int used = 0;
  auto open = [&] {
    const Token t = opener_of_type(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
    tokens.push_back(t);
    stack.push_back(t);
    ++used;
  };
  auto close = [&] {
    tokens.push_back(stack.back() + 1);
    stack.pop_back();
    ++used;
  };
  while (true) {
    const int depth = static_cast<int>(stack.size());
    const int remaining = budget - used;
    if (depth == 0) {
      if (used > 0 && rng.bernoulli(0.25)) break;
      if (remaining < 2) break;
      open();
      continue;
    }
    if (remaining <= depth) {
      close();
      continue;
    }
    const bool can_open = depth < spec.max_depth && remaining >= depth + 2;
    if (can_open && rng.bernoulli(0.5)) {
      open();
    } else {
      close();
    }
  }
  tokens.push_back(spec.eos());
  return annotate(std::move(tokens), k);
}

std::vector<std::size_t> closing_eval_positions(const DyckSample& sample, int min_distance) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
    const int j = sample.match_index[i];
    if (j < 0 || static_cast<std::size_t>(j) > i) continue;
    if (static_cast<int>(i) - j >= min_distance) out.push_back(i);
  }
  return out;
}

std::string render(std::span<const Token> tokens, int k) {
  std::string out;
  const bool chars = k <= 4;
  for (Token t : tokens) {
    if (!is_bracket(t, k)) continue;
    if (chars) {
      out.push_back(kAlphabet[static_cast<std::size_t>(t - 1)]);
      continue;
    }
    if (!out.empty()) out.push_back(' ');
    const std::string type = std::to_string(bracket_type(t));
    out += is_opener(t, k) ? "(" + type : type + ")";
  }
  return out;
}

std::vector<Token> parse_brackets(std::string_view text) {
  std::vector<Token> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == ' ') continue;
    const auto pos = kAlphabet.find(c);
    if (pos == std::string_view::npos) {
      throw std::invalid_argument("parse_brackets: unexpected character '" +
                                  std::string(1, c) + "' at " + std::to_string(i));
    }
    out.push_back(static_cast<Token>(pos + 1));
  }
  return out;
}

std::vector<Token> parse_sentence(std::string_view text, int k) {
  std::vector<Token> brackets = parse_brackets(text);
  for (Token t : brackets) {
    if (!is_bracket(t, k)) {
      throw std::invalid_argument("parse_sentence: bracket type outside the vocabulary");
    }
  }
  std::vector<Token> out{kBos};
  out.insert(out.end(), brackets.begin(), brackets.end());
  out.push_back(2 * k + 1);
  return out;
}

}  // namespace proxylab::dyck
