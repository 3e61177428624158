#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "proxylab/model/transformer.hpp"

namespace proxylab::code {

using model::Token;

/// Printable ASCII 0x20..0x7E as ids 1..95; BOS = 0, UNKNOWN = 96, EOS = 97.
class CharVocab {
 public:
  static constexpr Token kBos = 0;
  static constexpr Token kUnknown = 96;
  static constexpr Token kEos = 97;
  static constexpr int kSize = 98;

  static Token id(char32_t c);
  /// Printable character of an id; U+FFFD for UNKNOWN. Throws on BOS/EOS.
  static char32_t character(Token id);

  /// BOS + one id per code point + EOS.
  static std::vector<Token> encode(std::u32string_view text);
  static std::vector<Token> encode_utf8(std::string_view text);
  /// Inverse of encode(); BOS/EOS are dropped.
  static std::u32string decode(std::span<const Token> ids);
};

/// Code points of UTF-8 text. Each byte of a malformed sequence becomes one
/// U+FFFD.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);

/// Running depth over (), {}, [] after each character (an opener counts
/// itself, as with Dyck prefix depths). Types are not matched.
std::vector<int> bracket_depths(std::u32string_view text);

enum class Category { Whitespace, Keyword, NewWord, RepeatedWord, CloseBracket, Other };
inline constexpr int kCategoryCount = 6;
const char* to_string(Category c);
const std::vector<Category>& all_categories();

using KeywordSet = std::set<std::string, std::less<>>;

/// One word per line; blank lines ignored.
KeywordSet load_keywords(const std::filesystem::path& path);
/// The bundled Java keyword list (plus true/false/null).
const KeywordSet& java_keywords();

/// Label per code point: whitespace, then closing brackets, then whole
/// ASCII-alphanumeric runs (Keyword, else RepeatedWord when the same run
/// occurred earlier, else NewWord); everything else is Other.
std::vector<Category> categorize_characters(std::u32string_view text, const KeywordSet& keywords);

struct CodeFunction {
  std::string language;
  std::u32string text;
  std::vector<int> depths;
  std::vector<Category> labels;
  int max_depth = 0;

  std::vector<Token> tokens() const { return CharVocab::encode(text); }
};

/// Annotates one function; throws std::invalid_argument on negative depth.
CodeFunction make_function(std::string language, std::u32string text, const KeywordSet& keywords);

struct IngestOptions {
  std::string train_language = "java";
  int max_depth = 3;
  std::size_t max_len = 512;
  /// Share of shallow train-language functions held out for in-domain eval.
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
  /// When nonempty, other languages not listed here are dropped.
  std::vector<std::string> languages;
};

inline constexpr const char* kCodeTrain = "train";
inline constexpr const char* kCodeHeldout = "heldout";
inline constexpr const char* kCodeUnseenDepth = "unseen_depth";

struct CodeSplit {
  std::string name;
  std::vector<CodeFunction> functions;

  double mean_length() const;
};

struct IngestReport {
  std::size_t records = 0;
  /// Reason -> count: malformed_json, missing_fields, too_long,
  /// negative_depth, language_filtered, deep_other_language.
  std::map<std::string, std::size_t> skipped;
};

struct CodeCorpus {
  std::vector<CodeSplit> splits;  ///< train, heldout, unseen_depth, then languages A-Z
  IngestReport report;

  const CodeSplit& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

/// Routes NDJSON records {"language", "code"}: shallow train-language
/// functions to train/heldout (seeded coin per retained record, in input
/// order), deep ones to unseen_depth, shallow other languages to a split
/// named after the language. Over-long and negative-depth functions are
/// dropped everywhere. Language tags are compared lowercased.
CodeCorpus ingest(std::istream& ndjson, const IngestOptions& options, const KeywordSet& keywords);
CodeCorpus ingest_file(const std::filesystem::path& path, const IngestOptions& options,
                       const KeywordSet& keywords);

/// split,functions,mean_length
void write_split_summary(std::ostream& out, const CodeCorpus& corpus);

std::vector<std::vector<Token>> token_sequences(const CodeSplit& split);

/// One {"language", "code"} record per function.
void write_split_ndjson(const std::filesystem::path& path, const CodeSplit& split);
/// Reads a split written by write_split_ndjson; malformed records throw with file:line.
CodeSplit read_split_ndjson(const std::filesystem::path& path, std::string name,
                            const KeywordSet& keywords);

}  // namespace proxylab::code
