#include "proxylab/code/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "java_keywords.hpp"
#include "proxylab/numerics/rng.hpp"

namespace proxylab::code {
namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool is_space(char32_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

bool is_alnum(char32_t c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

Token CharVocab::id(char32_t c) {
  if (c >= 0x20 && c <= 0x7E) return static_cast<Token>(c - 0x20 + 1);
  return kUnknown;
}

char32_t CharVocab::character(Token id) {
  if (id >= 1 && id <= 95) return static_cast<char32_t>(id - 1 + 0x20);
  if (id == kUnknown) return kReplacement;
  throw std::invalid_argument("character: id " + std::to_string(id) + " is not a character");
}

std::vector<Token> CharVocab::encode(std::u32string_view text) {
  std::vector<Token> out;
  out.reserve(text.size() + 2);
  out.push_back(kBos);
  for (char32_t c : text) out.push_back(id(c));
  out.push_back(kEos);
  return out;
}

std::vector<Token> CharVocab::encode_utf8(std::string_view text) { return encode(decode_utf8(text)); }

std::u32string CharVocab::decode(std::span<const Token> ids) {
  std::u32string out;
  for (Token t : ids) {
    if (t == kBos || t == kEos) continue;
    out.push_back(character(t));
  }
  return out;
}

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + static_cast<std::size_t>(len) <= s.size();
    for (int k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range values are malformed.
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (ok && (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  for (char32_t c : text) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

std::vector<int> bracket_depths(std::u32string_view text) {
  std::vector<int> out(text.size());
  int depth = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char32_t c = text[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    out[i] = depth;
  }
  return out;
}

const char* to_string(Category c) {
  switch (c) {
    case Category::Whitespace: return "Whitespace";
    case Category::Keyword: return "Keyword";
    case Category::NewWord: return "NewWord";
    case Category::RepeatedWord: return "RepeatedWord";
    case Category::CloseBracket: return "CloseBracket";
    case Category::Other: return "Other";
  }
  return "Other";
}

const std::vector<Category>& all_categories() {
  static const std::vector<Category> all{Category::Whitespace,   Category::Keyword,
                                         Category::NewWord,      Category::RepeatedWord,
                                         Category::CloseBracket, Category::Other};
  return all;
}

KeywordSet load_keywords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open keyword file " + path.string());
  KeywordSet out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

const KeywordSet& java_keywords() {
  static const KeywordSet set = [] {
    KeywordSet out;
    std::istringstream in(kJavaKeywords);
    std::string word;
    while (in >> word) out.insert(word);
    return out;
  }();
  return set;
}

std::vector<Category> categorize_characters(std::u32string_view text, const KeywordSet& keywords) {
  std::vector<Category> out(text.size(), Category::Other);
  std::set<std::string, std::less<>> seen;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t c = text[i];
    if (is_space(c)) {
      out[i++] = Category::Whitespace;
    } else if (c == ')' || c == '}' || c == ']') {
      out[i++] = Category::CloseBracket;
    } else if (is_alnum(c)) {
      std::size_t j = i;
      std::string word;
      while (j < text.size() && is_alnum(text[j])) word.push_back(static_cast<char>(text[j++]));
      Category label = Category::NewWord;
      if (keywords.count(word)) {
        label = Category::Keyword;
      } else if (seen.count(word)) {
        label = Category::RepeatedWord;
      }
      seen.insert(word);
      std::fill(out.begin() + static_cast<std::ptrdiff_t>(i), out.begin() + static_cast<std::ptrdiff_t>(j), label);
      i = j;
    } else {
      out[i++] = Category::Other;
    }
  }
  return out;
}

CodeFunction make_function(std::string language, std::u32string text, const KeywordSet& keywords) {
  CodeFunction f;
  f.language = std::move(language);
  f.depths = bracket_depths(text);
  for (std::size_t i = 0; i < f.depths.size(); ++i) {
    if (f.depths[i] < 0) {
      throw std::invalid_argument("negative bracket depth at character " + std::to_string(i));
    }
  }
  f.max_depth = f.depths.empty() ? 0 : *std::max_element(f.depths.begin(), f.depths.end());
  f.labels = categorize_characters(text, keywords);
  f.text = std::move(text);
  return f;
}

double CodeSplit::mean_length() const {
  if (functions.empty()) return 0.0;
  double total = 0.0;
  for (const auto& f : functions) total += static_cast<double>(f.text.size());
  return total / static_cast<double>(functions.size());
}

const CodeSplit& CodeCorpus::get(const std::string& name) const {
  for (const auto& s : splits) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("corpus has no split '" + name + "'");
}

bool CodeCorpus::has(const std::string& name) const {
  return std::any_of(splits.begin(), splits.end(), [&](const CodeSplit& s) { return s.name == name; });
}

CodeCorpus ingest(std::istream& in, const IngestOptions& options, const KeywordSet& keywords) {
  const std::string train_language = lower(options.train_language);
  std::set<std::string> allowed;
  for (const auto& l : options.languages) allowed.insert(lower(l));
  for (const char* reserved : {kCodeTrain, kCodeHeldout, kCodeUnseenDepth}) {
    if (allowed.count(reserved)) throw std::invalid_argument(std::string("language tag collides with split '") + reserved + "'");
  }
  Rng coin(derive_seed(options.seed, "heldout"));
  CodeCorpus corpus;
  CodeSplit train{kCodeTrain, {}}, heldout{kCodeHeldout, {}}, deep{kCodeUnseenDepth, {}};
  std::map<std::string, CodeSplit> others;
  auto skip = [&](const char* why) { corpus.report.skipped[why] += 1; };
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    corpus.report.records += 1;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      skip("malformed_json");
      continue;
    }
    const auto lang_it = j.find("language");
    const auto code_it = j.find("code");
    if (lang_it == j.end() || code_it == j.end() || !lang_it->is_string() || !code_it->is_string()) {
      skip("missing_fields");
      continue;
    }
    const std::string lang = lower(lang_it->get<std::string>());
    const bool is_train = lang == train_language;
    if (!is_train && !allowed.empty() && !allowed.count(lang)) {
      skip("language_filtered");
      continue;
    }
    std::u32string text = decode_utf8(code_it->get<std::string>());
    if (text.size() > options.max_len) {
      skip("too_long");
      continue;
    }
    CodeFunction f;
    try {
      f = make_function(lang, std::move(text), keywords);
    } catch (const std::invalid_argument&) {
      skip("negative_depth");
      continue;
    }
    const bool shallow = f.max_depth <= options.max_depth;
    if (is_train) {
      if (!shallow) {
        deep.functions.push_back(std::move(f));
      } else if (coin.bernoulli(options.holdout_fraction)) {
        heldout.functions.push_back(std::move(f));
      } else {
        train.functions.push_back(std::move(f));
      }
    } else if (shallow) {
      auto& split = others[lang];
      split.name = lang;
      split.functions.push_back(std::move(f));
    } else {
      skip("deep_other_language");
    }
  }
  corpus.splits.push_back(std::move(train));
  corpus.splits.push_back(std::move(heldout));
  corpus.splits.push_back(std::move(deep));
  for (auto& [_, s] : others) corpus.splits.push_back(std::move(s));
  return corpus;
}

CodeCorpus ingest_file(const std::filesystem::path& path, const IngestOptions& options,
                       const KeywordSet& keywords) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file " + path.string());
  return ingest(in, options, keywords);
}

void write_split_summary(std::ostream& out, const CodeCorpus& corpus) {
  out << "split,functions,mean_length\n";
  for (const auto& s : corpus.splits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", s.mean_length());
    out << s.name << ',' << s.functions.size() << ',' << buf << '\n';
  }
}

std::vector<std::vector<Token>> token_sequences(const CodeSplit& split) {
  std::vector<std::vector<Token>> out;
  out.reserve(split.functions.size());
  for (const auto& f : split.functions) out.push_back(f.tokens());
  return out;
}

void write_split_ndjson(const std::filesystem::path& path, const CodeSplit& split) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& f : split.functions) {
    out << nlohmann::json{{"language", f.language}, {"code", encode_utf8(f.text)}}.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

CodeSplit read_split_ndjson(const std::filesystem::path& path, std::string name,
                            const KeywordSet& keywords) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CodeSplit split{std::move(name), {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      split.functions.push_back(make_function(j.at("language").get<std::string>(),
                                              decode_utf8(j.at("code").get<std::string>()), keywords));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return split;
}

}  // namespace proxylab::code
