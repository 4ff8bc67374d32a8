#include "synthpar/mock.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <regex>

#include "synthpar/hashing.hpp"
#include "synthpar/text.hpp"

namespace synthpar::mock {

namespace {

constexpr std::size_t kFunctionWords = 40;
constexpr std::size_t kContentWords = 2400;

struct Inventory {
  std::vector<std::u32string> onsets;
  std::vector<std::u32string> nuclei;
  std::vector<std::u32string> codas;  // may contain empty
  std::string terminator = ".";
  bool cased = true;
};

std::vector<std::u32string> pick(Rng& rng, const std::vector<std::u32string>& from, std::size_t k) {
  std::vector<std::u32string> out;
  for (auto i : rng.sample_without_replacement(from.size(), std::min(k, from.size()))) {
    out.push_back(from[i]);
  }
  return out;
}

std::vector<std::u32string> singles(std::u32string_view chars) {
  std::vector<std::u32string> out;
  for (char32_t c : chars) out.emplace_back(1, c);
  return out;
}

std::vector<std::u32string> range(char32_t first, char32_t last) {
  std::vector<std::u32string> out;
  for (char32_t c = first; c <= last; ++c) out.emplace_back(1, c);
  return out;
}

Inventory inventory_for(const LangCode& lang, Rng& rng) {
  Inventory inv;
  const auto script = lang.script();
  if (script == "Deva") {
    inv.onsets = pick(rng, range(U'क', U'ह'), 16);
    inv.nuclei = pick(rng, singles(U"ािीुूेैोौ"), 6);
    inv.nuclei.emplace_back();
    inv.codas = {U"", U"", U"ं"};
    inv.terminator = "।";
    inv.cased = false;
  } else if (script == "Arab") {
    inv.onsets = pick(rng, singles(U"بتثجحخدذرزسشصضطظعغفقكلمنهوي"), 16);
    inv.nuclei = {U"ا", U"و", U"ي", U""};
    inv.codas = pick(rng, singles(U"بدرسلمنت"), 4);
    inv.codas.emplace_back();
    inv.cased = false;
  } else if (script == "Cyrl") {
    inv.onsets = pick(rng, singles(U"бвгджзклмнпрстфхцчшщ"), 12);
    inv.nuclei = pick(rng, singles(U"аеиоуыэюя"), 5);
    inv.codas = pick(rng, singles(U"йнмсл"), 2);
    inv.codas.emplace_back();
  } else if (script == "Ethi") {
    // Ge'ez syllables: row r, vowel order v -> U+1200 + 8r + v.
    std::vector<std::u32string> syllables;
    for (char32_t row = 0; row < 32; ++row) {
      for (char32_t v = 0; v < 7; ++v) syllables.emplace_back(1, U'ሀ' + 8 * row + v);
    }
    inv.onsets = pick(rng, syllables, 40);
    inv.nuclei = {U""};
    inv.codas = {U""};
    inv.cased = false;
  } else {
    inv.onsets = pick(rng, singles(U"bcdfghjklmnprstvwyz"), 11);
    static const std::vector<std::u32string> digraphs = {U"sh", U"ch", U"ng", U"kw", U"ts", U"th", U"gb", U"ny"};
    for (auto& d : pick(rng, digraphs, 2)) inv.onsets.push_back(d);
    inv.nuclei = pick(rng, singles(U"aeiou"), 3 + rng.below(3));
    static const std::vector<std::u32string> long_vowels = {U"aa", U"ee", U"ii", U"oo", U"uu", U"ai", U"au"};
    for (auto& d : pick(rng, long_vowels, 2)) inv.nuclei.push_back(d);
    inv.codas = pick(rng, singles(U"nmrlsktx"), 2);
    inv.codas.emplace_back();
    inv.codas.emplace_back();
  }
  return inv;
}

std::string make_word(Rng& rng, const Inventory& inv, std::size_t syllables) {
  std::u32string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += inv.onsets[rng.below(inv.onsets.size())];
    w += inv.nuclei[rng.below(inv.nuclei.size())];
  }
  w += inv.codas[rng.below(inv.codas.size())];
  return text::encode_utf8(w);
}

char rot13(char c) {
  if (c >= 'a' && c <= 'z') return static_cast<char>('a' + (c - 'a' + 13) % 26);
  if (c >= 'A' && c <= 'Z') return static_cast<char>('A' + (c - 'A' + 13) % 26);
  return c;
}

std::string rot13(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = rot13(c);
  return out;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

/// Returns (src name, tgt name, sentence) when the prompt ends with an
/// uncompleted zero-shot MT block.
std::optional<std::tuple<std::string, std::string, std::string>> parse_mt_prompt(std::string_view prompt) {
  auto lines = split_lines(prompt);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 3) return std::nullopt;
  const auto header = lines[lines.size() - 3];
  const auto source_line = lines[lines.size() - 2];
  const auto cue = lines[lines.size() - 1];
  constexpr std::string_view prefix = "Translate this from ";
  if (header.substr(0, prefix.size()) != prefix || header.empty() || header.back() != ':') {
    return std::nullopt;
  }
  const auto body = header.substr(prefix.size(), header.size() - prefix.size() - 1);
  const auto to = body.rfind(" to ");
  if (to == std::string_view::npos) return std::nullopt;
  std::string src(body.substr(0, to));
  std::string tgt(body.substr(to + 4));
  const std::string src_prefix = src + ": ";
  if (source_line.substr(0, src_prefix.size()) != src_prefix) return std::nullopt;
  if (cue != tgt + ":") return std::nullopt;
  return std::make_tuple(src, tgt, std::string(source_line.substr(src_prefix.size())));
}

}  // namespace

Vocabulary::Vocabulary(const LangCode& lang) : lang_(lang) {
  Rng rng(hash128("mock-vocabulary\x1f" + lang.str()).hi);
  const auto inv = inventory_for(lang, rng);
  terminator_ = inv.terminator;
  cased_ = inv.cased;
  std::map<std::string, bool> seen;
  while (function_words_.size() < kFunctionWords) {
    auto w = make_word(rng, inv, 1);
    if (seen.emplace(w, true).second) function_words_.push_back(std::move(w));
  }
  std::size_t guard = 0;
  while (words_.size() < kContentWords && guard++ < kContentWords * 20) {
    auto w = make_word(rng, inv, 2 + rng.below(2));
    if (seen.emplace(w, true).second) words_.push_back(std::move(w));
  }
}

std::string Vocabulary::sentence(Rng& rng) const {
  const auto length = 5 + rng.below(12);
  std::string out;
  for (std::uint64_t i = 0; i < length; ++i) {
    const bool function = rng.uniform() < 0.35;
    const auto& word = function ? function_words_[rng.below(function_words_.size())]
                                : words_[rng.below(words_.size())];
    if (i > 0) out += ' ';
    if (i == 0 && cased_) {
      auto cps = text::decode_utf8(word);
      cps[0] = text::to_upper(cps[0]);
      out += text::encode_utf8(std::u32string(cps.begin(), cps.end()));
    } else {
      out += word;
    }
  }
  out += terminator_;
  return out;
}

std::string Vocabulary::paragraph(Rng& rng) const {
  const auto n = 4 + rng.below(6);
  std::string out;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += sentence(rng);
  }
  return out;
}

const Vocabulary& vocabulary(const LangCode& lang) {
  static std::mutex mu;
  static std::map<LangCode, std::unique_ptr<Vocabulary>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[lang];
  if (!slot) slot = std::make_unique<Vocabulary>(lang);
  return *slot;
}

std::string translate(std::string_view text, std::string_view src_label, std::string_view tgt_label,
                      std::string_view model) {
  std::string out = "[";
  out += model;
  out += ':';
  out += src_label;
  out += '>';
  out += tgt_label;
  out += "] ";
  out += rot13(text);
  return out;
}

std::optional<std::string> untranslate(std::string_view text) {
  if (text.empty() || text.front() != '[') return std::nullopt;
  const auto close = text.find("] ");
  if (close == std::string_view::npos) return std::nullopt;
  return rot13(text.substr(close + 2));
}

std::string complete(std::string_view prompt, std::uint64_t seed, std::string_view model) {
  if (const auto mt = parse_mt_prompt(prompt)) {
    const auto& [src, tgt, sentence] = *mt;
    return translate(sentence, src, tgt, model);
  }
  static const std::regex code_re("[a-z]{3}_[A-Z][a-z]{3}");
  std::match_results<std::string_view::const_iterator> m;
  LangCode lang("und_Latn");
  if (std::regex_search(prompt.begin(), prompt.end(), m, code_re)) lang = LangCode(m.str());

  std::string key = std::to_string(seed);
  key += '\x1f';
  key += prompt;
  key += '\x1f';
  key += model;
  Rng rng(hash128(key).hi);
  return vocabulary(lang).paragraph(rng);
}

}  // namespace synthpar::mock
