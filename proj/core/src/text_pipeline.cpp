#include "synthpar/text_pipeline.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "synthpar/hashing.hpp"
#include "synthpar/hooks.hpp"
#include "synthpar/text.hpp"

namespace synthpar {

// ---- Sentence splitting ---------------------------------------------------

void SplitterRules::validate() const {
  if (terminators.empty()) throw ConfigError("splitter needs at least one terminator");
  if (min_tokens < 1) throw ConfigError("min sentence length must be >= 1");
  if (max_tokens < min_tokens) throw ConfigError("max sentence length below min");
}

bool SplitterRules::is_abbreviation(const LangCode& lang, const std::string& token) const {
  for (const std::string& key : {lang.str(), std::string("*")}) {
    const auto it = abbreviations.find(key);
    if (it != abbreviations.end() && it->second.contains(token)) return true;
  }
  return false;
}

SplitterRules SplitterRules::defaults() {
  SplitterRules r;
  r.abbreviations["*"] = {"Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "St.", "Jr.", "Sr.", "vs.", "etc.",
                          "e.g.", "i.e.", "No.", "Mt.", "Gen.", "Gov.", "Sen.", "Rev.", "Inc.", "Ltd."};
  return r;
}

namespace {

bool is_closing(char32_t c) {
  const auto gc = u_charType(static_cast<UChar32>(c));
  return gc == U_END_PUNCTUATION || gc == U_FINAL_PUNCTUATION || c == U'"' || c == U'\'';
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view paragraph, const SplitterRules& rules,
                                         const LangCode& lang) {
  const auto cps = text::decode_utf8(paragraph);
  const auto n = cps.size();
  const auto is_term = [&](char32_t c) {
    return std::find(rules.terminators.begin(), rules.terminators.end(), c) != rules.terminators.end();
  };

  std::vector<std::string> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    auto s = text::trim(text::encode_utf8(std::u32string_view(cps.data() + b, e - b)));
    if (!s.empty()) out.push_back(std::move(s));
  };

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < n) {
    if (!is_term(cps[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && (is_term(cps[j]) || is_closing(cps[j]))) ++j;
    if (j >= n || !text::is_whitespace(cps[j])) {
      i = j;
      continue;
    }
    std::size_t k = j;
    while (k < n && text::is_whitespace(cps[k])) ++k;
    if (k >= n) break;
    const bool boundary_char = text::is_uppercase(cps[k]) || !text::is_cased(cps[k]);
    // Word ending at the terminator, e.g. "Dr.".
    std::size_t w = i;
    while (w > start && !text::is_whitespace(cps[w - 1])) --w;
    const auto word = text::encode_utf8(std::u32string_view(cps.data() + w, i + 1 - w));
    if (boundary_char && !rules.is_abbreviation(lang, word)) {
      emit(start, j);
      start = k;
    }
    i = k;
  }
  if (start < n) emit(start, n);
  return out;
}

// ---- Language identification ----------------------------------------------

LangVerdict LangClassifier::classify(std::string_view sentence) const {
  const std::string s(sentence);
  return classify_batch(std::span<const std::string>(&s, 1)).front();
}

std::vector<std::string> langid_features(std::string_view sentence) {
  const auto lowered = text::decode_utf8(text::to_lower(text::nfc(sentence)));
  std::vector<std::string> features;
  std::u32string word;
  auto flush = [&] {
    if (word.empty()) return;
    std::u32string padded = U" " + word + U" ";
    for (std::size_t len = 1; len <= 3; ++len) {
      for (std::size_t b = 0; b + len <= padded.size(); ++b) {
        if (len == 1 && padded[b] == U' ') continue;
        features.push_back(text::encode_utf8(std::u32string_view(padded.data() + b, len)));
      }
    }
    word.clear();
  };
  for (char32_t c : lowered) {
    if (text::is_letter_or_mark(c)) {
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return features;
}

NgramLangId NgramLangId::train(const std::map<LangCode, std::vector<std::string>>& seeds,
                               double smoothing) {
  if (seeds.empty()) throw TrainingError("language ID needs at least one language");
  if (!(smoothing > 0.0)) throw TrainingError("smoothing constant must be positive");
  NgramLangId model;
  model.smoothing_ = smoothing;
  for (const auto& [lang, texts] : seeds) {
    if (texts.empty()) throw TrainingError("no seed sentences for " + lang.str());
    model.langs_.push_back(lang);
  }
  const auto n_langs = model.langs_.size();
  std::vector<double> totals(n_langs, 0.0);
  std::size_t li = 0;
  for (const auto& [lang, texts] : seeds) {
    for (const auto& t : texts) {
      for (auto& f : langid_features(t)) {
        auto& counts = model.counts_[f];
        if (counts.empty()) counts.assign(n_langs, 0);
        ++counts[li];
        totals[li] += 1.0;
      }
    }
    ++li;
  }
  const double vocab = static_cast<double>(model.counts_.size() + 1);
  model.log_prior_.assign(n_langs, -std::log(static_cast<double>(n_langs)));
  for (std::size_t l = 0; l < n_langs; ++l) {
    model.log_denominator_.push_back(std::log(totals[l] + smoothing * vocab));
  }
  return model;
}

LangVerdict NgramLangId::classify_one(std::string_view sentence) const {
  if (text::trim(sentence).empty()) throw UndefinedInputError("cannot classify an empty sentence");
  const auto n_langs = langs_.size();
  std::vector<double> score = log_prior_;
  const auto features = langid_features(sentence);
  for (const auto& f : features) {
    const auto it = counts_.find(f);
    for (std::size_t l = 0; l < n_langs; ++l) {
      const double c = it == counts_.end() ? 0.0 : static_cast<double>(it->second[l]);
      score[l] += std::log(c + smoothing_) - log_denominator_[l];
    }
  }
  std::size_t best = 0;
  for (std::size_t l = 1; l < n_langs; ++l) {
    if (score[l] > score[best]) best = l;
  }
  double z = 0.0;
  for (std::size_t l = 0; l < n_langs; ++l) z += std::exp(score[l] - score[best]);
  LangVerdict v;
  v.label = langs_[best];
  v.confidence = 1.0 / z;
  v.low_confidence = features.empty() && n_langs > 1;
  return v;
}

std::vector<LangVerdict> NgramLangId::classify_batch(std::span<const std::string> sentences) const {
  std::vector<LangVerdict> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(classify_one(s));
  return out;
}

std::vector<LangVerdict> ExternalLangId::classify_batch(std::span<const std::string> sentences) const {
  std::vector<std::string> lines;
  lines.reserve(sentences.size());
  for (const auto& s : sentences) lines.push_back(protocol_field(s));
  const auto result = run_line_hook(command_, lines);
  if (result.exit_code != 0) {
    throw IntegrationError("language ID hook exited with status " + std::to_string(result.exit_code));
  }
  if (result.lines.size() != sentences.size()) {
    throw IntegrationError("language ID hook returned " + std::to_string(result.lines.size()) +
                           " lines for " + std::to_string(sentences.size()) + " sentences");
  }
  std::vector<LangVerdict> out;
  out.reserve(sentences.size());
  for (const auto& line : result.lines) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IntegrationError("language ID hook line lacks a tab: " + line);
    LangVerdict v;
    try {
      v.label = LangCode(line.substr(0, tab));
      v.confidence = std::stod(line.substr(tab + 1));
    } catch (const std::exception& e) {
      throw IntegrationError("bad language ID hook line '" + line + "': " + e.what());
    }
    if (v.confidence < 0.0 || v.confidence > 1.0) {
      throw IntegrationError("language ID confidence out of [0,1]: " + line);
    }
    out.push_back(std::move(v));
  }
  return out;
}

// ---- Decontamination ------------------------------------------------------

std::uint64_t NgramBlocklist::default_hash(std::string_view s) { return fnv1a64(s); }

NgramBlocklist::NgramBlocklist(NgramBlocklist&& other) noexcept
    : hasher_(other.hasher_),
      entries_(std::move(other.entries_)),
      size_(other.size_),
      rejected_collisions_(other.rejected_collisions_.load()) {}

NgramBlocklist& NgramBlocklist::operator=(NgramBlocklist&& other) noexcept {
  hasher_ = other.hasher_;
  entries_ = std::move(other.entries_);
  size_ = other.size_;
  rejected_collisions_ = other.rejected_collisions_.load();
  return *this;
}

std::vector<std::string> word_ngrams(std::span<const std::string> words, std::size_t n) {
  std::vector<std::string> out;
  if (n == 0 || words.size() < n) return out;
  out.reserve(words.size() - n + 1);
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string g = words[i];
    for (std::size_t k = 1; k < n; ++k) {
      g += ' ';
      g += words[i + k];
    }
    out.push_back(std::move(g));
  }
  return out;
}

void NgramBlocklist::add_text(std::string_view text) {
  const auto words = text::normalize_words(text);
  for (auto& g : word_ngrams(words, kOrder)) {
    auto& bucket = entries_[hasher_(g)];
    if (std::find(bucket.begin(), bucket.end(), g) == bucket.end()) {
      bucket.push_back(std::move(g));
      ++size_;
    }
  }
}

void NgramBlocklist::add_eval_set(const EvalSegmentSet& set) {
  for (const auto& seg : set.segments) {
    add_text(seg.source);
    add_text(seg.reference);
  }
}

std::optional<std::string> NgramBlocklist::first_match(std::string_view text) const {
  if (entries_.empty()) return std::nullopt;
  const auto words = text::normalize_words(text);
  for (auto& g : word_ngrams(words, kOrder)) {
    const auto it = entries_.find(hasher_(g));
    if (it == entries_.end()) continue;
    if (std::find(it->second.begin(), it->second.end(), g) != it->second.end()) return g;
    rejected_collisions_.fetch_add(1);
  }
  return std::nullopt;
}

namespace {

constexpr char kBlocklistMagic[4] = {'S', 'P', 'B', 'L'};
constexpr std::uint32_t kBlocklistVersion = 1;

std::string blocklist_spec() { return std::string(text::kNormalizerSpec) + "|fnv1a64"; }

template <typename T>
void put(std::ostream& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get(std::istream& in) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == EOF) throw ParseError("truncated blocklist file");
    v |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto len = get<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (static_cast<std::uint32_t>(in.gcount()) != len) throw ParseError("truncated blocklist file");
  return s;
}

}  // namespace

void NgramBlocklist::save(const std::filesystem::path& path) const {
  if (hasher_ != &default_hash) throw ContractError("only blocklists using the default hash can be saved");
  std::vector<std::pair<std::uint64_t, std::string>> flat;
  for (const auto& [h, literals] : entries_) {
    for (const auto& l : literals) flat.emplace_back(h, l);
  }
  std::sort(flat.begin(), flat.end());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NotFoundError("cannot write blocklist " + path.string());
  out.write(kBlocklistMagic, 4);
  put<std::uint32_t>(out, kBlocklistVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(kOrder));
  put_string(out, blocklist_spec());
  put<std::uint64_t>(out, flat.size());
  for (const auto& [h, l] : flat) {
    put<std::uint64_t>(out, h);
    put_string(out, l);
  }
  if (!out) throw Error("failed writing blocklist " + path.string());
}

NgramBlocklist NgramBlocklist::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("blocklist not found: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kBlocklistMagic, 4) != 0) {
    throw ParseError(path.string() + " is not a blocklist file");
  }
  if (get<std::uint32_t>(in) != kBlocklistVersion) throw ParseError("unsupported blocklist version");
  if (get<std::uint32_t>(in) != kOrder) throw ParseError("blocklist n-gram order mismatch");
  const auto spec = get_string(in);
  if (spec != blocklist_spec()) {
    throw ParseError("blocklist normalization spec '" + spec + "' does not match '" + blocklist_spec() + "'");
  }
  NgramBlocklist bl;
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto h = get<std::uint64_t>(in);
    auto literal = get_string(in);
    if (default_hash(literal) != h) throw ParseError("blocklist entry hash does not match its literal");
    bl.entries_[h].push_back(std::move(literal));
    ++bl.size_;
  }
  return bl;
}

std::vector<SentenceRecord> decontaminate(std::vector<SentenceRecord> sentences,
                                          const NgramBlocklist& blocklist) {
  for (auto& s : sentences) {
    if (s.status == SentenceStatus::kept && blocklist.is_contaminated(s.text)) {
      s.status = SentenceStatus::dropped_decontaminated;
    }
  }
  return sentences;
}

// ---- Composition ----------------------------------------------------------

FilterResult apply_filters(std::span<const GeneratedParagraph> paragraphs, const SplitterRules& rules,
                           const LangClassifier& classifier, const NgramBlocklist& blocklist,
                           const FilterConfig& config) {
  rules.validate();
  FilterResult result;
  result.counts.paragraphs = static_cast<std::int64_t>(paragraphs.size());

  std::vector<std::string> texts;
  for (const auto& p : paragraphs) {
    const auto sentences = split_sentences(p.text, rules, config.expected_lang);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      SentenceRecord r;
      r.paragraph_id = p.id;
      r.position = static_cast<std::int64_t>(i);
      r.text = sentences[i];
      texts.push_back(sentences[i]);
      result.records.push_back(std::move(r));
    }
  }
  const auto verdicts = texts.empty() ? std::vector<LangVerdict>{} : classifier.classify_batch(texts);

  for (std::size_t i = 0; i < result.records.size(); ++i) {
    auto& r = result.records[i];
    const auto& v = verdicts[i];
    r.langid_label = v.label;
    r.langid_confidence = v.confidence;
    const auto n_tokens = text::split_whitespace(r.text).size();
    if (v.label != config.expected_lang || v.low_confidence || v.confidence < config.langid_threshold) {
      r.status = SentenceStatus::dropped_langid;
    } else if (n_tokens < rules.min_tokens || n_tokens > rules.max_tokens) {
      r.status = SentenceStatus::dropped_length;
    } else {
      r.status = SentenceStatus::kept;
    }
  }
  result.records = decontaminate(std::move(result.records), blocklist);

  auto& c = result.counts;
  c.sentences_raw = static_cast<std::int64_t>(result.records.size());
  for (const auto& r : result.records) {
    if (r.status != SentenceStatus::dropped_langid) ++c.sentences_after_langid;
    if (r.status == SentenceStatus::kept) ++c.sentences_after_decon;
  }
  return result;
}

}  // namespace synthpar
