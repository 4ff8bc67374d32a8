#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "synthpar/corpus.hpp"

namespace synthpar {

// ---- Sentence splitting ---------------------------------------------------

struct SplitterRules {
  std::vector<char32_t> terminators{U'.', U'!', U'?', U'।', U'؟'};
  /// Abbreviations per language code; the "*" entry applies to every language.
  std::map<std::string, std::set<std::string>> abbreviations;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 150;

  void validate() const;
  bool is_abbreviation(const LangCode& lang, const std::string& token) const;

  /// Default terminators, a short English abbreviation list under "*", 3..150 tokens.
  static SplitterRules defaults();
};

/// Splits at a terminator run (plus closing quotes/brackets) that is followed
/// by whitespace and then an uppercase or uncased character, unless the word
/// ending at the terminator is a listed abbreviation. Segments are trimmed;
/// empty ones are dropped. Non-whitespace characters are preserved in order.
std::vector<std::string> split_sentences(std::string_view paragraph, const SplitterRules& rules,
                                         const LangCode& lang);

// ---- Language identification ----------------------------------------------

struct LangVerdict {
  LangCode label;
  double confidence = 0.0;
  /// No letter n-grams in the input: the verdict is the prior only.
  bool low_confidence = false;
};

class LangClassifier {
 public:
  virtual ~LangClassifier() = default;
  virtual std::vector<LangVerdict> classify_batch(std::span<const std::string> sentences) const = 0;
  LangVerdict classify(std::string_view sentence) const;
};

/// Multinomial naive Bayes over character 1..3-grams of letter runs, additive
/// smoothing, uniform prior over the trained languages.
class NgramLangId final : public LangClassifier {
 public:
  static NgramLangId train(const std::map<LangCode, std::vector<std::string>>& seeds,
                           double smoothing = 0.5);

  /// Throws UndefinedInputError for an empty (all-whitespace) sentence.
  LangVerdict classify_one(std::string_view sentence) const;
  std::vector<LangVerdict> classify_batch(std::span<const std::string> sentences) const override;

  const std::vector<LangCode>& languages() const { return langs_; }

 private:
  std::vector<LangCode> langs_;
  std::vector<double> log_prior_;
  std::vector<double> log_denominator_;
  std::unordered_map<std::string, std::vector<std::uint32_t>> counts_;
  double smoothing_ = 0.5;
};

/// Character n-gram features used by NgramLangId (exposed for tests).
std::vector<std::string> langid_features(std::string_view sentence);

/// External labeler: reads sentences one per line on stdin and prints
/// "label<TAB>confidence" per line.
class ExternalLangId final : public LangClassifier {
 public:
  explicit ExternalLangId(std::string command) : command_(std::move(command)) {}
  std::vector<LangVerdict> classify_batch(std::span<const std::string> sentences) const override;

 private:
  std::string command_;
};

// ---- Decontamination ------------------------------------------------------

/// Set of word 10-grams from evaluation data, keyed by a 64-bit hash. Every
/// hash hit is confirmed against the stored literal n-gram.
class NgramBlocklist {
 public:
  using Hasher = std::uint64_t (*)(std::string_view);
  static constexpr std::size_t kOrder = 10;

  static std::uint64_t default_hash(std::string_view s);

  explicit NgramBlocklist(Hasher hasher = &default_hash) : hasher_(hasher) {}
  NgramBlocklist(NgramBlocklist&& other) noexcept;
  NgramBlocklist& operator=(NgramBlocklist&& other) noexcept;

  void add_text(std::string_view text);
  void add_eval_set(const EvalSegmentSet& set);  // both sides

  /// First blocklisted 10-gram of `text` (space-joined normalized words).
  std::optional<std::string> first_match(std::string_view text) const;
  bool is_contaminated(std::string_view text) const { return first_match(text).has_value(); }

  std::size_t size() const { return size_; }
  /// Hash hits rejected by literal verification so far.
  std::uint64_t rejected_collisions() const { return rejected_collisions_.load(); }

  /// Binary file: magic, version, order, normalizer spec, then
  /// (hash, literal) entries in sorted order.
  void save(const std::filesystem::path& path) const;
  static NgramBlocklist load(const std::filesystem::path& path);

 private:
  Hasher hasher_;
  std::unordered_map<std::uint64_t, std::vector<std::string>> entries_;
  std::size_t size_ = 0;
  mutable std::atomic<std::uint64_t> rejected_collisions_{0};
};

/// Space-joined word n-grams of already-normalized words.
std::vector<std::string> word_ngrams(std::span<const std::string> words, std::size_t n);

/// Marks kept records whose text shares a 10-gram with the blocklist as
/// dropped_decontaminated. Other records pass through unchanged.
std::vector<SentenceRecord> decontaminate(std::vector<SentenceRecord> sentences,
                                          const NgramBlocklist& blocklist);

// ---- Composition ----------------------------------------------------------

struct FilterConfig {
  LangCode expected_lang;
  double langid_threshold = 0.5;
};

struct FilterResult {
  std::vector<SentenceRecord> records;
  StageCounts counts;
};

/// split -> language ID -> length -> decontamination. Every sentence is
/// returned with its final status.
FilterResult apply_filters(std::span<const GeneratedParagraph> paragraphs, const SplitterRules& rules,
                           const LangClassifier& classifier, const NgramBlocklist& blocklist,
                           const FilterConfig& config);

}  // namespace synthpar
