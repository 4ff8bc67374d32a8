#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthpar/corpus.hpp"
#include "synthpar/rng.hpp"

namespace synthpar {

/// Human-readable language names used inside prompts ("Hausa" for hau_Latn).
class LanguageNames {
 public:
  LanguageNames() = default;
  explicit LanguageNames(std::map<LangCode, std::string> names) : names_(std::move(names)) {}

  /// Throws ConfigError for unmapped codes.
  const std::string& name(const LangCode& lang) const;
  const std::map<LangCode, std::string>& all() const { return names_; }

 private:
  std::map<LangCode, std::string> names_;
};

/// Parsed template file: sections introduced by "@@ <name>" lines.
class TemplateFile {
 public:
  static TemplateFile parse(std::string_view content);
  static TemplateFile load(const std::filesystem::path& path);

  /// Throws ConfigError when the section is missing.
  const std::string& section(const std::string& name) const;
  bool has(const std::string& name) const { return sections_.contains(name); }

 private:
  std::map<std::string, std::string> sections_;
};

/// Substitutes `{key}` placeholders in one left-to-right pass; inserted
/// values are never rescanned. Unknown keys are left verbatim.
std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& values);

/// Built-in copies of templates/generation_v1.txt and templates/judge_v1.txt.
std::string_view builtin_generation_template();
std::string_view builtin_judge_template();

enum class PromptKind { generation, mt_zero_shot, mt_few_shot };

struct PromptSpec {
  PromptKind kind = PromptKind::generation;
  LangCode target_lang;
  std::optional<Topic> topic;
  std::size_t k_seed_paragraphs = 2;
  std::size_t m_seed_sentences = 5;
  std::size_t shots = 0;

  void validate() const;
};

/// Topic-guided generation prompt: instruction block, k HRL seed paragraphs,
/// m target-language seed sentences, closing cue. Paragraphs are drawn
/// first, then sentences, each without replacement from `rng`.
std::string build_generation_prompt(const PromptSpec& spec, const SeedPools& pools,
                                    const LanguageNames& names, Rng& rng,
                                    const TemplateFile& tpl);
std::string build_generation_prompt(const PromptSpec& spec, const SeedPools& pools,
                                    const LanguageNames& names, Rng& rng);

/// "Translate this from <Src> to <Tgt>:\n<Src>: <sentence>\n<Tgt>:"
std::string build_zero_shot_mt_prompt(const LanguageNames& names, const LangCode& src,
                                      const LangCode& tgt, std::string_view sentence);

/// Completed zero-shot blocks (one per example, in the given order) followed
/// by the open block for `sentence`. Examples may be stored in either
/// orientation; their language pair must match {src, tgt}. With no examples
/// the result equals build_zero_shot_mt_prompt.
std::string build_few_shot_mt_prompt(const LanguageNames& names,
                                     std::span<const ParallelPair> examples, const LangCode& src,
                                     const LangCode& tgt, std::string_view sentence);

struct TrainingRecord {
  std::string prompt;
  std::string completion;
  Direction direction;
};

void to_json(nlohmann::json& j, const TrainingRecord& r);
void from_json(const nlohmann::json& j, TrainingRecord& r);

/// Two records per pair, HRL->LRL then LRL->HRL, each prompted with the
/// zero-shot template and completed by the other side verbatim.
std::vector<TrainingRecord> emit_finetune_records(const LanguageNames& names,
                                                  std::span<const ParallelPair> pairs);

}  // namespace synthpar
