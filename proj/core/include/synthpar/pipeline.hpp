#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthpar/corpus.hpp"
#include "synthpar/gateway.hpp"
#include "synthpar/generation.hpp"
#include "synthpar/metrics.hpp"
#include "synthpar/prompting.hpp"
#include "synthpar/text_pipeline.hpp"
#include "synthpar/translate.hpp"

namespace synthpar {

/// Generation knobs shared by every language of a run.
struct GenerationSettings {
  std::int64_t n_target_paragraphs = 100;
  double rouge_threshold = 0.7;
  double temperature = 1.0;
  int max_attempts_per_slot = 5;
  std::size_t k_seed_paragraphs = 2;
  std::size_t m_seed_sentences = 5;
  int max_new_tokens = 512;
};

struct InputPaths {
  std::filesystem::path topics;           // one topic label per line
  std::filesystem::path seed_paragraphs;  // JSONL {lang, text}
  std::map<LangCode, std::filesystem::path> seed_sentences;  // one sentence per line
  std::vector<std::filesystem::path> eval_sets;              // JSONL {source, reference}
  std::optional<std::filesystem::path> generation_template;
};

/// Everything a run depends on. Loaded from one JSON document; relative
/// paths resolve against the config file's directory.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::string run_id;  // empty: derived from the fingerprint
  std::filesystem::path output_dir = "runs";
  LangCode hrl{"eng_Latn"};
  std::vector<LangCode> languages;
  LanguageNames names;
  std::vector<BackendProfile> backends;
  std::string generator;
  std::string back_translator;
  std::string student;  // optional
  GenerationSettings generation;
  SplitterRules splitter = SplitterRules::defaults();
  double langid_threshold = 0.5;
  std::optional<std::string> external_classifier;
  BtConfig bt;
  BleuParams bleu_params;
  ChrfParams chrf_params;
  BootstrapParams bootstrap;
  std::optional<std::string> token_counter;
  std::optional<std::string> scorer;
  InputPaths paths;

  /// Canonical JSON form (keys sorted, paths as given); fingerprinted.
  nlohmann::json source;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  /// Throws ConfigError unless every referenced profile and language exists
  /// and the master seed is set.
  void validate() const;

  /// Hash of the canonical config, hex.
  std::string fingerprint() const;
  std::string effective_run_id() const;

  const BackendProfile& profile(const std::string& backend_id) const;

  /// Overrides applied after loading (CLI flags win over the file).
  void override_seed(std::uint64_t seed);
  void override_backend(const std::string& backend_id);
};

/// Inputs read from the files a RunConfig points at.
struct RunInputs {
  SeedPools pools;
  std::vector<EvalSegmentSet> eval_sets;
  TemplateFile generation_template;

  static RunInputs load(const RunConfig& config);
};

enum class Stage { generate, process, backtranslate, assemble, evaluate };

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);
const std::vector<Stage>& all_stages();

struct PipelineOptions {
  /// Skip stages the manifest records as complete.
  bool resume = false;
  /// Restrict to these languages (empty: all configured).
  std::vector<LangCode> languages;
  /// Optional pool for few-shot back-translation (overrides the config).
  std::optional<std::filesystem::path> bt_pool;
};

struct PipelineResult {
  RunManifest manifest;
  /// Some generation stage ended short of its target.
  bool partial = false;
};

/// Runs stages for each language against one run directory. Every stage
/// reads its prerequisites from disk, writes its artifact, and records its
/// counts in the manifest before the next stage starts.
class Pipeline {
 public:
  Pipeline(RunConfig config, Gateway& gateway, PipelineOptions options = {});

  PipelineResult run(const std::set<Stage>& stages);

  const RunLayout& layout() const { return layout_; }
  const RunConfig& config() const { return config_; }
  const RunManifest& manifest() const { return manifest_; }

 private:
  void run_stage(Stage stage, const LangCode& lang);
  void generate(const LangCode& lang, StageRecord& record);
  void process(const LangCode& lang, StageRecord& record);
  void backtranslate(const LangCode& lang, StageRecord& record);
  void assemble(const LangCode& lang, StageRecord& record);
  void evaluate(const LangCode& lang, StageRecord& record);

  void require(Stage prerequisite, Stage stage, const LangCode& lang) const;
  void invalidate_after(Stage stage, const LangCode& lang);
  const RunInputs& inputs();
  void save_manifest();

  RunConfig config_;
  Gateway& gateway_;
  PipelineOptions options_;
  RunLayout layout_;
  RunManifest manifest_;
  std::optional<RunInputs> inputs_;
};

/// Loads the manifest of a run directory; NotFoundError when absent.
RunManifest load_run_manifest(const std::filesystem::path& run_dir);

/// Table of per-language counts {paragraphs, sentences before and after
/// decontamination}, one row per language in sorted order, with thousands
/// separators.
std::string render_stats(const RunManifest& manifest);

/// Decimal with ',' every three digits.
std::string with_thousands(std::int64_t v);

/// Writes a self-contained offline workspace (config.json plus synthetic
/// inputs, all backends mocked) and returns the config path.
std::filesystem::path write_demo_workspace(const std::filesystem::path& dir, std::uint64_t seed,
                                           std::int64_t n_paragraphs,
                                           const std::vector<LangCode>& languages = {LangCode("hau_Latn")});

}  // namespace synthpar
