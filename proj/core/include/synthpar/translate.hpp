#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthpar/corpus.hpp"
#include "synthpar/gateway.hpp"
#include "synthpar/prompting.hpp"
#include "synthpar/retrieval.hpp"
#include "synthpar/text_pipeline.hpp"

namespace synthpar {

// ---- Back-translation -----------------------------------------------------

struct BtConfig {
  BtMode mode = BtMode::supervised_mt;
  /// Used by supervised_mt; prompted modes always decode greedily.
  DecodeParams decode = DecodeParams::beam(5);
  /// Few-shot examples per prompt in the prompted modes.
  std::size_t shots = 5;
  /// Pairs file the few-shot pool is built from (CLI/config level).
  std::optional<std::filesystem::path> pool_ref;
  /// Fraction of failed sentences above which the call raises RunError.
  double max_failure_rate = 0.05;

  void validate() const;
};

BtMode bt_mode_from_string(std::string_view s);  // "mt" | "fewshot" | "student" or the long labels

/// Few-shot prompt for one LRL sentence: the top `shots` pool hits for the
/// sentence, in ranked order, as completed LRL->HRL blocks. A pool entry
/// whose LRL side is the sentence itself is skipped.
std::string build_bt_prompt(std::string_view sentence, const ExamplePool* pool, std::size_t shots,
                            const LanguageNames& names, const Direction& hrl_to_lrl);

/// First non-empty line of a completion, trimmed; empty when none.
std::string first_line(std::string_view completion);

/// Translates kept LRL sentences into the HRL, one pair per input in input
/// order. supervised_mt goes through translate_batch with cfg.decode; the
/// prompted modes issue one greedy few-shot completion per sentence (the
/// gateway bounds concurrency). Per-sentence failures are marked on the
/// pair; more than cfg.max_failure_rate failures raise RunError.
/// `hrl_to_lrl` is the pair direction (HRL source, LRL target).
std::vector<ParallelPair> backtranslate(std::span<const SentenceRecord> sentences, const BtConfig& cfg,
                                        Gateway& gateway, const BackendProfile& profile,
                                        const LanguageNames& names, const Direction& hrl_to_lrl,
                                        const ExamplePool* pool = nullptr, int student_round = 0);

/// Marks successful pairs whose HRL side shares a 10-gram with `blocklist`
/// as failed ("decontaminated_hrl").
std::size_t decontaminate_hrl(std::vector<ParallelPair>& pairs, const NgramBlocklist& blocklist);

// ---- Self-improvement -----------------------------------------------------

struct DirectionScores {
  std::string direction;
  double bleu = 0.0;
  double chrf_pp = 0.0;
};

struct RoundState {
  int round_index = 0;
  /// M_k: the model that back-translated this round.
  std::string student_model_ref;
  /// M_{k+1}: the trainer's output for this round.
  std::string next_model_ref;
  std::string pairs_path;
  std::string finetune_path;
  std::string trainer_log;
  std::size_t failures = 0;
  std::vector<DirectionScores> scores;
};

void to_json(nlohmann::json& j, const DirectionScores& s);
void from_json(const nlohmann::json& j, DirectionScores& s);
void to_json(nlohmann::json& j, const RoundState& s);
void from_json(const nlohmann::json& j, RoundState& s);

/// One line of the trainer invocation log.
struct TrainerInvocation {
  int round_index = 0;
  std::string base_model;
  std::string finetune_path;
  std::string command;
  int exit_code = 0;
  std::string output_model;
};

void to_json(nlohmann::json& j, const TrainerInvocation& t);
void from_json(const nlohmann::json& j, TrainerInvocation& t);

struct SelfImproveConfig {
  int rounds = 1;
  /// Shell command with {finetune}, {base}, {round}, {output} placeholders;
  /// the last non-empty stdout line is the new model handle.
  std::string trainer_command;
  /// Student profile; its model_name is the base handle M_0.
  BackendProfile student;
  std::size_t shots = 5;
  /// Artifacts: round_<k>/{pairs,finetune}.jsonl, trainer_log.jsonl, rounds.jsonl.
  std::filesystem::path work_dir;
  double max_failure_rate = 0.05;

  void validate() const;
};

/// Iterative back-translation with re-fine-tuning. Round k back-translates
/// Y with M_k (few-shot, greedy), emits the two-way fine-tune file, and has
/// the trainer fine-tune the base M_0 (never M_k) into M_{k+1}; M_{k+1} is
/// then scored zero-shot on `eval` in both directions. Rounds k = 0..R-1 run
/// sequentially; completed rounds recorded in rounds.jsonl are skipped on a
/// re-run. A failing trainer raises TrainerError with earlier rounds intact.
/// `eval` sources are HRL text, references LRL text.
std::vector<RoundState> self_improve(std::span<const SentenceRecord> lrl_corpus, const SelfImproveConfig& cfg,
                                     Gateway& gateway, const LanguageNames& names,
                                     const Direction& hrl_to_lrl, const EvalSegmentSet& eval,
                                     const ExamplePool* pool = nullptr);

/// Zero-shot, greedy translation of `sources` with `profile`, one request per
/// segment; failures become empty strings.
std::vector<std::string> translate_zero_shot(std::span<const std::string> sources, Gateway& gateway,
                                             const BackendProfile& profile, const LanguageNames& names,
                                             const LangCode& src, const LangCode& tgt);

}  // namespace synthpar
