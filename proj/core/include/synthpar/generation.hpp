#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "synthpar/corpus.hpp"
#include "synthpar/gateway.hpp"
#include "synthpar/prompting.hpp"

namespace synthpar {

struct GenerationConfig {
  LangCode target_lang;
  std::int64_t n_target_paragraphs = 1;
  double rouge_threshold = 0.7;
  double temperature = 1.0;
  int max_attempts_per_slot = 5;
  std::uint64_t seed = 0;
  std::size_t k_seed_paragraphs = 2;
  std::size_t m_seed_sentences = 5;
  int max_new_tokens = 512;

  void validate() const;
  /// Generations above 1.2 tend to degrade into noise.
  bool temperature_warning() const { return temperature > 1.2; }
};

/// ROUGE-1 F1 on clipped unigram counts. 0 when either side is empty or
/// nothing overlaps.
double rouge1_f(std::span<const std::string> candidate, std::span<const std::string> reference);

/// F1 from an overlap count and the two lengths, computed as 2PR/(P+R).
double rouge1_f_from_counts(std::size_t overlap, std::size_t candidate_len, std::size_t reference_len);

/// Unigram multisets of accepted paragraphs with an inverted index so a
/// candidate only touches entries it shares a word with.
class AcceptedPool {
 public:
  struct Match {
    double score = 0.0;
    std::optional<std::string> id;
  };

  void add(std::string id, std::span<const std::string> tokens);

  /// Highest rouge1_f against any entry; ties go to the earliest entry.
  Match max_overlap(std::span<const std::string> candidate_tokens) const;

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t i) const { return ids_[i]; }

 private:
  struct Entry {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;  // (term, count)
    std::size_t length = 0;
  };

  std::unordered_map<std::string, std::uint32_t> terms_;
  std::vector<std::vector<std::uint32_t>> postings_;  // term -> entries
  std::vector<Entry> entries_;
  std::vector<std::string> ids_;
};

/// Tokenizes `candidate` with the shared word normalizer and queries `pool`.
AcceptedPool::Match max_pool_overlap(std::string_view candidate, const AcceptedPool& pool);

struct GenerationOutcome {
  std::int64_t accepted_total = 0;  // includes paragraphs found on resume
  std::int64_t accepted_new = 0;
  std::int64_t attempts = 0;        // attempts made by this invocation
  std::int64_t rejected = 0;
  std::int64_t failed = 0;
  std::int64_t shortfall = 0;       // target minus accepted when the budget ran out
};

struct GenerationContext {
  const SeedPools& pools;
  const LanguageNames& names;
  const TemplateFile& tpl;
  Gateway& gateway;
  const BackendProfile& profile;
  std::string run_id;
};

/// Generation loop: per attempt, sample a topic and seeds, call the
/// generator, and accept iff the ROUGE-1 overlap with every accepted
/// paragraph stays below the threshold. Accepted paragraphs are appended to
/// `paragraphs_path` as they are accepted; records already in the file for
/// the target language are loaded first, so an interrupted run resumes
/// where it stopped. Backend calls run up to max_parallel_requests at a time
/// but acceptance is serialized in attempt order.
GenerationOutcome run_generation(const GenerationConfig& config, const GenerationContext& ctx,
                                 const std::filesystem::path& paragraphs_path);

enum class JudgeVerdict { yes, no, unparseable };

std::string_view to_string(JudgeVerdict v);

/// Reads the first word of a judge reply, case-insensitively.
JudgeVerdict parse_judge_reply(std::string_view reply);

/// Asks `judge` whether `paragraph` addresses its topic. Transport errors
/// propagate; an empty or off-protocol reply is `unparseable`.
JudgeVerdict judge_topic_alignment(const GeneratedParagraph& paragraph, Gateway& gateway,
                                   const BackendProfile& judge, const TemplateFile& tpl);
JudgeVerdict judge_topic_alignment(const GeneratedParagraph& paragraph, Gateway& gateway,
                                   const BackendProfile& judge);

}  // namespace synthpar
