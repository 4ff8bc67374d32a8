#include "synthpar/generation.hpp"

#include <algorithm>
#include <thread>

#include "synthpar/hashing.hpp"
#include "synthpar/log.hpp"
#include "synthpar/text.hpp"

namespace synthpar {

void GenerationConfig::validate() const {
  if (n_target_paragraphs < 1) throw ConfigError("n_target_paragraphs must be >= 1");
  if (!(rouge_threshold > 0.0 && rouge_threshold <= 1.0)) {
    throw ConfigError("rouge_threshold must be in (0, 1]");
  }
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (max_attempts_per_slot < 1) throw ConfigError("max_attempts_per_slot must be >= 1");
  if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
}

double rouge1_f_from_counts(std::size_t overlap, std::size_t candidate_len, std::size_t reference_len) {
  if (overlap == 0 || candidate_len == 0 || reference_len == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(candidate_len);
  const double r = static_cast<double>(overlap) / static_cast<double>(reference_len);
  return 2.0 * p * r / (p + r);
}

double rouge1_f(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::unordered_map<std::string_view, std::size_t> ref_counts;
  for (const auto& t : reference) ++ref_counts[t];
  std::size_t overlap = 0;
  for (const auto& t : candidate) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  return rouge1_f_from_counts(overlap, candidate.size(), reference.size());
}

void AcceptedPool::add(std::string id, std::span<const std::string> tokens) {
  const auto entry_index = static_cast<std::uint32_t>(entries_.size());
  std::unordered_map<std::uint32_t, std::uint32_t> counts;
  for (const auto& t : tokens) {
    auto [it, inserted] = terms_.try_emplace(t, static_cast<std::uint32_t>(postings_.size()));
    if (inserted) postings_.emplace_back();
    ++counts[it->second];
  }
  Entry e;
  e.length = tokens.size();
  e.counts.assign(counts.begin(), counts.end());
  std::sort(e.counts.begin(), e.counts.end());
  for (const auto& [term, _] : e.counts) postings_[term].push_back(entry_index);
  entries_.push_back(std::move(e));
  ids_.push_back(std::move(id));
}

AcceptedPool::Match AcceptedPool::max_overlap(std::span<const std::string> candidate_tokens) const {
  Match best;
  if (entries_.empty() || candidate_tokens.empty()) return best;

  std::unordered_map<std::uint32_t, std::uint32_t> cand_counts;
  for (const auto& t : candidate_tokens) {
    if (const auto it = terms_.find(t); it != terms_.end()) ++cand_counts[it->second];
  }
  std::unordered_map<std::uint32_t, std::size_t> overlap;
  for (const auto& [term, c] : cand_counts) {
    for (const auto entry : postings_[term]) {
      const auto& counts = entries_[entry].counts;
      const auto it = std::lower_bound(counts.begin(), counts.end(), std::make_pair(term, 0u));
      overlap[entry] += std::min(c, it->second);
    }
  }
  std::vector<std::pair<std::uint32_t, std::size_t>> touched(overlap.begin(), overlap.end());
  std::sort(touched.begin(), touched.end());
  std::optional<std::uint32_t> best_entry;
  for (const auto& [entry, o] : touched) {
    const double f = rouge1_f_from_counts(o, candidate_tokens.size(), entries_[entry].length);
    if (f > best.score) {
      best.score = f;
      best_entry = entry;
    }
  }
  if (best_entry) best.id = ids_[*best_entry];
  return best;
}

AcceptedPool::Match max_pool_overlap(std::string_view candidate, const AcceptedPool& pool) {
  const auto tokens = text::normalize_words(candidate);
  return pool.max_overlap(tokens);
}

namespace {

struct Attempt {
  std::int64_t seq = 0;
  Topic topic;
  std::string prompt;
  std::optional<CompletionResult> result;
  std::string error;
};

Attempt make_attempt(const GenerationConfig& config, const GenerationContext& ctx, std::int64_t seq) {
  Attempt a;
  a.seq = seq;
  const auto seed = derive_seed(config.seed, "generate/" + config.target_lang.str(),
                                static_cast<std::uint64_t>(seq));
  Rng rng(seed);
  a.topic = ctx.pools.topics[rng.below(ctx.pools.topics.size())];
  PromptSpec spec;
  spec.kind = PromptKind::generation;
  spec.target_lang = config.target_lang;
  spec.topic = a.topic;
  spec.k_seed_paragraphs = config.k_seed_paragraphs;
  spec.m_seed_sentences = config.m_seed_sentences;
  a.prompt = build_generation_prompt(spec, ctx.pools, ctx.names, rng, ctx.tpl);
  try {
    DecodeParams params{config.temperature, 1, config.max_new_tokens, seed};
    a.result = ctx.gateway.complete(ctx.profile, a.prompt, params);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    a.error = e.what();
  }
  return a;
}

}  // namespace

GenerationOutcome run_generation(const GenerationConfig& config, const GenerationContext& ctx,
                                 const std::filesystem::path& paragraphs_path) {
  config.validate();
  ctx.pools.validate_for(config.target_lang);
  if (config.temperature_warning()) {
    log_event("warning", {{"message", "generation temperature above 1.2"},
                          {"temperature", config.temperature}});
  }

  GenerationOutcome outcome;
  AcceptedPool pool;
  std::int64_t next_seq = 0;
  if (std::filesystem::exists(paragraphs_path)) {
    for (const auto& p : read_jsonl<GeneratedParagraph>(paragraphs_path)) {
      if (p.target_lang != config.target_lang) continue;
      pool.add(p.id, text::normalize_words(p.text));
      next_seq = std::max(next_seq, p.seq + 1);
      ++outcome.accepted_total;
    }
  }

  const std::int64_t budget = config.n_target_paragraphs * config.max_attempts_per_slot;
  const auto wave = static_cast<std::int64_t>(std::max(1, ctx.profile.max_parallel_requests));
  JsonlWriter writer(paragraphs_path, true);

  while (outcome.accepted_total < config.n_target_paragraphs && next_seq < budget) {
    const auto wave_end = std::min(budget, next_seq + wave);
    std::vector<Attempt> attempts(static_cast<std::size_t>(wave_end - next_seq));
    if (attempts.size() == 1) {
      attempts[0] = make_attempt(config, ctx, next_seq);
    } else {
      std::vector<std::jthread> workers;
      std::vector<std::exception_ptr> errors(attempts.size());
      for (std::size_t i = 0; i < attempts.size(); ++i) {
        workers.emplace_back([&, i] {
          try {
            attempts[i] = make_attempt(config, ctx, next_seq + static_cast<std::int64_t>(i));
          } catch (...) {
            errors[i] = std::current_exception();
          }
        });
      }
      workers.clear();
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    for (auto& a : attempts) {
      if (outcome.accepted_total >= config.n_target_paragraphs) break;
      ++outcome.attempts;
      next_seq = a.seq + 1;
      if (!a.result) {
        ++outcome.failed;
        log_event("generation_failure", {{"seq", a.seq}, {"error", a.error}});
        continue;
      }
      const auto paragraph_text = text::trim(text::nfc(a.result->text));
      if (paragraph_text.empty()) {
        ++outcome.failed;
        continue;
      }
      const auto tokens = text::normalize_words(paragraph_text);
      const auto match = pool.max_overlap(tokens);
      if (match.score >= config.rouge_threshold) {
        ++outcome.rejected;
        continue;
      }
      GeneratedParagraph p;
      p.id = hash128(ctx.run_id + "\x1f" + config.target_lang.str() + "\x1f" + std::to_string(a.seq)).hex();
      p.seq = a.seq;
      p.topic = a.topic;
      p.target_lang = config.target_lang;
      p.text = paragraph_text;
      p.prompt_fingerprint = hash128(a.prompt).hex();
      p.backend_id = a.result->backend_id;
      p.temperature = config.temperature;
      p.max_pool_overlap = match.score;
      writer.write(p);
      pool.add(p.id, tokens);
      ++outcome.accepted_total;
      ++outcome.accepted_new;
    }
  }
  outcome.shortfall = std::max<std::int64_t>(0, config.n_target_paragraphs - outcome.accepted_total);
  return outcome;
}

std::string_view to_string(JudgeVerdict v) {
  switch (v) {
    case JudgeVerdict::yes: return "yes";
    case JudgeVerdict::no: return "no";
    case JudgeVerdict::unparseable: return "unparseable";
  }
  return "unparseable";
}

JudgeVerdict parse_judge_reply(std::string_view reply) {
  const auto words = text::normalize_words(reply);
  if (words.empty()) return JudgeVerdict::unparseable;
  if (words.front() == "yes") return JudgeVerdict::yes;
  if (words.front() == "no") return JudgeVerdict::no;
  return JudgeVerdict::unparseable;
}

JudgeVerdict judge_topic_alignment(const GeneratedParagraph& paragraph, Gateway& gateway,
                                   const BackendProfile& judge, const TemplateFile& tpl) {
  const auto prompt = fill_template(tpl.section("prompt"),
                                    {{"topic", paragraph.topic.label}, {"paragraph", paragraph.text}});
  try {
    const auto result = gateway.complete(judge, prompt, DecodeParams::greedy(8));
    return parse_judge_reply(result.text);
  } catch (const EmptyOutputError&) {
    return JudgeVerdict::unparseable;
  }
}

JudgeVerdict judge_topic_alignment(const GeneratedParagraph& paragraph, Gateway& gateway,
                                   const BackendProfile& judge) {
  static const TemplateFile builtin = TemplateFile::parse(builtin_judge_template());
  return judge_topic_alignment(paragraph, gateway, judge, builtin);
}

}  // namespace synthpar
