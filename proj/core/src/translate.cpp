#include "synthpar/translate.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "synthpar/hooks.hpp"
#include "synthpar/log.hpp"
#include "synthpar/metrics.hpp"
#include "synthpar/text.hpp"

namespace synthpar {

void BtConfig::validate() const {
  if (mode != BtMode::supervised_mt && shots < 1) {
    throw ConfigError("prompted back-translation needs shots >= 1");
  }
  if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0)) {
    throw ConfigError("max_failure_rate must be in [0, 1]");
  }
  decode.validate();
}

BtMode bt_mode_from_string(std::string_view s) {
  if (s == "mt" || s == "supervised_mt") return BtMode::supervised_mt;
  if (s == "fewshot" || s == "fewshot_generator") return BtMode::fewshot_generator;
  if (s == "student") return BtMode::student;
  throw ConfigError("unknown back-translation mode '" + std::string(s) + "' (mt, fewshot, student)");
}

std::string build_bt_prompt(std::string_view sentence, const ExamplePool* pool, std::size_t shots,
                            const LanguageNames& names, const Direction& hrl_to_lrl) {
  std::vector<ParallelPair> examples;
  if (pool != nullptr && shots > 0) {
    // A pool built from the same corpus would otherwise hand the model the
    // sentence's own translation as a demonstration.
    for (auto& ex : pool->select(sentence, shots + 1)) {
      if (ex.lrl_text != sentence && examples.size() < shots) examples.push_back(std::move(ex));
    }
  }
  return build_few_shot_mt_prompt(names, examples, hrl_to_lrl.target, hrl_to_lrl.source, sentence);
}

std::string first_line(std::string_view completion) {
  std::size_t pos = 0;
  while (pos <= completion.size()) {
    const auto nl = completion.find('\n', pos);
    const auto end = nl == std::string_view::npos ? completion.size() : nl;
    auto line = text::trim(completion.substr(pos, end - pos));
    if (!line.empty()) return line;
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return {};
}

namespace {

/// Runs fn(i) for i in [0, n) on up to `width` threads. Errors that signal a
/// misconfigured run (rather than a flaky segment) abort the whole call.
template <typename Fn>
void parallel_for(std::size_t n, int width, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr fatal;
  const auto worker = [&] {
    for (;;) {
      {
        std::lock_guard lock(mu);
        if (fatal) return;
      }
      const auto i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, width));
  if (threads == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);
}

bool is_fatal(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return true;
  } catch (const CapabilityError&) {
    return true;
  } catch (...) {
    return false;
  }
}

std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

}  // namespace

std::vector<ParallelPair> backtranslate(std::span<const SentenceRecord> sentences, const BtConfig& cfg,
                                        Gateway& gateway, const BackendProfile& profile,
                                        const LanguageNames& names, const Direction& hrl_to_lrl,
                                        const ExamplePool* pool, int student_round) {
  cfg.validate();
  if (cfg.mode != BtMode::supervised_mt && cfg.shots > 0 && pool == nullptr) {
    throw PreconditionError("few-shot back-translation needs a retrieval pool");
  }
  for (const auto& s : sentences) {
    if (s.status != SentenceStatus::kept) {
      throw ContractError("sentence " + s.ref() + " is not kept; only kept sentences are back-translated");
    }
  }

  std::vector<ParallelPair> pairs(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto& p = pairs[i];
    p.lrl_text = sentences[i].text;
    p.direction = hrl_to_lrl;
    p.sentence_ref = sentences[i].ref();
    p.bt_backend_id = profile.backend_id;
    p.bt_mode = cfg.mode;
    p.student_round = cfg.mode == BtMode::student ? student_round : 0;
  }

  if (cfg.mode == BtMode::supervised_mt) {
    std::vector<std::string> texts;
    texts.reserve(sentences.size());
    for (const auto& s : sentences) texts.push_back(s.text);
    const auto outcomes = gateway.translate_batch(profile, texts, hrl_to_lrl.reversed(), cfg.decode);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (outcomes[i].ok() && !text::trim(*outcomes[i].text).empty()) {
        pairs[i].hrl_text = text::trim(*outcomes[i].text);
      } else {
        pairs[i].failure = outcomes[i].ok() ? "empty translation" : outcomes[i].error;
      }
    }
  } else {
    const auto greedy = DecodeParams::greedy();
    parallel_for(sentences.size(), profile.max_parallel_requests, [&](std::size_t i) {
      const auto prompt = build_bt_prompt(sentences[i].text, pool, cfg.shots, names, hrl_to_lrl);
      try {
        const auto reply = first_line(gateway.complete(profile, prompt, greedy).text);
        if (reply.empty()) {
          pairs[i].failure = "empty translation";
        } else {
          pairs[i].hrl_text = reply;
        }
      } catch (...) {
        const auto e = std::current_exception();
        if (is_fatal(e)) throw;
        pairs[i].failure = describe(e);
      }
    });
  }

  const auto failures =
      static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return !p.ok(); }));
  log_event("backtranslate", {{"mode", bt_mode_label(cfg.mode, student_round)},
                              {"backend", profile.backend_id},
                              {"sentences", sentences.size()},
                              {"failures", failures}});
  if (!sentences.empty() &&
      static_cast<double>(failures) > cfg.max_failure_rate * static_cast<double>(sentences.size())) {
    throw RunError(std::to_string(failures) + " of " + std::to_string(sentences.size()) +
                   " back-translations failed (limit " + std::to_string(cfg.max_failure_rate * 100.0) + "%)");
  }
  return pairs;
}

std::size_t decontaminate_hrl(std::vector<ParallelPair>& pairs, const NgramBlocklist& blocklist) {
  std::size_t dropped = 0;
  for (auto& p : pairs) {
    if (p.ok() && blocklist.is_contaminated(p.hrl_text)) {
      p.failure = "decontaminated_hrl";
      ++dropped;
    }
  }
  return dropped;
}

// ---- Self-improvement -----------------------------------------------------

void to_json(nlohmann::json& j, const DirectionScores& s) {
  j = nlohmann::json{{"direction", s.direction}, {"bleu", s.bleu}, {"chrf_pp", s.chrf_pp}};
}

void from_json(const nlohmann::json& j, DirectionScores& s) {
  j.at("direction").get_to(s.direction);
  j.at("bleu").get_to(s.bleu);
  j.at("chrf_pp").get_to(s.chrf_pp);
}

void to_json(nlohmann::json& j, const RoundState& s) {
  j = nlohmann::json{{"round_index", s.round_index},       {"student_model_ref", s.student_model_ref},
                     {"next_model_ref", s.next_model_ref}, {"pairs_path", s.pairs_path},
                     {"finetune_path", s.finetune_path},   {"trainer_log", s.trainer_log},
                     {"failures", s.failures},             {"scores", s.scores}};
}

void from_json(const nlohmann::json& j, RoundState& s) {
  j.at("round_index").get_to(s.round_index);
  j.at("student_model_ref").get_to(s.student_model_ref);
  j.at("next_model_ref").get_to(s.next_model_ref);
  j.at("pairs_path").get_to(s.pairs_path);
  j.at("finetune_path").get_to(s.finetune_path);
  j.at("trainer_log").get_to(s.trainer_log);
  j.at("failures").get_to(s.failures);
  j.at("scores").get_to(s.scores);
}

void to_json(nlohmann::json& j, const TrainerInvocation& t) {
  j = nlohmann::json{{"round_index", t.round_index}, {"base_model", t.base_model},
                     {"finetune_path", t.finetune_path}, {"command", t.command},
                     {"exit_code", t.exit_code}, {"output_model", t.output_model}};
}

void from_json(const nlohmann::json& j, TrainerInvocation& t) {
  j.at("round_index").get_to(t.round_index);
  j.at("base_model").get_to(t.base_model);
  j.at("finetune_path").get_to(t.finetune_path);
  j.at("command").get_to(t.command);
  j.at("exit_code").get_to(t.exit_code);
  j.at("output_model").get_to(t.output_model);
}

void SelfImproveConfig::validate() const {
  if (rounds < 1) throw ConfigError("self-improvement needs at least one round");
  if (trainer_command.empty()) throw ConfigError("no trainer command configured");
  if (shots < 1) throw ConfigError("self-improvement back-translation needs shots >= 1");
  if (work_dir.empty()) throw ConfigError("self-improvement work directory not set");
  student.validate();
  if (student.kind == BackendKind::seq2seq_mt) {
    throw CapabilityError("student profile '" + student.backend_id + "' cannot take prompts");
  }
}

std::vector<std::string> translate_zero_shot(std::span<const std::string> sources, Gateway& gateway,
                                             const BackendProfile& profile, const LanguageNames& names,
                                             const LangCode& src, const LangCode& tgt) {
  std::vector<std::string> out(sources.size());
  const auto greedy = DecodeParams::greedy();
  parallel_for(sources.size(), profile.max_parallel_requests, [&](std::size_t i) {
    try {
      out[i] = first_line(gateway.complete(profile, build_zero_shot_mt_prompt(names, src, tgt, sources[i]), greedy).text);
    } catch (...) {
      const auto e = std::current_exception();
      if (is_fatal(e)) throw;
    }
  });
  return out;
}

namespace {

std::vector<DirectionScores> evaluate_student(Gateway& gateway, const BackendProfile& student,
                                              const LanguageNames& names, const Direction& hrl_to_lrl,
                                              const EvalSegmentSet& eval) {
  std::vector<std::string> hrl, lrl;
  for (const auto& seg : eval.segments) {
    hrl.push_back(seg.source);
    lrl.push_back(seg.reference);
  }
  std::vector<DirectionScores> scores;
  for (const auto& dir : {hrl_to_lrl, hrl_to_lrl.reversed()}) {
    const auto& sources = dir == hrl_to_lrl ? hrl : lrl;
    const auto& refs = dir == hrl_to_lrl ? lrl : hrl;
    const auto hyps = translate_zero_shot(sources, gateway, student, names, dir.source, dir.target);
    scores.push_back({dir.str(), bleu(hyps, refs), chrf_pp(hyps, refs)});
  }
  return scores;
}

}  // namespace

std::vector<RoundState> self_improve(std::span<const SentenceRecord> lrl_corpus, const SelfImproveConfig& cfg,
                                     Gateway& gateway, const LanguageNames& names,
                                     const Direction& hrl_to_lrl, const EvalSegmentSet& eval,
                                     const ExamplePool* pool) {
  cfg.validate();
  eval.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.work_dir);
  const auto rounds_path = cfg.work_dir / "rounds.jsonl";
  const auto log_path = cfg.work_dir / "trainer_log.jsonl";
  const std::string base_model = cfg.student.model_name;

  std::vector<RoundState> states;
  if (fs::exists(rounds_path)) states = read_jsonl<RoundState>(rounds_path);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].round_index != static_cast<int>(i)) {
      throw RunError("rounds.jsonl is out of order at round " + std::to_string(i));
    }
  }
  if (static_cast<int>(states.size()) > cfg.rounds) states.resize(static_cast<std::size_t>(cfg.rounds));

  std::string current = states.empty() ? base_model : states.back().next_model_ref;
  for (int k = static_cast<int>(states.size()); k < cfg.rounds; ++k) {
    const auto round_dir = cfg.work_dir / ("round_" + std::to_string(k));
    fs::create_directories(round_dir);

    // X_k = back-translation of Y by M_k.
    BackendProfile student = cfg.student;
    student.model_name = current;
    BtConfig bt;
    bt.mode = k == 0 ? BtMode::fewshot_generator : BtMode::student;
    bt.shots = cfg.shots;
    bt.max_failure_rate = cfg.max_failure_rate;
    auto pairs = backtranslate(lrl_corpus, bt, gateway, student, names, hrl_to_lrl, pool, k);
    const auto pairs_path = round_dir / "pairs.jsonl";
    write_jsonl(pairs_path, pairs);

    std::vector<ParallelPair> usable;
    std::copy_if(pairs.begin(), pairs.end(), std::back_inserter(usable), [](const auto& p) { return p.ok(); });
    const auto records = emit_finetune_records(names, usable);
    const auto finetune_path = round_dir / "finetune.jsonl";
    write_jsonl(finetune_path, records);

    // M_{k+1} = fine-tune of the base M_0 on (Y -> X_k) and (X_k -> Y).
    TrainerInvocation inv;
    inv.round_index = k;
    inv.base_model = base_model;
    inv.finetune_path = finetune_path.string();
    inv.command = expand_command(cfg.trainer_command, {{"finetune", finetune_path.string()},
                                                       {"base", base_model},
                                                       {"round", std::to_string(k)},
                                                       {"output", (round_dir / "model").string()}});
    const auto result = run_line_hook(inv.command, {});
    inv.exit_code = result.exit_code;
    for (auto it = result.lines.rbegin(); it != result.lines.rend(); ++it) {
      if (auto handle = text::trim(*it); !handle.empty()) {
        inv.output_model = std::move(handle);
        break;
      }
    }
    JsonlWriter(log_path, true).write(inv);
    log_event("trainer", {{"round", k}, {"base", base_model}, {"exit_code", inv.exit_code},
                          {"output_model", inv.output_model}});
    if (inv.exit_code != 0) {
      throw TrainerError("trainer exited with status " + std::to_string(inv.exit_code) + " in round " +
                         std::to_string(k) + "; rounds 0.." + std::to_string(k - 1) + " are preserved");
    }
    if (inv.output_model.empty()) {
      throw TrainerError("trainer printed no model handle in round " + std::to_string(k));
    }

    RoundState state;
    state.round_index = k;
    state.student_model_ref = current;
    state.next_model_ref = inv.output_model;
    state.pairs_path = pairs_path.string();
    state.finetune_path = finetune_path.string();
    state.trainer_log = log_path.string();
    state.failures = pairs.size() - usable.size();
    BackendProfile trained = cfg.student;
    trained.model_name = inv.output_model;
    state.scores = evaluate_student(gateway, trained, names, hrl_to_lrl, eval);
    JsonlWriter(rounds_path, true).write(state);
    states.push_back(state);
    current = inv.output_model;
  }
  return states;
}

}  // namespace synthpar
