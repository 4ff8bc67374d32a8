#include "synthpar/prompting.hpp"

#include <fstream>
#include <sstream>

namespace synthpar {

using nlohmann::json;

const std::string& LanguageNames::name(const LangCode& lang) const {
  const auto it = names_.find(lang);
  if (it == names_.end()) throw ConfigError("no language name configured for " + lang.str());
  return it->second;
}

TemplateFile TemplateFile::parse(std::string_view content) {
  TemplateFile tf;
  std::string current;
  std::string body;
  bool in_section = false;
  auto flush = [&] {
    if (!in_section) return;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    tf.sections_[current] = body;
  };
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("@@ ", 0) == 0) {
      flush();
      current = line.substr(3);
      while (!current.empty() && (current.back() == ' ' || current.back() == '\r')) current.pop_back();
      body.clear();
      in_section = true;
    } else if (in_section) {
      body += line;
      body += '\n';
    }
  }
  flush();
  return tf;
}

TemplateFile TemplateFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const std::string& TemplateFile::section(const std::string& name) const {
  const auto it = sections_.find(name);
  if (it == sections_.end()) throw ConfigError("template has no section '" + name + "'");
  return it->second;
}

std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tpl.size());
  for (std::size_t i = 0; i < tpl.size();) {
    if (tpl[i] == '{') {
      const auto close = tpl.find('}', i);
      if (close != std::string_view::npos) {
        const auto it = values.find(std::string(tpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tpl[i++];
  }
  return out;
}

void PromptSpec::validate() const {
  if (kind == PromptKind::generation && !topic) throw ContractError("generation prompt requires a topic");
  if (kind == PromptKind::mt_few_shot && shots < 1) throw ContractError("few-shot prompt requires shots >= 1");
}

std::string build_generation_prompt(const PromptSpec& spec, const SeedPools& pools,
                                    const LanguageNames& names, Rng& rng, const TemplateFile& tpl) {
  spec.validate();
  if (spec.kind != PromptKind::generation) throw ContractError("spec is not a generation prompt");
  const auto& lang_name = names.name(spec.target_lang);
  const std::map<std::string, std::string> base{
      {"lang", lang_name}, {"code", spec.target_lang.str()}, {"topic", spec.topic->label}};

  // Demonstration paragraphs come from other languages only.
  std::vector<const SeedParagraph*> candidates;
  for (const auto& p : pools.seed_paragraphs) {
    if (p.lang != spec.target_lang) candidates.push_back(&p);
  }
  if (spec.k_seed_paragraphs > candidates.size()) {
    throw PoolExhaustedError("requested " + std::to_string(spec.k_seed_paragraphs) +
                             " seed paragraphs, pool has " + std::to_string(candidates.size()));
  }
  const auto sentences_it = pools.seed_sentences.find(spec.target_lang);
  const std::size_t available_sentences =
      sentences_it == pools.seed_sentences.end() ? 0 : sentences_it->second.size();
  if (spec.m_seed_sentences > available_sentences) {
    throw PoolExhaustedError("requested " + std::to_string(spec.m_seed_sentences) +
                             " seed sentences for " + spec.target_lang.str() + ", pool has " +
                             std::to_string(available_sentences));
  }
  const auto para_idx = rng.sample_without_replacement(candidates.size(), spec.k_seed_paragraphs);
  const auto sent_idx = rng.sample_without_replacement(available_sentences, spec.m_seed_sentences);

  std::string out = fill_template(tpl.section("instruction"), base);
  out += "\n\n";
  if (!para_idx.empty()) {
    out += fill_template(tpl.section("paragraphs_header"), base);
    out += '\n';
    for (std::size_t i = 0; i < para_idx.size(); ++i) {
      const auto& p = *candidates[para_idx[i]];
      auto vals = base;
      vals["seed_lang"] = names.name(p.lang);
      vals["text"] = p.text;
      if (i > 0) out += "\n\n";
      out += fill_template(tpl.section("paragraph_item"), vals);
    }
    out += "\n\n";
  }
  if (!sent_idx.empty()) {
    out += fill_template(tpl.section("sentences_header"), base);
    out += '\n';
    for (std::size_t i = 0; i < sent_idx.size(); ++i) {
      auto vals = base;
      vals["text"] = sentences_it->second[sent_idx[i]];
      if (i > 0) out += '\n';
      out += fill_template(tpl.section("sentence_item"), vals);
    }
    out += "\n\n";
  }
  out += fill_template(tpl.section("cue"), base);
  return out;
}

std::string build_generation_prompt(const PromptSpec& spec, const SeedPools& pools,
                                    const LanguageNames& names, Rng& rng) {
  static const TemplateFile builtin = TemplateFile::parse(builtin_generation_template());
  return build_generation_prompt(spec, pools, names, rng, builtin);
}

std::string build_zero_shot_mt_prompt(const LanguageNames& names, const LangCode& src,
                                      const LangCode& tgt, std::string_view sentence) {
  if (sentence.empty()) throw ContractError("cannot build a translation prompt for an empty sentence");
  const auto& s = names.name(src);
  const auto& t = names.name(tgt);
  std::string out = "Translate this from " + s + " to " + t + ":\n";
  out += s;
  out += ": ";
  out += sentence;
  out += '\n';
  out += t;
  out += ':';
  return out;
}

std::string build_few_shot_mt_prompt(const LanguageNames& names,
                                     std::span<const ParallelPair> examples, const LangCode& src,
                                     const LangCode& tgt, std::string_view sentence) {
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const std::string* source_side = nullptr;
    const std::string* target_side = nullptr;
    if (ex.direction.source == src && ex.direction.target == tgt) {
      source_side = &ex.hrl_text;
      target_side = &ex.lrl_text;
    } else if (ex.direction.source == tgt && ex.direction.target == src) {
      source_side = &ex.lrl_text;
      target_side = &ex.hrl_text;
    } else {
      throw ContractError("few-shot example " + std::to_string(i) + " has direction " +
                          ex.direction.str() + ", expected " + src.str() + "/" + tgt.str());
    }
    if (!ex.ok() || source_side->empty() || target_side->empty()) {
      throw ContractError("few-shot example " + std::to_string(i) + " is incomplete");
    }
    out += build_zero_shot_mt_prompt(names, src, tgt, *source_side);
    out += ' ';
    out += *target_side;
    out += "\n\n";
  }
  out += build_zero_shot_mt_prompt(names, src, tgt, sentence);
  return out;
}

void to_json(json& j, const TrainingRecord& r) {
  j = json{{"prompt", r.prompt}, {"completion", r.completion}, {"direction", r.direction}};
}

void from_json(const json& j, TrainingRecord& r) {
  j.at("prompt").get_to(r.prompt);
  j.at("completion").get_to(r.completion);
  j.at("direction").get_to(r.direction);
}

std::vector<TrainingRecord> emit_finetune_records(const LanguageNames& names,
                                                  std::span<const ParallelPair> pairs) {
  if (pairs.empty()) throw ContractError("no pairs to emit fine-tuning records from");
  std::vector<TrainingRecord> out;
  out.reserve(2 * pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (!p.ok()) throw ContractError("pair " + std::to_string(i) + " is marked failed");
    if (p.hrl_text.empty() || p.lrl_text.empty()) {
      throw ContractError("pair " + std::to_string(i) + " has an empty side");
    }
    out.push_back({build_zero_shot_mt_prompt(names, p.hrl_lang(), p.lrl_lang(), p.hrl_text),
                   p.lrl_text, p.direction});
    out.push_back({build_zero_shot_mt_prompt(names, p.lrl_lang(), p.hrl_lang(), p.lrl_text),
                   p.hrl_text, p.direction.reversed()});
  }
  return out;
}

}  // namespace synthpar
