#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "synthpar/corpus.hpp"
#include "synthpar/rng.hpp"

/// Offline stand-ins for generator and MT backends. Everything here is a pure
/// function of its inputs so every downstream stage runs bit-reproducibly.
namespace synthpar::mock {

/// Synthetic per-language word list. Words are built from a syllable
/// inventory in the language's script, chosen from a hash of the code, so
/// two languages sharing a script still get distinguishable character
/// statistics.
class Vocabulary {
 public:
  explicit Vocabulary(const LangCode& lang);

  const LangCode& lang() const { return lang_; }
  std::string sentence(Rng& rng) const;
  std::string paragraph(Rng& rng) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  LangCode lang_;
  std::vector<std::string> function_words_;
  std::vector<std::string> words_;
  std::string terminator_;
  bool cased_ = true;
};

const Vocabulary& vocabulary(const LangCode& lang);

/// Tagged reversible transform standing in for translation:
/// "[<model>:<src>><tgt>] " followed by the ROT13 of the input.
std::string translate(std::string_view text, std::string_view src_label,
                      std::string_view tgt_label, std::string_view model);

/// Inverse of translate(); nullopt when `text` carries no tag.
std::optional<std::string> untranslate(std::string_view text);

/// Mock completion. An MT-template prompt is answered with translate() of
/// its final source line; any other prompt gets a pseudo-paragraph in the
/// first language code found in it, seeded from (seed, prompt, model).
std::string complete(std::string_view prompt, std::uint64_t seed, std::string_view model);

}  // namespace synthpar::mock
