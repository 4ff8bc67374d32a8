#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace synthpar::text {

/// Version tag of the word normalizer below. Persisted in blocklist and index
/// headers so files built with a different normalizer are rejected.
inline constexpr std::string_view kNormalizerSpec = "nfc+lower+strip_punct+ws_split/v1";

std::string nfc(std::string_view s);
std::string to_lower(std::string_view s);

/// Trims Unicode whitespace on both ends.
std::string trim(std::string_view s);

/// Splits on Unicode whitespace; no other transformation.
std::vector<std::string> split_whitespace(std::string_view s);

/// Shared word normalizer: NFC, lowercase, delete punctuation (general
/// category P*), split on whitespace. Used by ROUGE rejection,
/// decontamination and BM25 so the three agree on what a word is.
std::vector<std::string> normalize_words(std::string_view s);

/// MT-metric tokenizer: NFC, lowercase, each punctuation or symbol code point
/// becomes its own token, split on whitespace.
std::vector<std::string> metric_tokens(std::string_view s);

/// Decodes UTF-8 into code points. Invalid sequences become U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

bool is_whitespace(char32_t cp);
bool is_punctuation(char32_t cp);
bool is_letter_or_mark(char32_t cp);
bool is_uppercase(char32_t cp);
bool is_lowercase(char32_t cp);
/// True when the code point carries case (Latin, Cyrillic, ...).
bool is_cased(char32_t cp);
char32_t to_upper(char32_t cp);

}  // namespace synthpar::text
