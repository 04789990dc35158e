#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccaudit::text {

/// Identifier recorded in reports so hit counts can be tied to the rule that produced them.
inline constexpr std::string_view kTokenizerVersion = "tok-v1/icu-simple-case";

struct DecodeResult {
    std::string text;          // valid UTF-8
    std::size_t replacements;  // number of U+FFFD substituted for ill-formed input
};

// Decodes bytes as UTF-8. Each maximal ill-formed subsequence becomes one U+FFFD.
DecodeResult decode_utf8(std::span<const std::uint8_t> bytes);
DecodeResult decode_utf8(std::string_view bytes);

// Code points of a valid UTF-8 string.
std::u32string to_code_points(std::string_view utf8);
std::string from_code_points(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

std::string to_lower(std::string_view utf8);
std::string to_upper(std::string_view utf8);

// Matching/feature tokenizer: lowercase, split on any non-alphanumeric code
// point, drop empty tokens. Shared by lexicon matching and the classifier.
std::vector<std::string> tokenize(std::string_view utf8);

// Language-ID normalization: lowercase, runs of non-word characters collapse
// to a single space, no leading or trailing space. Returned as code points.
std::u32string normalize_for_langid(std::string_view utf8);

} // namespace ccaudit::text
