#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace mars::text {

/// Decodes one UTF-8 code point starting at `pos`. Invalid bytes decode as
/// themselves with length 1 so scanning never stalls.
struct DecodedCodePoint {
    char32_t cp;
    std::size_t length;
};
DecodedCodePoint decode_utf8(std::string_view s, std::size_t pos);

void append_utf8(std::string& out, char32_t cp);

/// Lowercase folding for ASCII, Latin-1 and Latin Extended-A. The mapping is
/// byte-length preserving, so offsets into the folded string are valid
/// offsets into the original.
std::string casefold(std::string_view s);

bool is_alnum(char32_t cp);
/// Letters, digits and apostrophes; used for whole-word boundaries.
bool is_word_char(char32_t cp);
bool is_space(char c);

std::string_view trim(std::string_view s);

/// Lowercased, whitespace-collapsed form used for name comparison.
std::string normalise_name(std::string_view s);

/// Whitespace-delimited tokens.
std::vector<std::string_view> whitespace_tokens(std::string_view s);
std::size_t whitespace_token_count(std::string_view s);

/// Lowercased runs of letters/digits (punctuation and apostrophes split).
std::vector<std::string> word_tokens(std::string_view s);

/// Number of whitespace tokens that contain at least one letter or digit.
std::size_t word_count(std::string_view s);

/// Token-set Jaccard over word_tokens; 0 when both sides are empty.
double jaccard(std::string_view a, std::string_view b);

using TokenCounter = std::function<std::size_t(std::string_view)>;
TokenCounter whitespace_counter();

/// 64-bit FNV-1a; stable across platforms, used to derive seeds.
std::uint64_t fnv1a(std::string_view s, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace mars::text
