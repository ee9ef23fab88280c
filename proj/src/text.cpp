#include "mars/text.hpp"

#include <algorithm>
#include <set>

namespace mars::text {

DecodedCodePoint decode_utf8(std::string_view s, std::size_t pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    auto cont = [&](std::size_t i) -> int {
        if (pos + i >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[pos + i]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) return {b0, 1};
    if ((b0 & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
    } else if ((b0 & 0xF0) == 0xE0) {
        const int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0)
            return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
    } else if ((b0 & 0xF8) == 0xF0) {
        const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0)
            return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
    }
    return {b0, 1};
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

namespace {

char32_t fold_cp(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    // Latin Extended-A pairs upper/lower on even/odd code points, except the
    // 0x138-0x148 and 0x179-0x17E ranges which pair odd/even.
    if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;
    if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
    if (cp >= 0x14A && cp <= 0x177 && cp % 2 == 0) return cp + 1;
    if (cp >= 0x179 && cp <= 0x17E && cp % 2 == 1) return cp + 1;
    if (cp == 0x178) return 0xFF;
    return cp;
}

}  // namespace

std::string casefold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto d = decode_utf8(s, i);
        const char32_t folded = fold_cp(d.cp);
        if (folded == d.cp) {
            out.append(s.substr(i, d.length));
        } else {
            append_utf8(out, folded);
        }
        i += d.length;
    }
    return out;
}

bool is_alnum(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    }
    if (cp < 0xC0) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
    if (cp == 0xD7 || cp == 0xF7) return false;
    if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, symbols, arrows
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    if (cp >= 0x1F000) return false;                  // emoji
    return true;
}

bool is_word_char(char32_t cp) {
    return is_alnum(cp) || cp == '\'' || cp == 0x2019;
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::string normalise_name(std::string_view s) {
    std::string out;
    for (auto tok : whitespace_tokens(s)) {
        if (!out.empty()) out.push_back(' ');
        out += casefold(tok);
    }
    return out;
}

std::vector<std::string_view> whitespace_tokens(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        const std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::size_t whitespace_token_count(std::string_view s) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : s) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++n;
        }
    }
    return n;
}

std::vector<std::string> word_tokens(std::string_view s) {
    const std::string folded = casefold(s);
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < folded.size();) {
        const auto d = decode_utf8(folded, i);
        if (is_alnum(d.cp)) {
            cur.append(folded, i, d.length);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
        i += d.length;
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    for (auto tok : whitespace_tokens(s)) {
        for (std::size_t i = 0; i < tok.size();) {
            const auto d = decode_utf8(tok, i);
            if (is_alnum(d.cp)) {
                ++n;
                break;
            }
            i += d.length;
        }
    }
    return n;
}

double jaccard(std::string_view a, std::string_view b) {
    const auto ta = word_tokens(a);
    const auto tb = word_tokens(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

TokenCounter whitespace_counter() {
    return [](std::string_view s) { return whitespace_token_count(s); };
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto nl = s.find('\n', start);
        const auto end = nl == std::string_view::npos ? s.size() : nl;
        auto line = s.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.emplace_back(line);
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace mars::text
