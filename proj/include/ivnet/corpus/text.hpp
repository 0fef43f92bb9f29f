#ifndef IVNET_CORPUS_TEXT_HPP
#define IVNET_CORPUS_TEXT_HPP

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace ivnet {

namespace special {
inline constexpr std::string_view kUnk = "<UNK>";
inline constexpr std::string_view kEmpty = "<EMPTY>";
inline constexpr std::string_view kUrl = "<URL>";
inline constexpr std::string_view kMath = "<MATH>";
inline constexpr std::string_view kTimeref = "<TIMEREF>";
}  // namespace special

/// Specials in their fixed vocabulary order.
inline constexpr std::array<std::string_view, 5> kSpecialTokens = {special::kUnk, special::kEmpty, special::kUrl,
                                                                   special::kMath, special::kTimeref};

inline bool is_special(std::string_view token) {
    for (const auto s : kSpecialTokens) {
        if (s == token) {
            return true;
        }
    }
    return false;
}

/// One named rewrite applied to post text.
struct ReplacementRule {
    std::string name;
    std::function<std::string(const std::string &)> apply;
};

namespace detail {

inline ReplacementRule regex_rule(std::string name, const std::string &pattern, std::string replacement) {
    auto re = std::make_shared<const std::regex>(pattern, std::regex::ECMAScript | std::regex::optimize);
    return {std::move(name), [re, replacement](const std::string &text) {
                return std::regex_replace(text, *re, replacement);
            }};
}

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Byte length of a (non-ASCII) Unicode whitespace sequence at `pos`, or 0.
// Covers NBSP, U+2000..U+200A, U+2028/9, U+202F, U+205F and U+3000.
inline std::size_t unicode_space_len(std::string_view s, std::size_t pos) {
    const auto b = [&](std::size_t i) { return static_cast<unsigned char>(s[pos + i]); };
    const std::size_t left = s.size() - pos;
    if (left >= 2 && b(0) == 0xC2 && b(1) == 0xA0) {
        return 2;
    }
    if (left >= 3 && b(0) == 0xE2 && b(1) == 0x80 && ((b(2) >= 0x80 && b(2) <= 0x8A) || b(2) == 0xA8 ||
                                                      b(2) == 0xA9 || b(2) == 0xAF)) {
        return 3;
    }
    if (left >= 3 && b(0) == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) {
        return 3;
    }
    if (left >= 3 && b(0) == 0xE3 && b(1) == 0x80 && b(2) == 0x80) {
        return 3;
    }
    return 0;
}

// Marks whose co-occurrence (two distinct kinds) inside a whitespace-free
// run flags that run as a formula.
inline constexpr std::array<std::string_view, 5> kMathMarks = {"=", "^", "_", "\\frac", "\xE2\x88\x91"};

inline std::string replace_math_runs(const std::string &text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (is_ascii_space(text[i])) {
            out.push_back(text[i++]);
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && !is_ascii_space(text[j])) {
            ++j;
        }
        const std::string_view run(text.data() + i, j - i);
        int kinds = 0;
        for (const auto mark : kMathMarks) {
            kinds += run.find(mark) != std::string_view::npos ? 1 : 0;
        }
        if (kinds >= 2) {
            out += special::kMath;
        } else {
            out += run;
        }
        i = j;
    }
    return out;
}

}  // namespace detail

/// The default rule table, applied in order: URLs, delimited math, formula
/// runs, then lecture-video timestamps.
inline std::vector<ReplacementRule> default_replacement_rules() {
    std::vector<ReplacementRule> rules;
    rules.push_back(detail::regex_rule("url", R"((?:(?:https?|ftp)://|www\.)[^\s<>"]*[^\s<>".,;:!?)\]}'])",
                                       std::string(special::kUrl)));
    rules.push_back(detail::regex_rule(
        "math_delimited", R"(\$\$[\s\S]+?\$\$|\$[^\s$](?:[^$\n]*[^\s$])?\$|\\\([\s\S]+?\\\)|\\\[[\s\S]+?\\\])",
        std::string(special::kMath)));
    rules.push_back({"math_run", detail::replace_math_runs});
    rules.push_back(
        detail::regex_rule("timeref", R"(\b\d{1,2}:[0-5]\d(?::[0-5]\d)?\b)", std::string(special::kTimeref)));
    return rules;
}

/// Replace URLs, equations and video timestamps with placeholder tokens.
/// Idempotent for the default rules.
inline std::string replace_tokens(const std::string &text, const std::vector<ReplacementRule> &rules) {
    std::string out = text;
    for (const auto &rule : rules) {
        out = rule.apply(out);
    }
    return out;
}

inline std::string replace_tokens(const std::string &text) {
    static const std::vector<ReplacementRule> rules = default_replacement_rules();
    return replace_tokens(text, rules);
}

/// Lowercase, split on whitespace and at punctuation boundaries. Each ASCII
/// punctuation character becomes its own token; special placeholders stay
/// whole. Non-ASCII bytes are treated as word characters.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string word;
    const auto flush = [&] {
        if (!word.empty()) {
            tokens.push_back(std::move(word));
            word.clear();
        }
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (detail::is_ascii_space(c)) {
            flush();
            ++i;
            continue;
        }
        if (const std::size_t n = detail::unicode_space_len(text, i); n > 0) {
            flush();
            i += n;
            continue;
        }
        if (c == '<') {
            bool matched = false;
            for (const auto s : kSpecialTokens) {
                if (text.substr(i, s.size()) == s) {
                    flush();
                    tokens.emplace_back(s);
                    i += s.size();
                    matched = true;
                    break;
                }
            }
            if (matched) {
                continue;
            }
        }
        const auto uc = static_cast<unsigned char>(c);
        if (uc >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z')) {
            word.push_back(c);
        } else if (c >= 'A' && c <= 'Z') {
            word.push_back(static_cast<char>(c - 'A' + 'a'));
        } else {
            flush();
            tokens.emplace_back(1, c);
        }
        ++i;
    }
    flush();
    return tokens;
}

}  // namespace ivnet

#endif
