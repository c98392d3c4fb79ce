// normshare: errors and small string/utf8 helpers shared across the library.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace normshare {

// Error taxonomy. The CLI maps SpecError -> exit 2 and ExclusionError -> exit 3;
// everything else is an ordinary failure.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct DimensionError : Error {
    using Error::Error;
};
struct ParameterError : Error {
    using Error::Error;
};
struct IndexError : Error {
    using Error::Error;
};
struct ContractError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct SpecError : Error {
    using Error::Error;
};
struct ExclusionError : Error {
    using Error::Error;
};

template <class... Parts>
std::string cat(Parts&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    return os.str();
}

// Tag symbols are delimited by U+27E8 / U+27E9 (mathematical angle brackets).
inline constexpr std::string_view kTagOpen = "\xe2\x9f\xa8";   // ⟨
inline constexpr std::string_view kTagClose = "\xe2\x9f\xa9";  // ⟩

inline bool starts_with_tag(std::string_view s) {
    return s.substr(0, kTagOpen.size()) == kTagOpen;
}

inline std::string make_tag(std::string_view key, std::string_view value) {
    return cat(kTagOpen, key, "=", value, kTagClose);
}

// Splits a UTF-8 string into one entry per code point. A ⟨...⟩ group (used for
// language/task tag symbols) is kept as a single entry. Invalid bytes are passed
// through one byte at a time rather than rejected.
inline std::vector<std::string> split_symbols(std::string_view text) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
        size_t len = 1;
        const unsigned char b = static_cast<unsigned char>(text[i]);
        if ((b & 0x80u) == 0x00u)
            len = 1;
        else if ((b & 0xE0u) == 0xC0u)
            len = 2;
        else if ((b & 0xF0u) == 0xE0u)
            len = 3;
        else if ((b & 0xF8u) == 0xF0u)
            len = 4;
        if (i + len > text.size()) len = 1;
        std::string_view cp = text.substr(i, len);
        if (cp == kTagOpen) {
            const size_t close = text.find(kTagClose, i);
            if (close != std::string_view::npos) {
                const size_t end = close + kTagClose.size();
                out.emplace_back(text.substr(i, end - i));
                i = end;
                continue;
            }
        }
        out.emplace_back(cp);
        i += len;
    }
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline std::string trim(std::string_view s) {
    size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r' || s[a] == '\n')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r' || s[b - 1] == '\n')) --b;
    return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline bool contains_inner_whitespace(std::string_view s) {
    for (char c : s)
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return true;
    return false;
}

}  // namespace normshare
