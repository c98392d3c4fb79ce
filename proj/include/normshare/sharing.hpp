// Hard-parameter-sharing configuration: which of the six model components
// {S,E,A,T,D,P} are shared across tasks. 2^6 = 64 possible configurations;
// the empty set is single-task training, the full set one model for all tasks.
#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "normshare/common.hpp"

namespace normshare {

struct SharingConfig {
    static constexpr const char* kLetters = "SEATDP";  // canonical order
    uint8_t mask = 0;

    static int letter_index(char c) {
        const char u = (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
        for (int i = 0; i < 6; ++i)
            if (kLetters[i] == u) return i;
        return -1;
    }

    static SharingConfig parse(const std::string& text) {
        SharingConfig cfg;
        for (char c : text) {
            const int idx = letter_index(c);
            if (idx < 0) throw ParseError(cat("unknown component letter '", std::string(1, c), "' in sharing config"));
            const uint8_t bit = static_cast<uint8_t>(1u << idx);
            if (cfg.mask & bit)
                throw ParseError(cat("duplicated component letter '", std::string(1, c), "' in sharing config"));
            cfg.mask |= bit;
        }
        return cfg;
    }

    static SharingConfig full() {
        SharingConfig cfg;
        cfg.mask = 0x3f;
        return cfg;
    }

    bool shares(char letter) const {
        const int idx = letter_index(letter);
        if (idx < 0) throw ParameterError(cat("unknown component letter '", std::string(1, letter), "'"));
        return (mask >> idx) & 1u;
    }

    int count() const { return std::popcount(static_cast<unsigned>(mask)); }
    bool empty() const { return mask == 0; }
    bool is_full() const { return mask == 0x3f; }

    std::string str() const {
        std::string s;
        for (int i = 0; i < 6; ++i)
            if ((mask >> i) & 1u) s += kLetters[i];
        return s;
    }

    bool operator==(const SharingConfig& o) const { return mask == o.mask; }
};

// All 64 configurations ordered by cardinality, then lexicographically in the
// canonical letter order (so the first is "" and the last is "SEATDP").
inline std::vector<SharingConfig> enumerate_configs() {
    std::vector<SharingConfig> out;
    for (int m = 0; m < 64; ++m) {
        SharingConfig c;
        c.mask = static_cast<uint8_t>(m);
        out.push_back(c);
    }
    auto positions = [](const SharingConfig& c) {
        std::vector<int> p;
        for (int i = 0; i < 6; ++i)
            if ((c.mask >> i) & 1u) p.push_back(i);
        return p;
    };
    std::sort(out.begin(), out.end(), [&](const SharingConfig& a, const SharingConfig& b) {
        if (a.count() != b.count()) return a.count() < b.count();
        return positions(a) < positions(b);
    });
    return out;
}

}  // namespace normshare
