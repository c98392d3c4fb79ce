// Character/symbol vocabulary. Ids are dense from 0, the four special symbols
// are always present, and the table is frozen after construction so unseen
// test-time symbols map to <unk>.
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "normshare/common.hpp"

namespace normshare {

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    Vocabulary() {
        add("<pad>");
        add("<s>");
        add("</s>");
        add("<unk>");
    }

    int add(const std::string& symbol) {
        auto it = ids_.find(symbol);
        if (it != ids_.end()) return it->second;
        if (frozen_) throw ContractError(cat("vocabulary is frozen; cannot add symbol '", symbol, "'"));
        const int id = static_cast<int>(symbols_.size());
        symbols_.push_back(symbol);
        ids_.emplace(symbol, id);
        return id;
    }

    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

    int id_of(const std::string& symbol) const {
        auto it = ids_.find(symbol);
        return it == ids_.end() ? kUnk : it->second;
    }

    bool contains(const std::string& symbol) const { return ids_.count(symbol) > 0; }

    const std::string& symbol_of(int id) const {
        if (id < 0 || id >= static_cast<int>(symbols_.size()))
            throw IndexError(cat("vocabulary id ", id, " out of range [0,", symbols_.size(), ")"));
        return symbols_[static_cast<size_t>(id)];
    }

    int size() const { return static_cast<int>(symbols_.size()); }

    static bool is_special(int id) { return id >= 0 && id <= kUnk; }

    std::vector<int> encode(const std::vector<std::string>& symbols) const {
        std::vector<int> out;
        out.reserve(symbols.size());
        for (const auto& s : symbols) out.push_back(id_of(s));
        return out;
    }

    // All symbols in id order (used by checkpoint serialization).
    const std::vector<std::string>& symbols() const { return symbols_; }

    static Vocabulary from_symbols(const std::vector<std::string>& symbols) {
        Vocabulary v;
        if (symbols.size() < 4 || symbols[0] != "<pad>" || symbols[1] != "<s>" || symbols[2] != "</s>" ||
            symbols[3] != "<unk>")
            throw ParseError("vocabulary table must start with <pad>, <s>, </s>, <unk>");
        for (size_t i = 4; i < symbols.size(); ++i) v.add(symbols[i]);
        v.freeze();
        return v;
    }

private:
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, int> ids_;
    bool frozen_ = false;
};

}  // namespace normshare
