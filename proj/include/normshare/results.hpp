// Result rows and their CSV files. Rows are append-only and keyed by
// (dataset, config, aux, size, seed); reruns skip existing keys, so a completed
// run is idempotent. Wall-clock goes to a separate timings file because it is
// not reproducible byte-for-byte.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "normshare/common.hpp"

namespace normshare {

struct ResultRow {
    std::string dataset;
    std::string config;  // "" rendered as "single"
    std::string aux;     // e.g. "autoenc+g2p+lemma", "none", "zeroshot"
    long size = 0;
    uint64_t seed = 0;
    double accuracy = 0.0;
    double identity = 0.0;
    std::optional<double> error_reduction;

    std::string config_label() const { return config.empty() ? "single" : config; }

    std::string key() const { return cat(dataset, "|", config_label(), "|", aux, "|", size, "|", seed); }
};

namespace detail {

inline std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace detail

class ResultsFile {
public:
    static constexpr const char* kHeader = "dataset,config,aux,size,seed,accuracy,identity,error_reduction";

    static std::vector<ResultRow> load(const std::string& path) {
        std::vector<ResultRow> rows;
        std::ifstream in(path, std::ios::binary);
        if (!in) return rows;
        std::string line;
        bool first = true;
        long line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (first) {
                first = false;
                if (trim(line) != kHeader) throw ParseError(cat(path, ": unexpected results header"));
                continue;
            }
            if (trim(line).empty()) continue;
            const auto cols = split(line, ',');
            if (cols.size() != 8) throw ParseError(cat(path, ":", line_no, ": expected 8 columns"));
            ResultRow r;
            r.dataset = cols[0];
            r.config = cols[1] == "single" ? "" : cols[1];
            r.aux = cols[2];
            r.size = std::stol(cols[3]);
            r.seed = std::stoull(cols[4]);
            r.accuracy = std::stod(cols[5]);
            r.identity = std::stod(cols[6]);
            if (!cols[7].empty()) r.error_reduction = std::stod(cols[7]);
            rows.push_back(std::move(r));
        }
        return rows;
    }

    static std::set<std::string> keys(const std::string& path) {
        std::set<std::string> out;
        for (const auto& r : load(path)) out.insert(r.key());
        return out;
    }

    static void append(const std::string& path, const ResultRow& row) {
        const bool fresh = !std::filesystem::exists(path);
        std::ofstream out(path, std::ios::binary | std::ios::app);
        if (!out) throw Error(cat("cannot write results file: ", path));
        if (fresh) out << kHeader << "\n";
        out << row.dataset << ',' << row.config_label() << ',' << row.aux << ',' << row.size << ',' << row.seed
            << ',' << detail::fmt4(row.accuracy) << ',' << detail::fmt4(row.identity) << ','
            << (row.error_reduction ? detail::fmt4(*row.error_reduction) : std::string()) << "\n";
    }
};

inline void append_timing(const std::string& path, const ResultRow& row, double seconds) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) return;  // timing is best-effort
    if (fresh) out << "dataset,config,aux,size,seed,seconds\n";
    out << row.dataset << ',' << row.config_label() << ',' << row.aux << ',' << row.size << ',' << row.seed << ','
        << detail::fmt4(seconds) << "\n";
}

// Atomic write for derived artifacts: write to a temp file, then rename.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(cat("cannot write file: ", tmp));
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace normshare
