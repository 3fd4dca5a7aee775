#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "streammem/text.hpp"

namespace streammem::testing {

// Reference F1: own ASCII tokenizer and quadratic matching.
inline std::vector<std::string> ref_tokens(const std::string& s) {
    std::string cleaned;
    for (char c : s) {
        if (std::ispunct(static_cast<unsigned char>(c))) continue;
        cleaned += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    std::istringstream in(cleaned);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(text::porter_stem(w));
    return out;
}

inline double ref_f1(const std::string& pred, const std::string& gold) {
    const auto p = ref_tokens(pred);
    const auto g = ref_tokens(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    std::vector<bool> used(g.size(), false);
    std::size_t common = 0;
    for (const auto& t : p) {
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (!used[j] && g[j] == t) {
                used[j] = true;
                ++common;
                break;
            }
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

inline std::string random_phrase(std::mt19937_64& rng) {
    static const std::vector<std::string> vocab = {
        "the",     "a",       "Camping", "camped", "running", "runs",   "Paris",  "paris!", "went",  "going",
        "hiking,", "hikes",   "of",      "is",     "Melanie", "tea",    "teas",   "2023",   "May",   "caresses",
        "ponies",  "pony",    "relational", "connect", "connected", "it's", "(yes)", "no.",  "sky",   "generalization"};
    std::uniform_int_distribution<int> len(0, 8);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::string out;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) out += (i ? " " : "") + vocab[pick(rng)];
    return out;
}

struct PorterSuite {
    std::size_t checked = 0;
    std::size_t mismatches = 0;
    std::string first_bad;
    bool opened = false;
};

/// Runs porter_stem over a "word<TAB>stem" vector file.
inline PorterSuite run_porter_suite(const std::string& path) {
    PorterSuite out;
    std::ifstream in(path);
    out.opened = static_cast<bool>(in);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        const auto word = line.substr(0, tab);
        const auto stem = line.substr(tab + 1);
        ++out.checked;
        if (text::porter_stem(word) != stem) {
            if (out.mismatches++ == 0) out.first_bad = word + " -> " + text::porter_stem(word) + " (want " + stem + ")";
        }
    }
    return out;
}

/// Exhaustive cosine top-k over unit vectors, ties by index.
inline std::vector<std::size_t> brute_force_top_k(const std::vector<std::vector<float>>& data, std::span<const float> q,
                                                  std::size_t k) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double dot = 0.0;
        for (std::size_t d = 0; d < q.size(); ++d) dot += static_cast<double>(data[i][d]) * q[d];
        scored.emplace_back(-dot, i);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) out.push_back(scored[i].second);
    return out;
}

}  // namespace streammem::testing
