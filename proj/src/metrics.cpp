#include "streammem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "streammem/error.hpp"
#include "streammem/text.hpp"

namespace streammem {

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::PreIns: return "PreIns";
        case Stage::StateUpdate: return "StateUpdate";
        case Stage::PostIns: return "PostIns";
        case Stage::PreRet: return "PreRet";
        case Stage::Search: return "Search";
        case Stage::PostRet: return "PostRet";
        case Stage::Generation: return "Generation";
    }
    return "Unknown";
}

std::optional<Stage> stage_from_string(std::string_view name) {
    for (Stage s : kAllStages) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

bool is_insertion_stage(Stage s) { return s == Stage::PreIns || s == Stage::StateUpdate || s == Stage::PostIns; }
bool is_retrieval_stage(Stage s) { return s == Stage::PreRet || s == Stage::Search || s == Stage::PostRet; }

}  // namespace streammem

namespace streammem::metrics {

TokenSet tokenize_for_scoring(std::string_view s) { return TokenSet{text::normalize_tokens(s)}; }

double token_f1(const TokenSet& prediction, const TokenSet& gold) {
    const auto& p = prediction.tokens;
    const auto& g = gold.tokens;
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    std::unordered_map<std::string_view, long> counts;
    for (const auto& t : g) ++counts[t];
    long common = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

double token_f1(std::string_view prediction, std::string_view gold) {
    return token_f1(tokenize_for_scoring(prediction), tokenize_for_scoring(gold));
}

double degradation(std::span<const double> roundwise) {
    if (roundwise.size() < 2) throw Error(ErrorCode::DegenerateInput, "degradation needs at least two rounds");
    const double first = roundwise.front();
    if (first == 0.0) throw Error(ErrorCode::DegenerateInput, "first round F1 is zero");
    const double pct = 100.0 * (roundwise.back() - first) / first;
    return std::round(pct * 10.0) / 10.0;
}

double nearest_rank(std::vector<double> samples, double p) {
    if (samples.empty()) return 0.0;
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, samples.size());
    return samples[rank - 1];
}

LatencySummary summarize(std::span<const double> samples_us) {
    LatencySummary s;
    s.count = samples_us.size();
    if (samples_us.empty()) return s;
    std::vector<double> v(samples_us.begin(), samples_us.end());
    s.mean_us = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    s.p50_us = nearest_rank(v, 50.0);
    s.p95_us = nearest_rank(std::move(v), 95.0);
    return s;
}

std::map<Stage, LatencySummary> latency_aggregate(std::span<const StageTiming> timings) {
    std::map<Stage, std::vector<double>> by_stage;
    for (const auto& t : timings) by_stage[t.stage].push_back(t.wall_us);
    std::map<Stage, LatencySummary> out;
    for (const auto& [stage, samples] : by_stage) out[stage] = summarize(samples);
    return out;
}

}  // namespace streammem::metrics
