#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace streammem {

/// Lifecycle stages that carry latency. The first three make up insertion,
/// the next three retrieval; Generation is reported on its own.
enum class Stage { PreIns, StateUpdate, PostIns, PreRet, Search, PostRet, Generation };

inline constexpr Stage kAllStages[] = {Stage::PreIns,  Stage::StateUpdate, Stage::PostIns,   Stage::PreRet,
                                       Stage::Search, Stage::PostRet,     Stage::Generation};

std::string_view to_string(Stage stage);
std::optional<Stage> stage_from_string(std::string_view name);
bool is_insertion_stage(Stage stage);
bool is_retrieval_stage(Stage stage);

struct StageTiming {
    Stage stage;
    double wall_us = 0.0;
};

}  // namespace streammem

namespace streammem::metrics {

/// Normalized token multiset: lowercased, punctuation-stripped,
/// Porter-stemmed, stopwords kept.
struct TokenSet {
    std::vector<std::string> tokens;
};

TokenSet tokenize_for_scoring(std::string_view s);

/// Multiset-overlap F1. Both sides empty scores 1, exactly one empty 0.
double token_f1(std::string_view prediction, std::string_view gold);
double token_f1(const TokenSet& prediction, const TokenSet& gold);

/// Percentage change from the first to the last round,
/// 100 * (last - first) / first, rounded to one decimal.
/// Throws DegenerateInput when fewer than two rounds or first == 0.
double degradation(std::span<const double> roundwise);

struct LatencySummary {
    double mean_us = 0.0;
    double p50_us = 0.0;
    double p95_us = 0.0;
    std::size_t count = 0;
};

/// Nearest-rank percentile (p in (0, 100]) of an unsorted sample.
double nearest_rank(std::vector<double> samples, double p);

LatencySummary summarize(std::span<const double> samples_us);

/// Per-stage summaries. Stages with no samples are absent from the map.
std::map<Stage, LatencySummary> latency_aggregate(std::span<const StageTiming> timings);

}  // namespace streammem::metrics
