#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "streammem/store.hpp"

namespace streammem {

/// phi: how raw context becomes storable units.
struct NormalizeConfig {
    std::string strategy = "none";  // none | enrich | rewrite
    int max_triplets = 5;
    int summary_max_sentences = 2;
};

/// theta: post-insert maintenance.
struct ConsolidateConfig {
    // none | crud | forgetting_curve | heat_migration | link_evolution | semantic_consolidation
    std::string strategy = "none";
    double retention_threshold = 0.3;
    double heat_alpha = 1.0;
    double heat_beta = 1.0;
    double heat_tau_s = 86400.0;
    double hot_threshold = 2.0;
    double cold_threshold = 0.5;
    int link_top_m = 3;
    double link_threshold = 0.8;
    double dedup_threshold = 0.95;
    int crud_neighbors = 3;
    /// Run the policy after every n-th insert.
    int fire_every = 1;
};

/// psi: query formulation.
struct FormulateConfig {
    std::string strategy = "none";  // none | validate | keyword | decompose
    int max_keywords = 5;
    int max_subqueries = 3;
    /// keyword: add the keywords to the raw query instead of replacing it.
    bool keyword_augment = false;
};

struct IntegrateConfig {
    std::string strategy = "none";  // none | time_weighted | threshold | multi_tier | augment | multi_query
    double decay_lambda = 0.1;      // per day
    double score_threshold = 0.5;
    int augment_window = 1;
    int multi_query_count = 3;
    std::map<Tier, int> tier_quotas = {
        {Tier::ShortTerm, 2}, {Tier::MidTerm, 2}, {Tier::LongTerm, 1}, {Tier::NotApplicable, 5}};
    int budget_tokens = 2048;
};

struct OperatorConfig {
    NormalizeConfig phi;
    ConsolidateConfig theta;
    FormulateConfig psi;
    int K = 5;
    IntegrateConfig integration;

    /// Throws ConfigError naming the offending key.
    void validate() const;
};

std::span<const std::string_view> normalize_strategies();
std::span<const std::string_view> consolidate_strategies();
std::span<const std::string_view> formulate_strategies();
std::span<const std::string_view> integrate_strategies();

}  // namespace streammem
