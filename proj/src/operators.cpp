#include "streammem/operators.hpp"

#include <algorithm>

#include "streammem/error.hpp"

namespace streammem {

namespace {

constexpr std::string_view kNormalize[] = {"none", "enrich", "rewrite"};
constexpr std::string_view kConsolidate[] = {"none",           "crud",           "forgetting_curve",
                                             "heat_migration", "link_evolution", "semantic_consolidation"};
constexpr std::string_view kFormulate[] = {"none", "validate", "keyword", "decompose"};
constexpr std::string_view kIntegrate[] = {"none", "time_weighted", "threshold", "multi_tier", "augment", "multi_query"};

void require_one_of(std::string_view key, const std::string& value, std::span<const std::string_view> valid) {
    if (std::find(valid.begin(), valid.end(), value) != valid.end()) return;
    std::string names;
    for (auto v : valid) names += (names.empty() ? "" : ", ") + std::string(v);
    throw Error(ErrorCode::ConfigError,
                std::string(key) + ": unknown strategy '" + value + "' (valid: " + names + ")");
}

void require_unit(std::string_view key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::ConfigError, std::string(key) + " must lie in [0, 1], got " + std::to_string(v));
    }
}

void require_at_least(std::string_view key, double v, double lo) {
    if (!(v >= lo)) {
        throw Error(ErrorCode::ConfigError,
                    std::string(key) + " must be >= " + std::to_string(lo) + ", got " + std::to_string(v));
    }
}

}  // namespace

std::span<const std::string_view> normalize_strategies() { return kNormalize; }
std::span<const std::string_view> consolidate_strategies() { return kConsolidate; }
std::span<const std::string_view> formulate_strategies() { return kFormulate; }
std::span<const std::string_view> integrate_strategies() { return kIntegrate; }

void OperatorConfig::validate() const {
    require_one_of("operators.normalize.strategy", phi.strategy, kNormalize);
    require_one_of("operators.consolidate.strategy", theta.strategy, kConsolidate);
    require_one_of("operators.formulate.strategy", psi.strategy, kFormulate);
    require_one_of("operators.integrate.strategy", integration.strategy, kIntegrate);

    require_at_least("operators.normalize.max_triplets", phi.max_triplets, 1);
    require_at_least("operators.normalize.summary_max_sentences", phi.summary_max_sentences, 1);

    require_unit("operators.consolidate.retention_threshold", theta.retention_threshold);
    require_unit("operators.consolidate.link_threshold", theta.link_threshold);
    require_unit("operators.consolidate.dedup_threshold", theta.dedup_threshold);
    require_at_least("operators.consolidate.heat_alpha", theta.heat_alpha, 0.0);
    require_at_least("operators.consolidate.heat_beta", theta.heat_beta, 0.0);
    require_at_least("operators.consolidate.heat_tau_s", theta.heat_tau_s, 1e-9);
    if (theta.cold_threshold > theta.hot_threshold) {
        throw Error(ErrorCode::ConfigError, "operators.consolidate.cold_threshold exceeds hot_threshold");
    }
    require_at_least("operators.consolidate.link_top_m", theta.link_top_m, 0);
    require_at_least("operators.consolidate.crud_neighbors", theta.crud_neighbors, 0);
    require_at_least("operators.consolidate.fire_every", theta.fire_every, 1);

    require_at_least("operators.formulate.max_keywords", psi.max_keywords, 1);
    require_at_least("operators.formulate.max_subqueries", psi.max_subqueries, 1);

    require_at_least("operators.k", K, 1);

    require_at_least("operators.integrate.decay_lambda", integration.decay_lambda, 0.0);
    require_unit("operators.integrate.score_threshold", integration.score_threshold);
    require_at_least("operators.integrate.augment_window", integration.augment_window, 0);
    require_at_least("operators.integrate.multi_query_count", integration.multi_query_count, 1);
    require_at_least("operators.integrate.budget_tokens", integration.budget_tokens, 1);
    for (const auto& [tier, quota] : integration.tier_quotas) {
        require_at_least("operators.integrate.tier_quotas." + std::string(to_string(tier)), quota, 0);
    }
}

}  // namespace streammem
