#pragma once

#include <string>
#include <utility>
#include <vector>

#include "streammem/gateway.hpp"
#include "streammem/operators.hpp"
#include "streammem/store.hpp"
#include "streammem/stream.hpp"

namespace streammem {

// ---------------------------------------------------------------------------
// Normalization (PreIns). Embedding and chat calls are attributed to PreIns.

std::vector<MemoryRecord> normalize_none(const InsertPayload& h, Timestamp ts, Gateway& gateway);

/// Raw record plus one summary record. Throws GatewayError(EmptyCompletion)
/// when the summary comes back blank.
std::vector<MemoryRecord> normalize_enrich(const InsertPayload& h, Timestamp ts, Gateway& gateway,
                                           int max_sentences = 2);

/// Parses "subject | relation | object" lines. "no facts" (or a blank reply)
/// yields nothing; other malformed lines throw UnparseableExtraction. Keeps
/// the first max_triplets.
std::vector<Triplet> parse_triplets(std::string_view reply, int max_triplets, const std::string& source_record);

/// Triplets for one turn. The raw text is not kept anywhere.
std::vector<Triplet> normalize_rewrite(const InsertPayload& h, Gateway& gateway, int max_triplets = 5);

/// kind=triplet records over the linearized triplets, embedded in one call.
std::vector<MemoryRecord> triplet_records(const std::vector<Triplet>& triplets, const InsertPayload& h, Timestamp ts,
                                          Gateway& gateway);

/// Dispatches on phi.strategy.
std::vector<MemoryRecord> normalize(const InsertPayload& h, Timestamp ts, Gateway& gateway,
                                    const NormalizeConfig& phi);

// ---------------------------------------------------------------------------
// Consolidation (PostIns). `now` is the stream clock, never wall time.

enum class ActionKind { Add, Update, Delete, Noop, Evict, Migrate, Link, Merge };
std::string_view to_string(ActionKind kind);

struct ConsolidationAction {
    ActionKind kind = ActionKind::Noop;
    /// The unit the action concerns (the new unit for CRUD actions).
    std::string record_id;
    /// UPDATE/DELETE target, link peer, merge survivor, or migration tier.
    std::string target;
};

struct ConsolidationResult {
    std::vector<ConsolidationAction> actions;
    /// Set when a gateway error forced the fail-open path.
    bool gateway_failed = false;
};

ConsolidationResult consolidate_none();

/// Shows the gateway each new unit with its nearest existing records and
/// applies the returned action. NOOP and ADD keep the tentative insert;
/// UPDATE rewrites the target with the new text (ts = now) and drops the
/// new unit; DELETE removes the target. Gateway errors become NOOP.
ConsolidationResult consolidate_crud(MemoryStore& store, const std::vector<std::string>& new_ids, Gateway& gateway,
                                     Timestamp now, int neighbors = 3);

/// exp(-(now - last_access) / strength).
double retention(const MemoryRecord& record, Timestamp now);
/// Evicts every record whose retention is strictly below the threshold.
std::vector<std::string> forgetting_curve(MemoryStore& store, Timestamp now, double retention_threshold);

double heat(const MemoryRecord& record, Timestamp now, double alpha, double beta, double tau_s);

struct Migration {
    std::string record_id;
    Tier from = Tier::NotApplicable;
    Tier to = Tier::NotApplicable;
    double heat = 0.0;
};

/// Hot records move one tier toward short_term, cold ones one tier away,
/// hottest first. All-zero weights migrate nothing. Throws UnsupportedBackend.
std::vector<Migration> heat_migration(MemoryStore& store, Timestamp now, const ConsolidateConfig& theta);

/// Bidirectional links from `new_id` to at most top_m records with cosine
/// >= threshold. Throws UnsupportedBackend.
std::vector<std::pair<std::string, std::string>> link_evolution(MemoryStore& store, const std::string& new_id,
                                                                int top_m, double threshold);

/// Merges pairs with cosine >= threshold: the older record absorbs the
/// newer one's access stats and text; the newer id is tombstoned. With
/// `only` set, just those records are checked against the rest. Returns
/// (survivor, removed) pairs.
std::vector<std::pair<std::string, std::string>> semantic_consolidation(
    MemoryStore& store, double dedup_threshold, const std::vector<std::string>* only = nullptr);

/// Dispatches on theta.strategy.
ConsolidationResult consolidate(MemoryStore& store, const std::vector<std::string>& new_ids, Gateway& gateway,
                                Timestamp now, const ConsolidateConfig& theta);

}  // namespace streammem
