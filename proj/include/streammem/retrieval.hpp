#pragma once

#include <map>
#include <string>
#include <vector>

#include "streammem/gateway.hpp"
#include "streammem/operators.hpp"
#include "streammem/store.hpp"
#include "streammem/stream.hpp"

namespace streammem {

// ---------------------------------------------------------------------------
// Query formulation (PreRet). Gateway calls are attributed to PreRet.

struct FormulateResult {
    RetrievalSignal signal;
    /// Per-sub-query embeddings, parallel to signal.sub_queries.
    std::vector<Embedding> sub_embeddings;
    /// The strategy fell back to plain embedding retrieval.
    bool fallback = false;
    bool gateway_failed = false;
    /// Number of chat calls made.
    int chat_calls = 0;
};

FormulateResult formulate_none(const RetrievePayload& q, Gateway& gateway);
/// Fail-open: a gateway error gives skip = false with gateway_failed set.
FormulateResult formulate_validate(const RetrievePayload& q, Gateway& gateway);
/// Keywords replace the raw query as the lexical signal (or are appended to
/// it when `augment`); the embedding covers the keyword string. An empty
/// extraction falls back to formulate_none.
FormulateResult formulate_keyword(const RetrievePayload& q, Gateway& gateway, int max_keywords, bool augment = false);
FormulateResult formulate_decompose(const RetrievePayload& q, Gateway& gateway, int max_subqueries);
FormulateResult formulate(const RetrievePayload& q, Gateway& gateway, const FormulateConfig& psi);

/// Runs the signal against the store. With sub-queries, each one retrieves
/// ceil(K / n) and the lists are RRF-fused (top K kept).
std::vector<Candidate> search(MemoryStore& store, const FormulateResult& f, std::size_t k, Timestamp query_ts,
                              int k_rrf = 60);

// ---------------------------------------------------------------------------
// Context integration (PostRet).

struct Provenance {
    std::string record_id;
    double score = 0.0;
    Timestamp ts;
    std::string session_id;
    int turn_index = 0;
    RecordKind kind = RecordKind::RawTurn;
};

struct ContextBundle {
    std::string text;
    std::vector<Provenance> provenance;
    int token_estimate = 0;
    /// A record was left out to respect the budget.
    bool truncated = false;
};

/// ceil(1.3 * whitespace words).
int estimate_tokens(std::string_view text);
/// "[ts=<iso>] <speaker>: <text>" ("[ts=<iso>] <text>" without a speaker).
std::string context_line(const MemoryRecord& record);

/// Concatenates candidate lines in list order, stopping before the first
/// record that would exceed the budget. Duplicate ids are skipped.
ContextBundle integrate_none(const std::vector<Candidate>& cands, int budget_tokens = 2048);

/// score * exp(-lambda * age_days), re-sorted descending (stable).
std::vector<Candidate> integrate_time_weighted(std::vector<Candidate> cands, Timestamp now, double lambda);
/// Keeps score >= threshold in the original order.
std::vector<Candidate> integrate_threshold(std::vector<Candidate> cands, double threshold);
/// Up to quota per tier (short, mid, long, n/a), dedup by id keeping the
/// max score, sorted by score descending then id.
std::vector<Candidate> integrate_multi_tier(const std::map<Tier, std::vector<Candidate>>& per_tier,
                                            const std::map<Tier, int>& quotas);
/// Groups candidates by tier for integrate_multi_tier.
std::map<Tier, std::vector<Candidate>> group_by_tier(const std::vector<Candidate>& cands);
/// Each raw_turn candidate is followed by its stored neighbours within
/// +/- window turns of the same session, with score 0. No duplicates.
std::vector<Candidate> integrate_augment(const std::vector<Candidate>& cands, const MemoryStore& store, int window);

struct MultiQueryResult {
    std::vector<Candidate> cands;
    bool gateway_failed = false;
    int chat_calls = 0;
};

/// Paraphrases the query n times, retrieves k per paraphrase and RRF-fuses
/// every list with the original one (top k kept). Gateway errors return the
/// original candidates. Calls are attributed to PostRet.
MultiQueryResult integrate_multi_query(const RetrievePayload& q, const std::vector<Candidate>& cands,
                                       MemoryStore& store, Gateway& gateway, int n_queries, std::size_t k,
                                       Timestamp query_ts, int k_rrf = 60);

}  // namespace streammem
