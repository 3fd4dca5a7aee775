#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "streammem/gateway.hpp"
#include "streammem/time.hpp"

namespace streammem {

enum class RecordKind { RawTurn, Summary, Triplet, Note };
enum class Tier { ShortTerm, MidTerm, LongTerm, NotApplicable };
enum class SourceIndex { Lexical, Vector, Lsh, Graph, Queue, Summary };

std::string_view to_string(RecordKind kind);
std::string_view to_string(Tier tier);
std::string_view to_string(SourceIndex source);

struct Triplet {
    std::string subject;
    std::string relation;
    std::string object;
    /// Id of the raw turn the triplet was extracted from ("<session>#<turn>").
    /// Rewrite normalization never stores that turn.
    std::string source_record;

    /// "subject relation object"
    std::string linearize() const;
};

struct MemoryRecord {
    std::string record_id;  // assigned by the store when empty
    std::string text;
    std::optional<Embedding> embedding;
    Timestamp ts;
    std::string session_id;
    int turn_index = 0;
    std::optional<std::string> speaker;
    RecordKind kind = RecordKind::RawTurn;
    int access_count = 0;
    Timestamp last_access;
    double strength = 0.0;  // seconds; the store fills in its initial value when <= 0
    double heat = 0.0;
    std::set<std::string> links;
    std::optional<Triplet> triplet;
    Tier tier = Tier::NotApplicable;
};

struct RetrievalSignal {
    std::string raw_query;
    std::optional<Embedding> embedding;
    std::optional<std::vector<std::string>> keywords;
    std::optional<std::vector<std::string>> sub_queries;
    bool skip = false;
};

struct Candidate {
    MemoryRecord record;
    double score = 0.0;
    SourceIndex source_index = SourceIndex::Vector;
    Tier tier = Tier::NotApplicable;
};

struct StoreStats {
    std::size_t record_count = 0;
    std::map<Tier, std::size_t> per_tier;
    std::map<std::string, std::size_t> index_sizes;
    std::size_t evicted_total = 0;
};

/// An id with a score, used for ranked lists.
struct Scored {
    std::string id;
    double score = 0.0;
};

/// Reciprocal-rank fusion: score(d) = sum over lists of 1 / (k_rrf + rank),
/// rank 1-based. Duplicate ids inside one list count once (first rank).
/// Output sorted by score descending, then id ascending.
std::vector<Scored> rrf_fuse(const std::vector<std::vector<std::string>>& lists, int k_rrf = 60);
std::vector<Scored> fuse_scores(const std::vector<std::string>& lexical, const std::vector<std::string>& vector,
                                int k_rrf = 60);

/// Sign bits of dot(embedding, hyperplane_j): bit j set iff the dot is >= 0.
/// At most 64 hyperplanes. Throws DimensionMismatch.
std::uint64_t lsh_signature(std::span<const float> embedding, const std::vector<std::vector<float>>& hyperplanes);

/// Random-hyperplane LSH over ids: `tables` tables of `bits` Gaussian
/// hyperplanes each, drawn from a seeded generator.
class LshIndex {
public:
    LshIndex(std::size_t dimension, std::size_t bits, std::size_t tables, std::uint64_t seed);

    void add(const std::string& id, std::span<const float> embedding);
    void remove(const std::string& id, std::span<const float> embedding);
    /// Union of the query's buckets across all tables, sorted by id.
    std::vector<std::string> candidates(std::span<const float> query) const;
    std::size_t bucket_count() const;

private:
    std::size_t dimension_;
    std::vector<std::vector<std::vector<float>>> planes_;  // [table][bit]
    std::vector<std::map<std::uint64_t, std::set<std::string>>> buckets_;
};

enum class HybridMode { Hybrid, LexicalOnly, VectorOnly };

struct StoreOptions {
    std::size_t dimension = 256;
    std::uint64_t seed = 0;
    /// fifo_queue capacity C.
    std::size_t capacity = 32;
    /// When false a full fifo_queue throws CapacityExceeded instead of evicting.
    bool evict_on_overflow = true;
    /// queue_segment short-term capacity.
    std::size_t short_term_capacity = 32;
    std::size_t lsh_bits = 16;
    std::size_t lsh_tables = 8;
    HybridMode hybrid_mode = HybridMode::Hybrid;
    int k_rrf = 60;
    /// Per-index list length fed into fusion (at least K).
    std::size_t fusion_pool = 50;
    double graph_entity_weight = 1.0;
    /// summary_vector: how many per-turn first sentences a session summary keeps.
    std::size_t summary_window = 8;
    /// Initial retention strength S0 in seconds (7 days).
    double initial_strength_s = 7.0 * 86400.0;
    double strength_gain = 2.0;
};

/// Uniform contract over the storage backends.
///
/// Every retrieval hit bumps access_count, sets last_access to the query
/// timestamp and multiplies strength by strength_gain. Retrieve asserts
/// that each candidate is strictly older than the query.
class MemoryStore {
public:
    explicit MemoryStore(StoreOptions options);
    virtual ~MemoryStore() = default;
    MemoryStore(const MemoryStore&) = delete;
    MemoryStore& operator=(const MemoryStore&) = delete;

    virtual std::string_view name() const = 0;

    /// Stores the units and returns their ids. Units with an empty record_id
    /// get a fresh one. Throws DimensionMismatch, CapacityExceeded, or
    /// CausalityViolation when `now` moves backwards.
    std::vector<std::string> insert(std::vector<MemoryRecord> units, Timestamp now);

    /// At most k candidates by descending score, ties by record_id. Scores
    /// lie in [0, 1]. Throws EmptySignal.
    std::vector<Candidate> retrieve(const RetrievalSignal& signal, std::size_t k, Timestamp query_ts);

    // Maintenance hooks.
    const MemoryRecord* find(const std::string& id) const;
    /// Live records in id order.
    std::vector<const MemoryRecord*> records() const;
    std::size_t size() const { return records_.size(); }
    /// Tombstones the record and drops it from every index. Returns false
    /// for unknown ids. Counts toward evicted_total when `evicted`.
    bool remove(const std::string& id, bool evicted = true);
    bool is_tombstoned(const std::string& id) const { return tombstones_.contains(id); }
    /// Replaces text and embedding (reindexing) and optionally ts and triplet.
    void update_record(const std::string& id, std::string text, std::optional<Embedding> embedding,
                       std::optional<Timestamp> ts = std::nullopt, std::optional<Triplet> triplet = std::nullopt);
    /// Adds to the access statistics of `id` without touching the indexes.
    void absorb_stats(const std::string& id, int access_count, Timestamp last_access, double strength);
    void set_heat(const std::string& id, double heat);
    /// Brute-force cosine neighbors of `query` among live records with embeddings.
    std::vector<Scored> nearest(std::span<const float> query, std::size_t m,
                                const std::set<std::string>& exclude = {}) const;
    /// The raw_turn record for (session, turn), if stored.
    const MemoryRecord* find_turn(const std::string& session_id, int turn_index) const;

    virtual bool supports_tiers() const { return false; }
    /// Throws UnsupportedBackend for tierless stores.
    virtual StoreStats migrate_tier(const std::string& id, Tier to);

    virtual bool supports_links() const { return false; }
    /// Bidirectional link. Throws UnsupportedBackend or UnknownRecord.
    void add_link(const std::string& a, const std::string& b);

    /// Ids removed by capacity eviction since the last call.
    std::vector<std::string> take_evicted();

    StoreStats stats() const;
    const StoreOptions& options() const { return options_; }

    /// Line-delimited snapshot of all live records (debugging, golden tests).
    void write_snapshot(std::ostream& out) const;

protected:
    virtual void index_add(const MemoryRecord& record) = 0;
    virtual void index_remove(const MemoryRecord& record) = 0;
    /// Raw ranking for the backend; the base class truncates, sorts and
    /// updates access statistics.
    virtual std::vector<Candidate> search(const RetrievalSignal& signal, std::size_t k) = 0;
    /// Runs after a batch of units is indexed (eviction, tiering, summaries).
    virtual void after_insert(const std::vector<std::string>& ids, Timestamp now);
    virtual void fill_index_sizes(StoreStats& stats) const;

    MemoryRecord& mutable_record(const std::string& id);
    void note_eviction(const std::string& id);
    std::string next_id();

    /// Candidates over every live record by (1 + cos) / 2. Signals without an
    /// embedding fall back to normalized term-frequency scores.
    std::vector<Candidate> flat_scan(const RetrievalSignal& signal, SourceIndex source) const;
    /// Query terms for lexical matching: keywords (each also stemmed) when
    /// present, otherwise index_terms(raw_query).
    static std::vector<std::string> query_terms(const RetrievalSignal& signal);

    StoreOptions options_;
    std::map<std::string, MemoryRecord> records_;
    std::set<std::string> tombstones_;
    std::vector<std::string> pending_evictions_;
    std::size_t evicted_total_ = 0;
    std::uint64_t id_counter_ = 0;
    Timestamp clock_{std::numeric_limits<std::int64_t>::min()};
};

/// Valid names: fifo_queue, queue_segment, lsh_hash, inverted_vector,
/// property_graph, summary_vector.
std::span<const std::string_view> store_names();
std::unique_ptr<MemoryStore> make_store(std::string_view name, const StoreOptions& options = {});

double cosine_score(double cosine);
/// A candidate carrying only the id; retrieve() fills in the record.
Candidate shallow_candidate(const std::string& id, double score, SourceIndex source);

}  // namespace streammem
