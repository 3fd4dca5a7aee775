#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "streammem/time.hpp"

namespace streammem {

enum class RequestKind { Insert, Retrieve };

std::string_view to_string(RequestKind kind);

/// One interaction unit (a dialogue turn or a fact statement).
struct InsertPayload {
    std::string context;
    std::string session_id;
    std::optional<std::string> speaker;
    int turn_index = 0;
};

struct RetrievePayload {
    std::string query;
    std::string gold_answer;
    std::string category = "unknown";
    std::string query_id;
    /// Session the question was asked in; empty when not applicable.
    std::string session_id;
};

struct Request {
    std::uint64_t seq = 0;
    Timestamp ts;
    RequestKind kind = RequestKind::Insert;
    std::variant<InsertPayload, RetrievePayload> payload;

    const InsertPayload& insert() const { return std::get<InsertPayload>(payload); }
    const RetrievePayload& retrieve() const { return std::get<RetrievePayload>(payload); }
};

Request make_insert(std::uint64_t seq, Timestamp ts, InsertPayload p);
Request make_retrieve(std::uint64_t seq, Timestamp ts, RetrievePayload p);

/// An ordered request stream. Treated as immutable once built; share it
/// read-only between threads.
struct StreamManifest {
    std::vector<Request> requests;
    std::string source;
    std::size_t inserts = 0;
    std::size_t retrieves = 0;

    bool empty() const { return requests.empty(); }
    std::size_t size() const { return requests.size(); }
};

/// Builds a manifest and fills in the counts from `requests`.
StreamManifest make_manifest(std::vector<Request> requests, std::string source);

// ---------------------------------------------------------------------------
// Serialization of session-structured corpora.

struct Turn {
    int turn_index = 0;
    std::string text;
    std::optional<std::string> speaker;
    std::optional<Timestamp> ts;
    /// Marks the turn as a fact update for AfterNthUpdate triggers.
    bool fact_update = false;
};

struct Session {
    std::string session_id;
    /// When set, turns without their own timestamp get start + turn_index seconds.
    std::optional<Timestamp> start;
    std::vector<Turn> turns;
};

struct TurnRef {
    std::string session_id;
    int turn_index = 0;

    friend bool operator==(const TurnRef&, const TurnRef&) = default;
};

/// Place the query right after the latest of its evidence turns. An empty
/// evidence list places it after the final insert.
struct AfterEvidence {
    std::vector<TurnRef> evidence;
};

/// Place the query after insert number ceil(fraction * total_inserts).
struct AtFraction {
    double fraction = 1.0;
};

/// Place the query after the n-th (1-based) turn flagged as a fact update.
struct AfterNthUpdate {
    std::size_t n = 1;
};

using Trigger = std::variant<AfterEvidence, AtFraction, AfterNthUpdate>;

struct QuerySpec {
    RetrievePayload payload;
    Trigger trigger;
};

struct SerializeOptions {
    std::string source;
    /// Ignore supplied timestamps and give insert i the timestamp i seconds,
    /// in input order (sessions in order, turns in order).
    bool logical_ticks = false;
};

/// Merges sessions into one chronological stream and places every query
/// right after its trigger point. Inserts are ordered by
/// (ts, session_id, turn_index); a query gets its anchor's ts + 1us and,
/// at equal timestamps, sorts before inserts so it never sees a same-time
/// insert. Throws MissingTimestamp or DanglingEvidence.
StreamManifest serialize_stream(std::span<const Session> sessions, std::span<const QuerySpec> queries,
                                const SerializeOptions& options = {});

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
    NonMonotoneTimestamp,
    DuplicateSeq,
    NonIncreasingSeq,
    KindPayloadMismatch,
    InvalidPayload,
    SameTimestampInsertBeforeRetrieve,
    CountMismatch,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::size_t index = 0;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_stream(const StreamManifest& manifest);

/// Concatenates manifests on one timeline. Manifest k+1 is shifted so its
/// first request lands `gap_us` after the last request of manifest k (1us
/// when gap_us is 0, so requests from different manifests never tie).
/// Session and query ids are prefixed "<k>/". Throws InvalidGap.
StreamManifest concat_streams(std::span<const StreamManifest> manifests, std::int64_t gap_us);

// ---------------------------------------------------------------------------
// Line-delimited stream files.

void write_stream(std::ostream& out, const StreamManifest& manifest);
/// Parses a stream file. Throws SchemaError naming the line and field.
StreamManifest read_stream(std::istream& in, std::string source);

}  // namespace streammem
