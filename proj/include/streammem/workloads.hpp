#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "streammem/orchestrator.hpp"
#include "streammem/stream.hpp"

namespace streammem {

struct SyntheticSpec {
    std::uint64_t seed = 0;
    std::size_t n_sessions = 4;
    std::size_t turns_per_session = 50;
    std::size_t n_facts = 40;
    /// Fraction of facts overwritten later in the stream.
    double update_rate = 0.2;
    /// Insert distances between a needle fact and its query.
    std::vector<std::size_t> needle_depths;
    std::size_t needles_per_depth = 1;
    /// Share of needle queries phrased without any token of the fact.
    double paraphrase_rate = 0.0;
    std::size_t rounds = 5;
    std::size_t queries_per_round = 10;

    /// Throws ConfigError.
    void validate() const;
};

struct AnswerKeyEntry {
    std::string query_id;
    std::string gold;
    std::vector<TurnRef> evidence;
    std::string kind;  // "round" or "needle"
    std::optional<std::size_t> depth;
    bool paraphrased = false;
    std::string entity;
    std::string attribute;
};

struct SyntheticWorkload {
    std::vector<Session> sessions;
    std::vector<QuerySpec> queries;
    StreamManifest stream;
    std::vector<AnswerKeyEntry> answer_key;
};

/// Fact statements "The <attr> of <Entity> is <value>." among filler turns,
/// a share of them overwritten later, round queries at each 1/rounds of the
/// stream and needle queries at exact insert distances. Gold answers are the
/// latest value at query time. Deterministic in the seed.
SyntheticWorkload synth_workload(const SyntheticSpec& spec);

void write_answer_key(std::ostream& out, const std::vector<AnswerKeyEntry>& key);
std::vector<AnswerKeyEntry> read_answer_key(std::istream& in);

/// LoCoMo-format conversations (see docs/locomo_schema.md). Each QA is
/// placed right after its latest evidence turn. Throws SchemaError.
StreamManifest load_locomo(const std::filesystem::path& path);
StreamManifest load_locomo_text(const std::string& json_text, const std::string& source = "locomo");

/// Line-delimited stream file, parsed and validated. Throws SchemaError or
/// ValidationError.
StreamManifest load_generic(const std::filesystem::path& path);

struct RecallStats {
    std::size_t total = 0;
    std::size_t hits = 0;
    double recall() const { return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total); }
};

/// Share of selected queries whose top_k context provenance includes one of
/// their evidence turns.
RecallStats evidence_recall(const std::vector<CheckpointReport>& reports, const std::vector<AnswerKeyEntry>& key,
                            const std::function<bool(const AnswerKeyEntry&)>& select, std::size_t top_k);

}  // namespace streammem
