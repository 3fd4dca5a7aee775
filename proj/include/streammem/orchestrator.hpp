#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "streammem/gateway.hpp"
#include "streammem/ingestion.hpp"
#include "streammem/metrics.hpp"
#include "streammem/operators.hpp"
#include "streammem/retrieval.hpp"
#include "streammem/store.hpp"
#include "streammem/stream.hpp"

namespace streammem {

struct CheckpointSchedule {
    enum class Kind { Fraction, EveryN, Boundaries };

    Kind kind = Kind::Fraction;
    double fraction = 0.2;
    std::size_t every_n = 1;
    std::vector<std::size_t> boundaries;

    static CheckpointSchedule at_fraction(double f);
    static CheckpointSchedule every(std::size_t n);
    static CheckpointSchedule at(std::vector<std::size_t> inserts);

    /// Sorted, distinct insert counts at which a checkpoint closes. The
    /// total is always the last boundary; an empty stream has none.
    std::vector<std::size_t> resolve(std::size_t total_inserts) const;
    void validate() const;
};

/// True when `progress` inserts complete a scheduled checkpoint.
bool checkpoint_due(std::size_t progress, const CheckpointSchedule& schedule, std::size_t total_inserts);

struct ExperimentConfig {
    std::string name = "run";
    std::string store_backend = "inverted_vector";
    StoreOptions store;
    OperatorConfig ops;
    CheckpointSchedule schedule;
    std::uint64_t seed = 0;
    std::size_t buffer_capacity = 64;
    std::string dataset;
    std::string output_dir;
    RetryPolicy retry;

    /// Throws ConfigError; also rejects strategies the backend cannot run
    /// (heat_migration needs tiers, link_evolution needs links).
    void validate() const;
};

/// Pull-based request source with a bounded look-ahead buffer filled by a
/// producer thread. The producer waits while the buffer holds B requests or
/// while paused.
class HistorySource {
public:
    HistorySource(const StreamManifest& stream, std::size_t capacity);
    ~HistorySource();
    HistorySource(const HistorySource&) = delete;
    HistorySource& operator=(const HistorySource&) = delete;

    /// Next request in seq order, or nullopt once the stream is drained.
    std::optional<Request> next();
    /// Holds the producer (backpressure) until resume().
    void pause();
    void resume();

    std::size_t capacity() const { return capacity_; }
    std::size_t high_water_mark() const;
    /// How many times next() has reported end of stream.
    std::size_t end_signals() const;

private:
    void produce();

    const StreamManifest& stream_;
    std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<Request> buffer_;
    std::size_t high_water_ = 0;
    std::size_t end_signals_ = 0;
    bool done_ = false;
    bool paused_ = false;
    bool stopping_ = false;
    std::thread producer_;
};

struct ProvenanceRef {
    std::string record_id;
    std::string session_id;
    int turn_index = 0;
    std::int64_t ts_us = 0;
    double score = 0.0;
    std::string kind;
};

struct QueryResult {
    std::uint64_t seq = 0;
    std::int64_t ts_us = 0;
    std::string query_id;
    std::string category;
    std::string query;
    std::string prediction;
    std::string gold;
    double f1 = 0.0;
    bool skipped = false;
    bool context_truncated = false;
    std::vector<std::string> flags;
    std::vector<ProvenanceRef> provenance;
};

struct CheckpointReport {
    std::size_t checkpoint_index = 0;  // 1-based round
    std::size_t inserts_consumed = 0;
    std::vector<QueryResult> queries;
    /// Mean over this checkpoint's queries; nullopt without queries.
    std::optional<double> mean_f1;
    std::map<std::string, double> mean_f1_by_category;
    std::map<Stage, metrics::LatencySummary> latency;
    StoreStats store_stats;
};

/// Wall time of one request, per stage, plus gateway time inside each stage.
struct RequestTiming {
    std::uint64_t seq = 0;
    RequestKind kind = RequestKind::Insert;
    std::map<Stage, double> stage_us;
    double end_to_end_us = 0.0;
    std::map<Stage, double> chat_us;
    std::map<Stage, double> embed_us;
    std::map<Stage, int> chat_calls;
};

/// One step of the pipeline trace.
struct PipelineAction {
    std::uint64_t seq = 0;
    std::int64_t ts_us = 0;
    std::string step;  // PreIns, StateUpdate, PostIns, PreRet, Search, PostRet, Generation, Score, Checkpoint
    std::string op;
    std::string detail;

    /// "<seq> <step> <op> <detail>"
    std::string to_line() const;
};

struct ExperimentResult {
    std::vector<CheckpointReport> reports;
    std::vector<RequestTiming> timings;
    std::vector<PipelineAction> actions;
    std::size_t high_water_mark = 0;
    std::size_t buffer_capacity = 0;
    /// In-flight checks made at stage entry; any failure throws instead.
    std::size_t atomicity_checks = 0;
    std::size_t inserts = 0;
    std::size_t retrieves = 0;
    std::size_t gateway_failures = 0;
    bool aborted = false;
    std::string abort_reason;
    double total_wall_us = 0.0;
};

struct RunHooks {
    /// Called after each request finishes; a slow hook simulates a slow consumer.
    std::function<void(const Request&)> after_request;
};

/// Runs the blocking insert / evaluate protocol over `stream`. Each Retrieve
/// executes at its stream position against the state left by the inserts
/// before it; its result is reported at the checkpoint it is bound to (the
/// first boundary at or after the inserts consumed so far).
/// Throws ValidationError when the stream fails validation.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const StreamManifest& stream,
                                std::shared_ptr<GatewayBackend> backend, const RunHooks& hooks = {});

/// Mean of the round means (rounds without queries are skipped).
std::optional<double> overall_mean_f1(const std::vector<CheckpointReport>& reports);

struct SinkOptions {
    bool force = false;
};

/// Writes checkpoints.jsonl, queries.jsonl, actions.jsonl and summary.json.
/// Wall-clock values sit under "wall_clock" keys only. Throws IoError when
/// the directory already holds results and force is off.
void write_results(const std::filesystem::path& dir, const ExperimentConfig& cfg, const ExperimentResult& result,
                   const SinkOptions& options = {});

/// Returns a JSON line with every "wall_clock" member removed.
std::string strip_wall_clock(const std::string& json_line);

}  // namespace streammem
