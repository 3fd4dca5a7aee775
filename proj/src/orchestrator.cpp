#include "streammem/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "streammem/error.hpp"
#include "streammem/text.hpp"

namespace streammem {

using ojson = nlohmann::ordered_json;
using clock_type = std::chrono::steady_clock;

namespace {

double micros(clock_type::time_point a, clock_type::time_point b) {
    return std::chrono::duration<double, std::micro>(b - a).count();
}

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) out += (out.empty() ? "" : ",") + id;
    return out.empty() ? "-" : out;
}

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

CheckpointSchedule CheckpointSchedule::at_fraction(double f) {
    CheckpointSchedule s;
    s.kind = Kind::Fraction;
    s.fraction = f;
    return s;
}

CheckpointSchedule CheckpointSchedule::every(std::size_t n) {
    CheckpointSchedule s;
    s.kind = Kind::EveryN;
    s.every_n = n;
    return s;
}

CheckpointSchedule CheckpointSchedule::at(std::vector<std::size_t> inserts) {
    CheckpointSchedule s;
    s.kind = Kind::Boundaries;
    s.boundaries = std::move(inserts);
    return s;
}

void CheckpointSchedule::validate() const {
    switch (kind) {
        case Kind::Fraction:
            if (!(fraction > 0.0 && fraction <= 1.0)) {
                throw Error(ErrorCode::ConfigError, "checkpoints.fraction must lie in (0, 1]");
            }
            break;
        case Kind::EveryN:
            if (every_n == 0) throw Error(ErrorCode::ConfigError, "checkpoints.every_n must be >= 1");
            break;
        case Kind::Boundaries:
            if (boundaries.empty()) throw Error(ErrorCode::ConfigError, "checkpoints.boundaries is empty");
            break;
    }
}

std::vector<std::size_t> CheckpointSchedule::resolve(std::size_t total) const {
    std::set<std::size_t> out;
    if (total == 0) return {};
    switch (kind) {
        case Kind::Fraction:
            for (std::size_t j = 1;; ++j) {
                const double x = static_cast<double>(j) * fraction * static_cast<double>(total);
                const auto b = static_cast<std::size_t>(std::ceil(x - 1e-9));
                if (b >= total) break;
                if (b > 0) out.insert(b);
            }
            break;
        case Kind::EveryN:
            for (std::size_t b = every_n; b < total; b += every_n) out.insert(b);
            break;
        case Kind::Boundaries:
            for (auto b : boundaries) {
                if (b > 0 && b < total) out.insert(b);
            }
            break;
    }
    out.insert(total);
    return {out.begin(), out.end()};
}

bool checkpoint_due(std::size_t progress, const CheckpointSchedule& schedule, std::size_t total_inserts) {
    if (progress == 0 || progress > total_inserts) return false;
    if (progress == total_inserts) return true;
    switch (schedule.kind) {
        case CheckpointSchedule::Kind::EveryN: return progress % schedule.every_n == 0;
        default: {
            const auto b = schedule.resolve(total_inserts);
            return std::binary_search(b.begin(), b.end(), progress);
        }
    }
}

void ExperimentConfig::validate() const {
    ops.validate();
    schedule.validate();
    if (buffer_capacity == 0) throw Error(ErrorCode::ConfigError, "buffer_capacity must be >= 1");
    auto names = store_names();
    if (std::find(names.begin(), names.end(), store_backend) == names.end()) {
        std::string valid;
        for (auto n : names) valid += (valid.empty() ? "" : ", ") + std::string(n);
        throw Error(ErrorCode::ConfigError, "store.backend: unknown backend '" + store_backend + "' (valid: " + valid +
                                                ")");
    }
    if (ops.theta.strategy == "heat_migration" && store_backend != "queue_segment") {
        throw Error(ErrorCode::ConfigError, "heat_migration needs a tiered backend (queue_segment)");
    }
    if (ops.theta.strategy == "link_evolution" && store_backend != "property_graph") {
        throw Error(ErrorCode::ConfigError, "link_evolution needs a graph backend (property_graph)");
    }
}

// ---------------------------------------------------------------------------

HistorySource::HistorySource(const StreamManifest& stream, std::size_t capacity)
    : stream_(stream), capacity_(std::max<std::size_t>(1, capacity)) {
    producer_ = std::thread([this] { produce(); });
}

HistorySource::~HistorySource() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    not_full_.notify_all();
    producer_.join();
}

void HistorySource::produce() {
    for (const auto& r : stream_.requests) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return stopping_ || (!paused_ && buffer_.size() < capacity_); });
        if (stopping_) return;
        buffer_.push_back(r);
        high_water_ = std::max(high_water_, buffer_.size());
        lock.unlock();
        not_empty_.notify_one();
    }
    {
        std::lock_guard lock(mu_);
        done_ = true;
    }
    not_empty_.notify_all();
}

std::optional<Request> HistorySource::next() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !buffer_.empty() || done_; });
    if (buffer_.empty()) {
        ++end_signals_;
        return std::nullopt;
    }
    Request r = std::move(buffer_.front());
    buffer_.pop_front();
    lock.unlock();
    not_full_.notify_one();
    return r;
}

void HistorySource::pause() {
    std::lock_guard lock(mu_);
    paused_ = true;
}

void HistorySource::resume() {
    {
        std::lock_guard lock(mu_);
        paused_ = false;
    }
    not_full_.notify_all();
}

std::size_t HistorySource::high_water_mark() const {
    std::lock_guard lock(mu_);
    return high_water_;
}

std::size_t HistorySource::end_signals() const {
    std::lock_guard lock(mu_);
    return end_signals_;
}

// ---------------------------------------------------------------------------

std::string PipelineAction::to_line() const {
    return std::to_string(seq) + " " + step + " " + op + " " + detail;
}

namespace {

/// State of one experiment run. Single-threaded apart from the source.
class Runner {
public:
    Runner(const ExperimentConfig& cfg, const StreamManifest& stream, std::shared_ptr<GatewayBackend> backend,
           const RunHooks& hooks)
        : cfg_(cfg), stream_(stream), hooks_(hooks), gateway_(std::move(backend), cfg.retry) {
        StoreOptions so = cfg.store;
        so.seed = cfg.seed;
        store_ = make_store(cfg.store_backend, so);
        if (gateway_.dimension() != so.dimension) {
            throw Error(ErrorCode::DimensionMismatch, "gateway embeds into " + std::to_string(gateway_.dimension()) +
                                                          " dimensions, store expects " +
                                                          std::to_string(so.dimension));
        }
        boundaries_ = cfg.schedule.resolve(stream.inserts);
        if (boundaries_.empty() && stream.retrieves > 0) boundaries_ = {0};
        windows_.resize(boundaries_.size());
    }

    ExperimentResult run() {
        const auto run_start = clock_type::now();
        HistorySource source(stream_, cfg_.buffer_capacity);
        source_ = &source;
        try {
            while (auto req = source.next()) {
                last_seq_ = req->seq;
                last_ts_ = req->ts;
                if (req->kind == RequestKind::Insert) {
                    while (next_report_ < boundaries_.size() && boundaries_[next_report_] <= progress_) flush();
                    process_insert(*req);
                } else {
                    process_retrieve(*req);
                }
                if (hooks_.after_request) hooks_.after_request(*req);
            }
        } catch (const Error& e) {
            result_.aborted = true;
            result_.abort_reason = e.what();
        }
        if (!result_.aborted) {
            while (next_report_ < boundaries_.size()) flush();
        } else if (next_report_ < boundaries_.size() && !windows_[next_report_].queries.empty()) {
            flush();  // partial report for the round in progress
        }
        result_.high_water_mark = source.high_water_mark();
        result_.buffer_capacity = source.capacity();
        source_ = nullptr;
        result_.total_wall_us = micros(run_start, clock_type::now());
        return std::move(result_);
    }

private:
    struct Window {
        std::vector<QueryResult> queries;
        std::vector<StageTiming> timings;
    };

    void enter_stage(Stage stage) {
        ++result_.atomicity_checks;
        if (is_insertion_stage(stage) && evaluating_) {
            throw std::logic_error("insert stage entered while a checkpoint evaluation is in flight");
        }
    }

    void log(std::uint64_t seq, Timestamp ts, std::string_view step, std::string op, std::string detail) {
        result_.actions.push_back({seq, ts.us, std::string(step), std::move(op), std::move(detail)});
    }

    std::size_t bound_window() const {
        for (std::size_t i = next_report_; i < boundaries_.size(); ++i) {
            if (boundaries_[i] >= progress_) return i;
        }
        return boundaries_.size() - 1;
    }

    void attribute_gateway(RequestTiming& t) {
        for (const auto& g : gateway_.take_timings()) {
            if (!g.ok) ++result_.gateway_failures;
            if (g.call_kind == CallKind::Chat) {
                t.chat_us[g.stage] += g.wall_us;
                t.chat_calls[g.stage] += 1;
            } else {
                t.embed_us[g.stage] += g.wall_us;
            }
        }
    }

    void record_timing(RequestTiming t, std::size_t window) {
        for (const auto& [stage, us] : t.stage_us) windows_[window].timings.push_back({stage, us});
        result_.timings.push_back(std::move(t));
    }

    void process_insert(const Request& req) {
        const auto& h = req.insert();
        const std::size_t window = bound_window_for_insert();
        RequestTiming t{req.seq, RequestKind::Insert, {}, 0.0, {}, {}, {}};
        std::vector<MemoryRecord> units;
        std::vector<std::string> ids;
        std::vector<std::string> evicted;
        ConsolidationResult consolidation;
        bool normalize_failed = false;
        bool consolidate_ran = false;
        const bool fire = (progress_ + 1) % static_cast<std::size_t>(cfg_.ops.theta.fire_every) == 0;

        // Stage windows are contiguous: each boundary reading closes one stage
        // and opens the next, so bookkeeping lands after the request.
        const auto t0 = clock_type::now();
        enter_stage(Stage::PreIns);
        try {
            units = normalize(h, req.ts, gateway_, cfg_.ops.phi);
        } catch (const GatewayError&) {
            normalize_failed = true;
        }
        const auto t1 = clock_type::now();
        enter_stage(Stage::StateUpdate);
        ids = store_->insert(std::move(units), req.ts);
        evicted = store_->take_evicted();
        const auto t2 = clock_type::now();
        enter_stage(Stage::PostIns);
        if (fire) {
            consolidation = consolidate(*store_, ids, gateway_, req.ts, cfg_.ops.theta);
            consolidate_ran = true;
        }
        const auto t3 = clock_type::now();
        t.stage_us[Stage::PreIns] = micros(t0, t1);
        t.stage_us[Stage::StateUpdate] = micros(t1, t2);
        t.stage_us[Stage::PostIns] = micros(t2, t3);
        t.end_to_end_us = micros(t0, t3);

        attribute_gateway(t);
        ++progress_;
        ++result_.inserts;
        if (consolidation.gateway_failed) ++result_.gateway_failures;

        log(req.seq, req.ts, "PreIns", "normalize_" + cfg_.ops.phi.strategy,
            normalize_failed ? "units=0 failed=true" : "units=" + std::to_string(ids.size()));
        log(req.seq, req.ts, "StateUpdate", "insert",
            "ids=" + join_ids(ids) + (evicted.empty() ? "" : " evicted=" + join_ids(evicted)));
        std::string actions;
        for (const auto& a : consolidation.actions) {
            actions += (actions.empty() ? "" : ",") + std::string(to_string(a.kind)) + ":" + a.record_id +
                       (a.target.empty() ? "" : ">" + a.target);
        }
        log(req.seq, req.ts, "PostIns", "consolidate_" + cfg_.ops.theta.strategy,
            consolidate_ran ? "actions=" + std::to_string(consolidation.actions.size()) +
                                  (actions.empty() ? "" : " " + actions) +
                                  (consolidation.gateway_failed ? " failed=true" : "")
                            : "skipped=true");
        record_timing(std::move(t), window);
    }

    std::size_t bound_window_for_insert() const {
        // Insert number progress_ + 1 belongs to the first open boundary at or after it.
        for (std::size_t i = next_report_; i < boundaries_.size(); ++i) {
            if (boundaries_[i] >= progress_ + 1) return i;
        }
        return boundaries_.size() - 1;
    }

    void process_retrieve(const Request& req) {
        const auto& q = req.retrieve();
        const std::size_t window = bound_window();
        const auto& ops = cfg_.ops;
        const std::size_t k = static_cast<std::size_t>(ops.K);
        RequestTiming t{req.seq, RequestKind::Retrieve, {}, 0.0, {}, {}, {}};
        QueryResult qr;
        qr.seq = req.seq;
        qr.ts_us = req.ts.us;
        qr.query_id = q.query_id;
        qr.category = q.category;
        qr.query = q.query;
        qr.gold = q.gold_answer;

        evaluating_ = true;
        source_->pause();

        FormulateResult f;
        std::vector<Candidate> hits;
        std::vector<Candidate> integrated;
        ContextBundle bundle;
        AnswerResult answer_result;
        bool formulate_failed = false;
        bool integrate_failed = false;

        const auto t0 = clock_type::now();
        enter_stage(Stage::PreRet);
        try {
            f = formulate(q, gateway_, ops.psi);
        } catch (const GatewayError&) {
            formulate_failed = true;
            f.signal.skip = true;
        }
        const auto t1 = clock_type::now();
        enter_stage(Stage::Search);
        const std::size_t pool = ops.integration.strategy == "multi_tier" ? tier_pool() : k;
        hits = search(*store_, f, pool, req.ts, cfg_.store.k_rrf);
        const auto t2 = clock_type::now();
        enter_stage(Stage::PostRet);
        integrated = integrate(q, hits, req.ts, integrate_failed);
        bundle = integrate_none(integrated, ops.integration.budget_tokens);
        const auto t3 = clock_type::now();
        enter_stage(Stage::Generation);
        answer_result = answer(gateway_, q.query, bundle.text);
        const auto t4 = clock_type::now();
        t.stage_us[Stage::PreRet] = micros(t0, t1);
        t.stage_us[Stage::Search] = micros(t1, t2);
        t.stage_us[Stage::PostRet] = micros(t2, t3);
        t.stage_us[Stage::Generation] = micros(t3, t4);
        t.end_to_end_us = micros(t0, t4);

        source_->resume();
        evaluating_ = false;

        // Scoring sits outside every timed stage.
        qr.prediction = answer_result.prediction;
        qr.f1 = metrics::token_f1(qr.prediction, qr.gold);
        qr.skipped = f.signal.skip;
        qr.context_truncated = bundle.truncated;
        if (formulate_failed || f.gateway_failed) qr.flags.push_back("formulate_gateway_error");
        if (f.fallback) qr.flags.push_back("formulate_fallback");
        if (integrate_failed) qr.flags.push_back("integrate_gateway_error");
        if (answer_result.failed) qr.flags.push_back("answer_gateway_error");
        if (bundle.truncated) qr.flags.push_back("context_truncated");
        for (const auto& p : bundle.provenance) {
            if (!(p.ts < req.ts)) throw Error(ErrorCode::CausalityViolation, "context holds a record from the future");
            qr.provenance.push_back({p.record_id, p.session_id, p.turn_index, p.ts.us, p.score,
                                     std::string(to_string(p.kind))});
        }
        attribute_gateway(t);
        if (formulate_failed || f.gateway_failed || integrate_failed || answer_result.failed) {
            ++result_.gateway_failures;
        }
        ++result_.retrieves;

        std::string pre = "skip=" + std::string(f.signal.skip ? "true" : "false");
        if (f.signal.keywords) pre += " keywords=" + text::join(*f.signal.keywords, "|");
        if (f.signal.sub_queries) pre += " subqueries=" + std::to_string(f.signal.sub_queries->size());
        if (f.fallback) pre += " fallback=true";
        log(req.seq, req.ts, "PreRet", "formulate_" + ops.psi.strategy, pre);
        std::vector<std::string> hit_ids;
        for (const auto& h : hits) hit_ids.push_back(h.record.record_id);
        log(req.seq, req.ts, "Search", "retrieve", "k=" + std::to_string(pool) + " hits=" + join_ids(hit_ids));
        log(req.seq, req.ts, "PostRet", "integrate_" + ops.integration.strategy,
            "records=" + std::to_string(bundle.provenance.size()) + " tokens=" +
                std::to_string(bundle.token_estimate) + " truncated=" + (bundle.truncated ? "true" : "false"));
        log(req.seq, req.ts, "Generation", "answer", "prediction=" + ojson(qr.prediction).dump());
        log(req.seq, req.ts, "Score", "token_f1",
            "f1=" + fixed6(qr.f1) + " checkpoint=" + std::to_string(window + 1));

        windows_[window].queries.push_back(std::move(qr));
        record_timing(std::move(t), window);
    }

    std::size_t tier_pool() const {
        int sum = 0;
        for (const auto& [_, q] : cfg_.ops.integration.tier_quotas) sum += q;
        return std::max<std::size_t>(static_cast<std::size_t>(cfg_.ops.K), static_cast<std::size_t>(2 * sum));
    }

    std::vector<Candidate> integrate(const RetrievePayload& q, const std::vector<Candidate>& hits, Timestamp now,
                                     bool& failed) {
        const auto& ic = cfg_.ops.integration;
        const auto& s = ic.strategy;
        if (s == "none") return hits;
        if (s == "time_weighted") return integrate_time_weighted(hits, now, ic.decay_lambda);
        if (s == "threshold") return integrate_threshold(hits, ic.score_threshold);
        if (s == "multi_tier") return integrate_multi_tier(group_by_tier(hits), ic.tier_quotas);
        if (s == "augment") return integrate_augment(hits, *store_, ic.augment_window);
        if (s == "multi_query") {
            auto r = integrate_multi_query(q, hits, *store_, gateway_, ic.multi_query_count,
                                           static_cast<std::size_t>(cfg_.ops.K), now, cfg_.store.k_rrf);
            failed = r.gateway_failed;
            return std::move(r.cands);
        }
        throw Error(ErrorCode::ConfigError, "unknown integrate strategy '" + s + "'");
    }

    void flush() {
        auto& w = windows_[next_report_];
        CheckpointReport rep;
        rep.checkpoint_index = next_report_ + 1;
        rep.inserts_consumed = progress_;
        rep.queries = std::move(w.queries);
        if (!rep.queries.empty()) {
            double sum = 0.0;
            std::map<std::string, std::pair<double, int>> by_cat;
            for (const auto& q : rep.queries) {
                sum += q.f1;
                auto& [s, n] = by_cat[q.category];
                s += q.f1;
                ++n;
            }
            rep.mean_f1 = sum / static_cast<double>(rep.queries.size());
            for (const auto& [cat, sn] : by_cat) rep.mean_f1_by_category[cat] = sn.first / sn.second;
        }
        rep.latency = metrics::latency_aggregate(w.timings);
        rep.store_stats = store_->stats();
        log(last_seq_, last_ts_, "Checkpoint", "report",
            "index=" + std::to_string(rep.checkpoint_index) + " inserts=" + std::to_string(rep.inserts_consumed) +
                " queries=" + std::to_string(rep.queries.size()));
        result_.reports.push_back(std::move(rep));
        w = Window{};
        ++next_report_;
    }

    const ExperimentConfig& cfg_;
    const StreamManifest& stream_;
    const RunHooks& hooks_;
    Gateway gateway_;
    std::unique_ptr<MemoryStore> store_;
    std::vector<std::size_t> boundaries_;
    std::vector<Window> windows_;
    std::size_t next_report_ = 0;
    std::size_t progress_ = 0;
    bool evaluating_ = false;
    HistorySource* source_ = nullptr;
    std::uint64_t last_seq_ = 0;
    Timestamp last_ts_;
    ExperimentResult result_;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const StreamManifest& stream,
                                std::shared_ptr<GatewayBackend> backend, const RunHooks& hooks) {
    cfg.validate();
    const auto report = validate_stream(stream);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        throw Error(ErrorCode::ValidationError, std::to_string(report.violations.size()) +
                                                    " stream violation(s); first at index " +
                                                    std::to_string(v.index) + ": " + v.detail);
    }
    Runner runner(cfg, stream, std::move(backend), hooks);
    return runner.run();
}

std::optional<double> overall_mean_f1(const std::vector<CheckpointReport>& reports) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : reports) {
        if (!r.mean_f1) continue;
        sum += *r.mean_f1;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

// ---------------------------------------------------------------------------
// Sink

namespace {

ojson latency_json(const std::map<Stage, metrics::LatencySummary>& latency) {
    ojson j = ojson::object();
    for (Stage s : kAllStages) {
        auto it = latency.find(s);
        if (it == latency.end()) continue;
        j[std::string(to_string(s))] = {{"mean_us", it->second.mean_us},
                                        {"p50_us", it->second.p50_us},
                                        {"p95_us", it->second.p95_us},
                                        {"count", it->second.count}};
    }
    return j;
}

ojson stats_json(const StoreStats& s) {
    ojson tiers = ojson::object();
    for (const auto& [t, n] : s.per_tier) tiers[std::string(to_string(t))] = n;
    ojson idx = ojson::object();
    for (const auto& [k, n] : s.index_sizes) idx[k] = n;
    return {{"record_count", s.record_count}, {"per_tier", tiers}, {"index_sizes", idx},
            {"evicted_total", s.evicted_total}};
}

ojson config_json(const ExperimentConfig& cfg) {
    ojson sched;
    switch (cfg.schedule.kind) {
        case CheckpointSchedule::Kind::Fraction: sched = {{"fraction", cfg.schedule.fraction}}; break;
        case CheckpointSchedule::Kind::EveryN: sched = {{"every_n", cfg.schedule.every_n}}; break;
        case CheckpointSchedule::Kind::Boundaries: sched = {{"boundaries", cfg.schedule.boundaries}}; break;
    }
    return {{"name", cfg.name},
            {"store_backend", cfg.store_backend},
            {"normalize", cfg.ops.phi.strategy},
            {"consolidate", cfg.ops.theta.strategy},
            {"formulate", cfg.ops.psi.strategy},
            {"integrate", cfg.ops.integration.strategy},
            {"k", cfg.ops.K},
            {"checkpoints", sched},
            {"seed", cfg.seed},
            {"buffer_capacity", cfg.buffer_capacity},
            {"dataset", cfg.dataset}};
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
    out << content;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + p.string());
}

constexpr const char* kResultFiles[] = {"checkpoints.jsonl", "queries.jsonl", "actions.jsonl", "summary.json"};

void strip_recursive(nlohmann::ordered_json& j) {
    if (j.is_object()) {
        j.erase("wall_clock");
        for (auto& [_, v] : j.items()) strip_recursive(v);
    } else if (j.is_array()) {
        for (auto& v : j) strip_recursive(v);
    }
}

}  // namespace

std::string strip_wall_clock(const std::string& json_line) {
    auto j = ojson::parse(json_line);
    strip_recursive(j);
    return j.dump();
}

void write_results(const std::filesystem::path& dir, const ExperimentConfig& cfg, const ExperimentResult& result,
                   const SinkOptions& options) {
    std::error_code ec;
    if (!options.force) {
        for (const char* f : kResultFiles) {
            if (std::filesystem::exists(dir / f, ec)) {
                throw Error(ErrorCode::IoError, (dir / f).string() + " exists; pass --force to overwrite");
            }
        }
    }
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

    std::string checkpoints;
    std::string queries;
    std::vector<double> round_means;
    for (const auto& r : result.reports) {
        ojson cat = ojson::object();
        for (const auto& [c, v] : r.mean_f1_by_category) cat[c] = v;
        ojson line = {{"checkpoint_index", r.checkpoint_index},
                      {"inserts_consumed", r.inserts_consumed},
                      {"query_count", r.queries.size()},
                      {"mean_f1", r.mean_f1 ? ojson(*r.mean_f1) : ojson(nullptr)},
                      {"mean_f1_by_category", cat},
                      {"store_stats", stats_json(r.store_stats)},
                      {"wall_clock", {{"latency", latency_json(r.latency)}}}};
        checkpoints += line.dump() + "\n";
        if (r.mean_f1) round_means.push_back(*r.mean_f1);
        for (const auto& q : r.queries) {
            ojson prov = ojson::array();
            for (const auto& p : q.provenance) {
                prov.push_back({{"record_id", p.record_id},
                                {"session_id", p.session_id},
                                {"turn_index", p.turn_index},
                                {"ts_us", p.ts_us},
                                {"score", p.score},
                                {"kind", p.kind}});
            }
            ojson ql = {{"checkpoint_index", r.checkpoint_index},
                        {"seq", q.seq},
                        {"ts_us", q.ts_us},
                        {"query_id", q.query_id},
                        {"category", q.category},
                        {"query", q.query},
                        {"gold", q.gold},
                        {"prediction", q.prediction},
                        {"f1", q.f1},
                        {"skipped", q.skipped},
                        {"flags", q.flags},
                        {"provenance", prov}};
            queries += ql.dump() + "\n";
        }
    }
    std::string actions;
    for (const auto& a : result.actions) {
        actions += ojson({{"seq", a.seq}, {"ts_us", a.ts_us}, {"step", a.step}, {"op", a.op}, {"detail", a.detail}})
                       .dump() +
                   "\n";
    }

    std::vector<StageTiming> all;
    double overhead = 0.0;
    for (const auto& t : result.timings) {
        double sum = 0.0;
        for (const auto& [s, us] : t.stage_us) {
            all.push_back({s, us});
            sum += us;
        }
        overhead += std::max(0.0, t.end_to_end_us - sum);
    }
    ojson summary = {{"config", config_json(cfg)},
                     {"checkpoints", result.reports.size()},
                     {"inserts", result.inserts},
                     {"retrieves", result.retrieves},
                     {"round_mean_f1", round_means},
                     {"mean_f1", ojson(nullptr)},
                     {"degradation_pct", ojson(nullptr)},
                     {"gateway_failures", result.gateway_failures},
                     {"aborted", result.aborted},
                     {"abort_reason", result.abort_reason}};
    if (auto m = overall_mean_f1(result.reports)) summary["mean_f1"] = *m;
    if (round_means.size() >= 2 && round_means.front() > 0.0) {
        summary["degradation_pct"] = metrics::degradation(round_means);
    }
    summary["wall_clock"] = {{"total_run_us", result.total_wall_us},
                             {"orchestration_overhead_us", overhead},
                             {"latency", latency_json(metrics::latency_aggregate(all))}};

    write_file(dir / "checkpoints.jsonl", checkpoints);
    write_file(dir / "queries.jsonl", queries);
    write_file(dir / "actions.jsonl", actions);
    write_file(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace streammem
