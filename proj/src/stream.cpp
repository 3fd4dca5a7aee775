#include "streammem/stream.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include <json.hpp>

#include "streammem/error.hpp"
#include "streammem/text.hpp"

namespace streammem {

std::string_view to_string(RequestKind kind) {
    return kind == RequestKind::Insert ? "insert" : "retrieve";
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::NonMonotoneTimestamp: return "non_monotone_timestamp";
        case ViolationKind::DuplicateSeq: return "duplicate_seq";
        case ViolationKind::NonIncreasingSeq: return "non_increasing_seq";
        case ViolationKind::KindPayloadMismatch: return "kind_payload_mismatch";
        case ViolationKind::InvalidPayload: return "invalid_payload";
        case ViolationKind::SameTimestampInsertBeforeRetrieve: return "same_timestamp_insert_before_retrieve";
        case ViolationKind::CountMismatch: return "count_mismatch";
    }
    return "unknown";
}

Request make_insert(std::uint64_t seq, Timestamp ts, InsertPayload p) {
    return Request{seq, ts, RequestKind::Insert, std::move(p)};
}

Request make_retrieve(std::uint64_t seq, Timestamp ts, RetrievePayload p) {
    return Request{seq, ts, RequestKind::Retrieve, std::move(p)};
}

StreamManifest make_manifest(std::vector<Request> requests, std::string source) {
    StreamManifest m;
    m.source = std::move(source);
    for (const auto& r : requests) {
        if (r.kind == RequestKind::Insert) {
            ++m.inserts;
        } else {
            ++m.retrieves;
        }
    }
    m.requests = std::move(requests);
    return m;
}

// ---------------------------------------------------------------------------

namespace {

struct PlacedInsert {
    Timestamp ts;
    const Session* session;
    const Turn* turn;
};

std::string ref_name(const TurnRef& r) { return r.session_id + "#" + std::to_string(r.turn_index); }

}  // namespace

StreamManifest serialize_stream(std::span<const Session> sessions, std::span<const QuerySpec> queries,
                                const SerializeOptions& options) {
    std::vector<PlacedInsert> inserts;
    std::int64_t tick = 0;
    for (const auto& s : sessions) {
        for (const auto& t : s.turns) {
            Timestamp ts;
            if (options.logical_ticks) {
                ts = Timestamp{tick * kMicrosPerSecond};
            } else if (t.ts) {
                ts = *t.ts;
            } else if (s.start) {
                ts = Timestamp{s.start->us + static_cast<std::int64_t>(t.turn_index) * kMicrosPerSecond};
            } else {
                throw Error(ErrorCode::MissingTimestamp,
                            "turn " + ref_name({s.session_id, t.turn_index}) + " has no timestamp");
            }
            ++tick;
            inserts.push_back({ts, &s, &t});
        }
    }
    std::stable_sort(inserts.begin(), inserts.end(), [](const PlacedInsert& a, const PlacedInsert& b) {
        return std::tie(a.ts, a.session->session_id, a.turn->turn_index) <
               std::tie(b.ts, b.session->session_id, b.turn->turn_index);
    });

    std::map<std::pair<std::string, int>, std::size_t> position;
    std::vector<std::size_t> update_positions;
    for (std::size_t i = 0; i < inserts.size(); ++i) {
        position[{inserts[i].session->session_id, inserts[i].turn->turn_index}] = i;
        if (inserts[i].turn->fact_update) update_positions.push_back(i);
    }

    struct PlacedQuery {
        Timestamp ts;
        std::size_t order;
        const QuerySpec* spec;
    };
    std::vector<PlacedQuery> placed;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const auto& q = queries[qi];
        std::optional<std::size_t> anchor;
        std::visit(
            [&](const auto& trig) {
                using T = std::decay_t<decltype(trig)>;
                if constexpr (std::is_same_v<T, AfterEvidence>) {
                    if (trig.evidence.empty()) {
                        if (!inserts.empty()) anchor = inserts.size() - 1;
                        return;
                    }
                    std::size_t latest = 0;
                    for (const auto& ref : trig.evidence) {
                        auto it = position.find({ref.session_id, ref.turn_index});
                        if (it == position.end()) {
                            throw Error(ErrorCode::DanglingEvidence, "query " + q.payload.query_id +
                                                                         " references absent turn " +
                                                                         ref_name(ref));
                        }
                        latest = std::max(latest, it->second);
                    }
                    anchor = latest;
                } else if constexpr (std::is_same_v<T, AtFraction>) {
                    if (!(trig.fraction > 0.0 && trig.fraction <= 1.0) || inserts.empty()) {
                        throw Error(ErrorCode::DanglingEvidence,
                                    "query " + q.payload.query_id + " has an unresolvable fraction trigger");
                    }
                    const auto n = static_cast<double>(inserts.size());
                    auto k = static_cast<std::size_t>(std::ceil(trig.fraction * n - 1e-9));
                    anchor = std::clamp<std::size_t>(k, 1, inserts.size()) - 1;
                } else {
                    if (trig.n == 0 || trig.n > update_positions.size()) {
                        throw Error(ErrorCode::DanglingEvidence, "query " + q.payload.query_id + " waits for update #" +
                                                                     std::to_string(trig.n) + " which never occurs");
                    }
                    anchor = update_positions[trig.n - 1];
                }
            },
            q.trigger);
        const Timestamp ts = anchor ? Timestamp{inserts[*anchor].ts.us + 1} : Timestamp{0};
        placed.push_back({ts, qi, &q});
    }
    std::stable_sort(placed.begin(), placed.end(),
                     [](const PlacedQuery& a, const PlacedQuery& b) { return a.ts < b.ts; });

    // Merge: at equal timestamps a query goes first so it cannot observe a
    // same-time insert.
    std::vector<Request> out;
    out.reserve(inserts.size() + placed.size());
    std::size_t ii = 0;
    std::size_t qi = 0;
    while (ii < inserts.size() || qi < placed.size()) {
        const bool take_query = qi < placed.size() && (ii == inserts.size() || placed[qi].ts <= inserts[ii].ts);
        const auto seq = static_cast<std::uint64_t>(out.size());
        if (take_query) {
            out.push_back(make_retrieve(seq, placed[qi].ts, placed[qi].spec->payload));
            ++qi;
        } else {
            const auto& p = inserts[ii];
            out.push_back(make_insert(
                seq, p.ts, InsertPayload{p.turn->text, p.session->session_id, p.turn->speaker, p.turn->turn_index}));
            ++ii;
        }
    }
    return make_manifest(std::move(out), options.source);
}

// ---------------------------------------------------------------------------

ValidationReport validate_stream(const StreamManifest& m) {
    ValidationReport report;
    auto add = [&](ViolationKind k, std::size_t i, std::string detail) {
        report.violations.push_back({k, i, std::move(detail)});
    };
    std::set<std::uint64_t> seen;
    std::size_t inserts = 0;
    std::size_t retrieves = 0;
    // Timestamp of the most recent insert, for the same-time tie rule.
    std::optional<Timestamp> last_insert_ts;
    for (std::size_t i = 0; i < m.requests.size(); ++i) {
        const auto& r = m.requests[i];
        if (i > 0) {
            const auto& prev = m.requests[i - 1];
            if (r.ts < prev.ts) {
                add(ViolationKind::NonMonotoneTimestamp, i,
                    "ts " + std::to_string(r.ts.us) + " < previous " + std::to_string(prev.ts.us));
            }
        }
        if (!seen.insert(r.seq).second) {
            add(ViolationKind::DuplicateSeq, i, "seq " + std::to_string(r.seq) + " repeated");
        } else if (i > 0 && r.seq < m.requests[i - 1].seq) {
            add(ViolationKind::NonIncreasingSeq, i, "seq " + std::to_string(r.seq) + " decreases");
        }
        const bool is_insert_payload = std::holds_alternative<InsertPayload>(r.payload);
        if ((r.kind == RequestKind::Insert) != is_insert_payload) {
            add(ViolationKind::KindPayloadMismatch, i, "kind " + std::string(to_string(r.kind)) + " with other payload");
            continue;
        }
        if (r.kind == RequestKind::Insert) {
            ++inserts;
            if (text::trim(r.insert().context).empty()) add(ViolationKind::InvalidPayload, i, "empty context");
            last_insert_ts = r.ts;
        } else {
            ++retrieves;
            const auto& q = r.retrieve();
            if (text::trim(q.query).empty()) add(ViolationKind::InvalidPayload, i, "empty query");
            if (q.gold_answer.empty() && q.category != "abstention") {
                add(ViolationKind::InvalidPayload, i, "empty gold answer outside abstention");
            }
            if (last_insert_ts && *last_insert_ts == r.ts) {
                add(ViolationKind::SameTimestampInsertBeforeRetrieve, i,
                    "retrieve at ts " + std::to_string(r.ts.us) + " follows an insert with the same ts");
            }
        }
    }
    if (inserts != m.inserts || retrieves != m.retrieves) {
        add(ViolationKind::CountMismatch, m.requests.size(),
            "declared (" + std::to_string(m.inserts) + ", " + std::to_string(m.retrieves) + ") but found (" +
                std::to_string(inserts) + ", " + std::to_string(retrieves) + ")");
    }
    return report;
}

StreamManifest concat_streams(std::span<const StreamManifest> manifests, std::int64_t gap_us) {
    if (gap_us < 0) throw Error(ErrorCode::InvalidGap, "gap must be non-negative, got " + std::to_string(gap_us));
    const std::int64_t step = gap_us == 0 ? 1 : gap_us;
    std::vector<Request> out;
    std::optional<std::int64_t> last_ts;
    std::string source;
    for (std::size_t k = 0; k < manifests.size(); ++k) {
        const auto& m = manifests[k];
        if (k) source += "+";
        source += m.source;
        if (m.requests.empty()) continue;
        const std::int64_t offset = last_ts ? (*last_ts + step) - m.requests.front().ts.us : 0;
        // A single manifest passes through unchanged.
        const std::string prefix = manifests.size() > 1 ? std::to_string(k) + "/" : std::string();
        for (const auto& r : m.requests) {
            Request copy = r;
            copy.seq = out.size();
            copy.ts = Timestamp{r.ts.us + offset};
            std::visit(
                [&](auto& p) {
                    if (prefix.empty()) return;
                    if (!p.session_id.empty()) p.session_id = prefix + p.session_id;
                    if constexpr (std::is_same_v<std::decay_t<decltype(p)>, RetrievePayload>) {
                        p.query_id = prefix + p.query_id;
                    }
                },
                copy.payload);
            out.push_back(std::move(copy));
        }
        last_ts = out.back().ts.us;
    }
    return make_manifest(std::move(out), std::move(source));
}

// ---------------------------------------------------------------------------

void write_stream(std::ostream& out, const StreamManifest& manifest) {
    for (const auto& r : manifest.requests) {
        nlohmann::ordered_json j;
        j["seq"] = r.seq;
        j["ts_us"] = r.ts.us;
        j["kind"] = to_string(r.kind);
        if (const auto* ins = std::get_if<InsertPayload>(&r.payload)) {
            j["session_id"] = ins->session_id;
            if (ins->speaker) j["speaker"] = *ins->speaker;
            j["turn_index"] = ins->turn_index;
            j["context"] = ins->context;
        } else {
            const auto& q = std::get<RetrievePayload>(r.payload);
            j["session_id"] = q.session_id;
            j["query"] = q.query;
            j["gold_answer"] = q.gold_answer;
            j["category"] = q.category;
            j["query_id"] = q.query_id;
        }
        out << j.dump() << '\n';
    }
}

namespace {

template <class T>
T field(const nlohmann::json& j, const char* name, std::size_t line) {
    auto it = j.find(name);
    if (it == j.end()) {
        throw Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": missing field '" + name + "'");
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": field '" + name + "' has wrong type");
    }
}

template <class T>
std::optional<T> optional_field(const nlohmann::json& j, const char* name, std::size_t line) {
    if (!j.contains(name) || j[name].is_null()) return std::nullopt;
    return field<T>(j, name, line);
}

}  // namespace

StreamManifest read_stream(std::istream& in, std::string source) {
    std::vector<Request> requests;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object()) throw Error(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": not an object");
        const auto seq = field<std::uint64_t>(j, "seq", lineno);
        const Timestamp ts{field<std::int64_t>(j, "ts_us", lineno)};
        const auto kind = field<std::string>(j, "kind", lineno);
        const auto session_id = field<std::string>(j, "session_id", lineno);
        if (kind == "insert") {
            InsertPayload p;
            p.session_id = session_id;
            p.context = field<std::string>(j, "context", lineno);
            p.speaker = optional_field<std::string>(j, "speaker", lineno);
            p.turn_index = optional_field<int>(j, "turn_index", lineno).value_or(0);
            requests.push_back(make_insert(seq, ts, std::move(p)));
        } else if (kind == "retrieve") {
            RetrievePayload p;
            p.session_id = session_id;
            p.query = field<std::string>(j, "query", lineno);
            p.gold_answer = optional_field<std::string>(j, "gold_answer", lineno).value_or("");
            p.category = optional_field<std::string>(j, "category", lineno).value_or("unknown");
            p.query_id = optional_field<std::string>(j, "query_id", lineno).value_or("q" + std::to_string(seq));
            requests.push_back(make_retrieve(seq, ts, std::move(p)));
        } else {
            throw Error(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
        }
    }
    return make_manifest(std::move(requests), std::move(source));
}

}  // namespace streammem
