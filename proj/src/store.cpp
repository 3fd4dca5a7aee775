#include "streammem/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <unordered_map>

#include <json.hpp>

#include "streammem/error.hpp"
#include "streammem/text.hpp"

namespace streammem {

std::string_view to_string(RecordKind kind) {
    switch (kind) {
        case RecordKind::RawTurn: return "raw_turn";
        case RecordKind::Summary: return "summary";
        case RecordKind::Triplet: return "triplet";
        case RecordKind::Note: return "note";
    }
    return "unknown";
}

std::string_view to_string(Tier tier) {
    switch (tier) {
        case Tier::ShortTerm: return "short_term";
        case Tier::MidTerm: return "mid_term";
        case Tier::LongTerm: return "long_term";
        case Tier::NotApplicable: return "n/a";
    }
    return "n/a";
}

std::string_view to_string(SourceIndex source) {
    switch (source) {
        case SourceIndex::Lexical: return "lexical";
        case SourceIndex::Vector: return "vector";
        case SourceIndex::Lsh: return "lsh";
        case SourceIndex::Graph: return "graph";
        case SourceIndex::Queue: return "queue";
        case SourceIndex::Summary: return "summary";
    }
    return "unknown";
}

std::string Triplet::linearize() const { return subject + " " + relation + " " + object; }

double cosine_score(double cosine) { return std::clamp((1.0 + cosine) / 2.0, 0.0, 1.0); }

Candidate shallow_candidate(const std::string& id, double score, SourceIndex source) {
    Candidate c;
    c.record.record_id = id;
    c.score = score;
    c.source_index = source;
    return c;
}

// ---------------------------------------------------------------------------

std::vector<Scored> rrf_fuse(const std::vector<std::vector<std::string>>& lists, int k_rrf) {
    std::unordered_map<std::string, double> acc;
    for (const auto& list : lists) {
        std::set<std::string_view> seen;
        std::size_t rank = 0;
        for (const auto& id : list) {
            if (!seen.insert(id).second) continue;
            ++rank;
            acc[id] += 1.0 / static_cast<double>(k_rrf + static_cast<int>(rank));
        }
    }
    std::vector<Scored> out;
    out.reserve(acc.size());
    for (auto& [id, score] : acc) out.push_back({id, score});
    std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    return out;
}

std::vector<Scored> fuse_scores(const std::vector<std::string>& lexical, const std::vector<std::string>& vector,
                                int k_rrf) {
    return rrf_fuse({lexical, vector}, k_rrf);
}

std::uint64_t lsh_signature(std::span<const float> embedding, const std::vector<std::vector<float>>& hyperplanes) {
    if (hyperplanes.size() > 64) throw Error(ErrorCode::DimensionMismatch, "more than 64 hyperplanes");
    std::uint64_t sig = 0;
    for (std::size_t j = 0; j < hyperplanes.size(); ++j) {
        if (hyperplanes[j].size() != embedding.size()) {
            throw Error(ErrorCode::DimensionMismatch, "embedding has dimension " + std::to_string(embedding.size()) +
                                                          ", hyperplane " + std::to_string(hyperplanes[j].size()));
        }
        if (dot(embedding, hyperplanes[j]) >= 0.0) sig |= std::uint64_t{1} << j;
    }
    return sig;
}

LshIndex::LshIndex(std::size_t dimension, std::size_t bits, std::size_t tables, std::uint64_t seed)
    : dimension_(dimension), planes_(tables), buckets_(tables) {
    if (bits == 0 || bits > 64) throw Error(ErrorCode::ConfigError, "lsh bits must be in [1, 64]");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& table : planes_) {
        table.assign(bits, std::vector<float>(dimension));
        for (auto& plane : table) {
            for (auto& x : plane) x = static_cast<float>(gauss(rng));
        }
    }
}

void LshIndex::add(const std::string& id, std::span<const float> embedding) {
    for (std::size_t t = 0; t < planes_.size(); ++t) buckets_[t][lsh_signature(embedding, planes_[t])].insert(id);
}

void LshIndex::remove(const std::string& id, std::span<const float> embedding) {
    for (std::size_t t = 0; t < planes_.size(); ++t) {
        auto it = buckets_[t].find(lsh_signature(embedding, planes_[t]));
        if (it == buckets_[t].end()) continue;
        it->second.erase(id);
        if (it->second.empty()) buckets_[t].erase(it);
    }
}

std::vector<std::string> LshIndex::candidates(std::span<const float> query) const {
    if (query.size() != dimension_) throw Error(ErrorCode::DimensionMismatch, "query dimension mismatch");
    std::set<std::string> out;
    for (std::size_t t = 0; t < planes_.size(); ++t) {
        auto it = buckets_[t].find(lsh_signature(query, planes_[t]));
        if (it != buckets_[t].end()) out.insert(it->second.begin(), it->second.end());
    }
    return {out.begin(), out.end()};
}

std::size_t LshIndex::bucket_count() const {
    std::size_t n = 0;
    for (const auto& b : buckets_) n += b.size();
    return n;
}

// ---------------------------------------------------------------------------

MemoryStore::MemoryStore(StoreOptions options) : options_(options) {
    if (options_.dimension == 0) throw Error(ErrorCode::ConfigError, "embedding dimension must be positive");
}

std::string MemoryStore::next_id() {
    char buf[32];
    std::snprintf(buf, sizeof buf, "r%08llu", static_cast<unsigned long long>(++id_counter_));
    return buf;
}

std::vector<std::string> MemoryStore::insert(std::vector<MemoryRecord> units, Timestamp now) {
    if (now < clock_) throw Error(ErrorCode::CausalityViolation, "insert clock moved backwards");
    clock_ = now;
    for (const auto& u : units) {
        if (u.embedding && u.embedding->size() != options_.dimension) {
            throw Error(ErrorCode::DimensionMismatch, "record embedding has dimension " +
                                                          std::to_string(u.embedding->size()) + ", store uses " +
                                                          std::to_string(options_.dimension));
        }
        if (u.triplet && (u.triplet->subject.empty() || u.triplet->relation.empty() || u.triplet->object.empty())) {
            throw Error(ErrorCode::ValidationError, "triplet with an empty part");
        }
    }
    std::vector<std::string> ids;
    ids.reserve(units.size());
    for (auto& u : units) {
        if (u.record_id.empty()) u.record_id = next_id();
        if (records_.contains(u.record_id)) throw Error(ErrorCode::ValidationError, "duplicate id " + u.record_id);
        if (u.strength <= 0.0) u.strength = options_.initial_strength_s;
        if (u.last_access < u.ts) u.last_access = u.ts;
        if (u.triplet) {
            auto lower = [](std::string s) {
                std::transform(s.begin(), s.end(), s.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
                return s;
            };
            u.triplet->subject = lower(u.triplet->subject);
            u.triplet->relation = lower(u.triplet->relation);
            u.triplet->object = lower(u.triplet->object);
        }
        ids.push_back(u.record_id);
        auto [it, _] = records_.emplace(u.record_id, std::move(u));
        index_add(it->second);
    }
    after_insert(ids, now);
    return ids;
}

std::vector<Candidate> MemoryStore::retrieve(const RetrievalSignal& signal, std::size_t k, Timestamp query_ts) {
    if (signal.skip) return {};
    if (k == 0) throw Error(ErrorCode::ValidationError, "retrieve needs k >= 1");
    if (text::trim(signal.raw_query).empty() && !signal.embedding &&
        !(signal.keywords && !signal.keywords->empty())) {
        throw Error(ErrorCode::EmptySignal, "signal has neither text nor embedding");
    }
    if (signal.embedding && signal.embedding->size() != options_.dimension) {
        throw Error(ErrorCode::DimensionMismatch, "query embedding dimension mismatch");
    }
    if (records_.empty()) return {};
    auto cands = search(signal, k);
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        return a.score != b.score ? a.score > b.score : a.record.record_id < b.record.record_id;
    });
    if (cands.size() > k) cands.resize(k);
    for (auto& c : cands) {
        auto& rec = mutable_record(c.record.record_id);
        if (!(rec.ts < query_ts)) {
            throw Error(ErrorCode::CausalityViolation,
                        "record " + rec.record_id + " is not older than the query timestamp");
        }
        rec.access_count += 1;
        rec.last_access = std::max(rec.last_access, query_ts);
        rec.strength *= options_.strength_gain;
        c.record = rec;
        c.tier = rec.tier;
    }
    return cands;
}

const MemoryRecord* MemoryStore::find(const std::string& id) const {
    auto it = records_.find(id);
    return it == records_.end() ? nullptr : &it->second;
}

MemoryRecord& MemoryStore::mutable_record(const std::string& id) {
    auto it = records_.find(id);
    if (it == records_.end()) throw Error(ErrorCode::UnknownRecord, id);
    return it->second;
}

std::vector<const MemoryRecord*> MemoryStore::records() const {
    std::vector<const MemoryRecord*> out;
    out.reserve(records_.size());
    for (const auto& [_, r] : records_) out.push_back(&r);
    return out;
}

bool MemoryStore::remove(const std::string& id, bool evicted) {
    auto it = records_.find(id);
    if (it == records_.end()) return false;
    index_remove(it->second);
    for (const auto& other : it->second.links) {
        auto o = records_.find(other);
        if (o != records_.end()) o->second.links.erase(id);
    }
    records_.erase(it);
    tombstones_.insert(id);
    if (evicted) ++evicted_total_;
    return true;
}

void MemoryStore::note_eviction(const std::string& id) {
    if (remove(id, true)) pending_evictions_.push_back(id);
}

void MemoryStore::update_record(const std::string& id, std::string text, std::optional<Embedding> embedding,
                                std::optional<Timestamp> ts, std::optional<Triplet> triplet) {
    auto& rec = mutable_record(id);
    if (embedding && embedding->size() != options_.dimension) {
        throw Error(ErrorCode::DimensionMismatch, "update embedding dimension mismatch");
    }
    index_remove(rec);
    rec.text = std::move(text);
    if (embedding) rec.embedding = std::move(embedding);
    if (triplet) rec.triplet = std::move(triplet);
    if (ts) {
        rec.ts = *ts;
        rec.last_access = std::max(rec.last_access, *ts);
    }
    index_add(rec);
}

void MemoryStore::absorb_stats(const std::string& id, int access_count, Timestamp last_access, double strength) {
    auto& rec = mutable_record(id);
    rec.access_count += access_count;
    rec.last_access = std::max(rec.last_access, last_access);
    rec.strength = std::max(rec.strength, strength);
}

void MemoryStore::set_heat(const std::string& id, double heat) { mutable_record(id).heat = heat; }

std::vector<Scored> MemoryStore::nearest(std::span<const float> query, std::size_t m,
                                         const std::set<std::string>& exclude) const {
    std::vector<Scored> all;
    for (const auto& [id, r] : records_) {
        if (!r.embedding || exclude.contains(id)) continue;
        all.push_back({id, dot(query, *r.embedding)});
    }
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    if (all.size() > m) all.resize(m);
    return all;
}

const MemoryRecord* MemoryStore::find_turn(const std::string& session_id, int turn_index) const {
    for (const auto& [_, r] : records_) {
        if (r.kind == RecordKind::RawTurn && r.session_id == session_id && r.turn_index == turn_index) return &r;
    }
    return nullptr;
}

StoreStats MemoryStore::migrate_tier(const std::string&, Tier) {
    throw Error(ErrorCode::UnsupportedBackend, std::string(name()) + " has no tiers");
}

void MemoryStore::add_link(const std::string& a, const std::string& b) {
    if (!supports_links()) throw Error(ErrorCode::UnsupportedBackend, std::string(name()) + " has no links");
    if (a == b) return;
    auto& ra = mutable_record(a);
    auto& rb = mutable_record(b);
    ra.links.insert(b);
    rb.links.insert(a);
}

std::vector<std::string> MemoryStore::take_evicted() { return std::exchange(pending_evictions_, {}); }

void MemoryStore::after_insert(const std::vector<std::string>&, Timestamp) {}

void MemoryStore::fill_index_sizes(StoreStats&) const {}

StoreStats MemoryStore::stats() const {
    StoreStats s;
    s.record_count = records_.size();
    for (const auto& [_, r] : records_) ++s.per_tier[r.tier];
    s.evicted_total = evicted_total_;
    fill_index_sizes(s);
    return s;
}

std::vector<std::string> MemoryStore::query_terms(const RetrievalSignal& signal) {
    if (signal.keywords && !signal.keywords->empty()) {
        std::vector<std::string> out;
        for (const auto& kw : *signal.keywords) {
            for (const auto& tok : text::raw_tokens(kw)) {
                out.push_back(tok);
                const auto stem = text::porter_stem(tok);
                if (stem != tok) out.push_back(stem);
            }
        }
        return out;
    }
    return text::index_terms(signal.raw_query);
}

std::vector<Candidate> MemoryStore::flat_scan(const RetrievalSignal& signal, SourceIndex source) const {
    std::vector<Candidate> out;
    if (signal.embedding) {
        for (const auto& [_, r] : records_) {
            if (!r.embedding) continue;
            out.push_back(shallow_candidate(r.record_id, cosine_score(dot(*signal.embedding, *r.embedding)), source));
        }
        return out;
    }
    const auto terms = query_terms(signal);
    const std::set<std::string> wanted(terms.begin(), terms.end());
    double max_score = 0.0;
    for (const auto& [_, r] : records_) {
        double tf = 0.0;
        for (const auto& t : text::index_terms(r.text)) tf += wanted.contains(t) ? 1.0 : 0.0;
        if (tf <= 0.0) continue;
        max_score = std::max(max_score, tf);
        out.push_back(shallow_candidate(r.record_id, tf, SourceIndex::Lexical));
    }
    for (auto& c : out) c.score /= max_score;
    return out;
}

void MemoryStore::write_snapshot(std::ostream& out) const {
    using json = nlohmann::ordered_json;
    for (const auto& [id, r] : records_) {
        json j;
        j["record_id"] = id;
        j["text"] = r.text;
        j["kind"] = to_string(r.kind);
        j["ts_us"] = r.ts.us;
        j["session_id"] = r.session_id;
        j["turn_index"] = r.turn_index;
        if (r.speaker) j["speaker"] = *r.speaker;
        j["access_count"] = r.access_count;
        j["last_access_us"] = r.last_access.us;
        j["strength"] = r.strength;
        j["heat"] = r.heat;
        j["tier"] = to_string(r.tier);
        j["links"] = r.links;
        if (r.triplet) j["triplet"] = {r.triplet->subject, r.triplet->relation, r.triplet->object};
        if (r.embedding) j["embedding"] = *r.embedding;
        out << j.dump() << '\n';
    }
}

}  // namespace streammem
