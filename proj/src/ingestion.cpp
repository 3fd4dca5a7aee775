#include "streammem/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "streammem/error.hpp"
#include "streammem/text.hpp"

namespace streammem {

namespace {

MemoryRecord base_record(const InsertPayload& h, Timestamp ts, RecordKind kind) {
    MemoryRecord r;
    r.ts = ts;
    r.last_access = ts;
    r.session_id = h.session_id;
    r.turn_index = h.turn_index;
    r.speaker = h.speaker;
    r.kind = kind;
    return r;
}

std::string source_ref(const InsertPayload& h) { return h.session_id + "#" + std::to_string(h.turn_index); }

}  // namespace

std::string_view to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::Add: return "ADD";
        case ActionKind::Update: return "UPDATE";
        case ActionKind::Delete: return "DELETE";
        case ActionKind::Noop: return "NOOP";
        case ActionKind::Evict: return "EVICT";
        case ActionKind::Migrate: return "MIGRATE";
        case ActionKind::Link: return "LINK";
        case ActionKind::Merge: return "MERGE";
    }
    return "UNKNOWN";
}

std::vector<MemoryRecord> normalize_none(const InsertPayload& h, Timestamp ts, Gateway& gateway) {
    auto r = base_record(h, ts, RecordKind::RawTurn);
    r.text = h.context;
    r.embedding = gateway.embed_one(h.context, Stage::PreIns);
    return {std::move(r)};
}

std::vector<MemoryRecord> normalize_enrich(const InsertPayload& h, Timestamp ts, Gateway& gateway,
                                           int max_sentences) {
    ChatRequest req;
    req.template_id = "summarize";
    req.variables = {{"text", h.context}, {"max_sentences", std::to_string(max_sentences)}};
    std::string summary;
    try {
        summary = text::trim(gateway.chat(req, Stage::PreIns));
    } catch (const GatewayError& e) {
        throw GatewayError(e.kind(), "summarize " + source_ref(h) + ": " + e.what(), e.retries());
    }
    if (summary.empty()) throw GatewayError(GatewayErrorKind::EmptyCompletion, "empty summary for " + source_ref(h));
    auto raw = base_record(h, ts, RecordKind::RawTurn);
    raw.text = h.context;
    auto sum = base_record(h, ts, RecordKind::Summary);
    sum.text = std::move(summary);
    const std::vector<std::string> texts = {raw.text, sum.text};
    auto embs = gateway.embed(texts, Stage::PreIns);
    raw.embedding = std::move(embs[0]);
    sum.embedding = std::move(embs[1]);
    return {std::move(raw), std::move(sum)};
}

std::vector<Triplet> parse_triplets(std::string_view reply, int max_triplets, const std::string& source_record) {
    std::vector<Triplet> out;
    const std::string trimmed = text::trim(reply);
    if (trimmed.empty()) return out;
    {
        std::string lower = trimmed;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (lower == "no facts" || lower == "no facts.") return out;
    }
    std::istringstream lines(trimmed);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        line = text::trim(line);
        if (line.empty()) continue;
        if (static_cast<int>(out.size()) == max_triplets) break;
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (;;) {
            const auto bar = line.find('|', start);
            parts.push_back(text::trim(std::string_view(line).substr(start, bar - start)));
            if (bar == std::string::npos) break;
            start = bar + 1;
        }
        if (parts.size() != 3 || parts[0].empty() || parts[1].empty() || parts[2].empty()) {
            throw Error(ErrorCode::UnparseableExtraction,
                        "line " + std::to_string(line_no) + " is not 'subject | relation | object': " + line);
        }
        out.push_back({parts[0], parts[1], parts[2], source_record});
    }
    return out;
}

std::vector<Triplet> normalize_rewrite(const InsertPayload& h, Gateway& gateway, int max_triplets) {
    ChatRequest req;
    req.template_id = "triplet_extract";
    req.variables = {{"text", h.context}, {"max_triplets", std::to_string(max_triplets)}};
    std::string reply;
    try {
        reply = gateway.chat(req, Stage::PreIns);
    } catch (const GatewayError& e) {
        throw GatewayError(e.kind(), "triplet_extract " + source_ref(h) + ": " + e.what(), e.retries());
    }
    return parse_triplets(reply, max_triplets, source_ref(h));
}

std::vector<MemoryRecord> triplet_records(const std::vector<Triplet>& triplets, const InsertPayload& h, Timestamp ts,
                                          Gateway& gateway) {
    if (triplets.empty()) return {};
    std::vector<MemoryRecord> out;
    std::vector<std::string> texts;
    for (const auto& t : triplets) {
        auto r = base_record(h, ts, RecordKind::Triplet);
        Triplet lowered = t;
        for (auto* part : {&lowered.subject, &lowered.relation, &lowered.object}) {
            std::transform(part->begin(), part->end(), part->begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        }
        r.text = lowered.linearize();
        r.triplet = std::move(lowered);
        texts.push_back(r.text);
        out.push_back(std::move(r));
    }
    auto embs = gateway.embed(texts, Stage::PreIns);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].embedding = std::move(embs[i]);
    return out;
}

std::vector<MemoryRecord> normalize(const InsertPayload& h, Timestamp ts, Gateway& gateway,
                                    const NormalizeConfig& phi) {
    if (phi.strategy == "none") return normalize_none(h, ts, gateway);
    if (phi.strategy == "enrich") return normalize_enrich(h, ts, gateway, phi.summary_max_sentences);
    if (phi.strategy == "rewrite") {
        return triplet_records(normalize_rewrite(h, gateway, phi.max_triplets), h, ts, gateway);
    }
    throw Error(ErrorCode::ConfigError, "unknown normalize strategy '" + phi.strategy + "'");
}

// ---------------------------------------------------------------------------

ConsolidationResult consolidate_none() { return {}; }

ConsolidationResult consolidate_crud(MemoryStore& store, const std::vector<std::string>& new_ids, Gateway& gateway,
                                     Timestamp now, int neighbors) {
    ConsolidationResult result;
    const std::set<std::string> fresh(new_ids.begin(), new_ids.end());
    for (const auto& id : new_ids) {
        const MemoryRecord* rec = store.find(id);
        if (!rec || !rec->embedding) continue;
        const auto near = store.nearest(*rec->embedding, static_cast<std::size_t>(neighbors), fresh);
        std::string listing;
        std::set<std::string> allowed;
        for (const auto& n : near) {
            listing += n.id + "\t" + store.find(n.id)->text + "\n";
            allowed.insert(n.id);
        }
        ChatRequest req;
        req.template_id = "crud";
        req.variables = {{"new_memory", rec->text}, {"neighbors", listing}};
        std::string reply;
        try {
            reply = text::trim(gateway.chat(req, Stage::PostIns));
        } catch (const GatewayError&) {
            result.gateway_failed = true;
            result.actions.push_back({ActionKind::Noop, id, ""});
            continue;
        }
        std::istringstream words(reply);
        std::string verb;
        std::string target;
        words >> verb >> target;
        std::transform(verb.begin(), verb.end(), verb.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        if (verb == "ADD") {
            result.actions.push_back({ActionKind::Add, id, ""});
        } else if ((verb == "UPDATE" || verb == "DELETE") && allowed.contains(target)) {
            if (verb == "UPDATE") {
                std::string new_text = rec->text;
                auto emb = rec->embedding;
                auto triplet = rec->triplet;
                store.remove(id, false);
                store.update_record(target, std::move(new_text), std::move(emb), now, std::move(triplet));
                result.actions.push_back({ActionKind::Update, id, target});
            } else {
                store.remove(target, false);
                result.actions.push_back({ActionKind::Delete, id, target});
            }
        } else {
            // NOOP, or a reply we cannot act on.
            if (verb != "NOOP") result.gateway_failed = true;
            result.actions.push_back({ActionKind::Noop, id, ""});
        }
    }
    return result;
}

double retention(const MemoryRecord& record, Timestamp now) {
    const double dt = std::max(0.0, seconds_between(record.last_access, now));
    return std::exp(-dt / record.strength);
}

std::vector<std::string> forgetting_curve(MemoryStore& store, Timestamp now, double retention_threshold) {
    std::vector<std::string> doomed;
    for (const auto* r : store.records()) {
        if (retention(*r, now) < retention_threshold) doomed.push_back(r->record_id);
    }
    for (const auto& id : doomed) store.remove(id, true);
    return doomed;
}

double heat(const MemoryRecord& record, Timestamp now, double alpha, double beta, double tau_s) {
    const double dt = std::max(0.0, seconds_between(record.last_access, now));
    return alpha * record.access_count + beta * std::exp(-dt / tau_s);
}

std::vector<Migration> heat_migration(MemoryStore& store, Timestamp now, const ConsolidateConfig& theta) {
    if (!store.supports_tiers()) {
        throw Error(ErrorCode::UnsupportedBackend, std::string(store.name()) + " has no tiers for heat_migration");
    }
    std::vector<Migration> planned;
    std::vector<std::pair<std::string, double>> heats;
    for (const auto* r : store.records()) {
        heats.emplace_back(r->record_id, heat(*r, now, theta.heat_alpha, theta.heat_beta, theta.heat_tau_s));
    }
    for (const auto& [id, h] : heats) store.set_heat(id, h);
    if (theta.heat_alpha == 0.0 && theta.heat_beta == 0.0) return planned;
    std::stable_sort(heats.begin(), heats.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [id, h] : heats) {
        const Tier from = store.find(id)->tier;
        Tier to = from;
        if (h >= theta.hot_threshold) {
            if (from == Tier::LongTerm) to = Tier::MidTerm;
            if (from == Tier::MidTerm) to = Tier::ShortTerm;
        } else if (h < theta.cold_threshold) {
            if (from == Tier::ShortTerm) to = Tier::MidTerm;
            if (from == Tier::MidTerm) to = Tier::LongTerm;
        }
        if (to == from) continue;
        store.migrate_tier(id, to);
        planned.push_back({id, from, to, h});
    }
    return planned;
}

std::vector<std::pair<std::string, std::string>> link_evolution(MemoryStore& store, const std::string& new_id,
                                                                int top_m, double threshold) {
    if (!store.supports_links()) {
        throw Error(ErrorCode::UnsupportedBackend, std::string(store.name()) + " has no links for link_evolution");
    }
    std::vector<std::pair<std::string, std::string>> out;
    const MemoryRecord* rec = store.find(new_id);
    if (!rec) throw Error(ErrorCode::UnknownRecord, new_id);
    if (!rec->embedding || top_m <= 0) return out;
    for (const auto& n : store.nearest(*rec->embedding, static_cast<std::size_t>(top_m), {new_id})) {
        if (n.score < threshold) break;
        store.add_link(new_id, n.id);
        out.emplace_back(new_id, n.id);
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> semantic_consolidation(MemoryStore& store, double dedup_threshold,
                                                                        const std::vector<std::string>* only) {
    std::vector<std::pair<std::string, std::string>> merged;
    std::vector<std::string> order;
    if (only) {
        order = *only;
    } else {
        for (const auto* r : store.records()) order.push_back(r->record_id);
    }
    for (const auto& id : order) {
        const MemoryRecord* rec = store.find(id);
        if (!rec || !rec->embedding) continue;
        const auto near = store.nearest(*rec->embedding, 1, {id});
        if (near.empty() || near.front().score < dedup_threshold) continue;
        const MemoryRecord* other = store.find(near.front().id);
        const bool rec_older = rec->ts < other->ts || (rec->ts == other->ts && rec->record_id < other->record_id);
        const MemoryRecord* older = rec_older ? rec : other;
        const MemoryRecord* newer = rec_older ? other : rec;
        const std::string keep = older->record_id;
        const std::string drop = newer->record_id;
        const std::string text = older->text + " " + newer->text;
        const int access = newer->access_count;
        const Timestamp last = newer->last_access;
        const double strength = newer->strength;
        store.remove(drop, false);
        store.absorb_stats(keep, access, last, strength);
        store.update_record(keep, text, std::nullopt);
        merged.emplace_back(keep, drop);
    }
    return merged;
}

ConsolidationResult consolidate(MemoryStore& store, const std::vector<std::string>& new_ids, Gateway& gateway,
                                Timestamp now, const ConsolidateConfig& theta) {
    const auto& s = theta.strategy;
    if (s == "none") return consolidate_none();
    if (s == "crud") return consolidate_crud(store, new_ids, gateway, now, theta.crud_neighbors);
    ConsolidationResult result;
    if (s == "forgetting_curve") {
        for (auto& id : forgetting_curve(store, now, theta.retention_threshold)) {
            result.actions.push_back({ActionKind::Evict, std::move(id), ""});
        }
    } else if (s == "heat_migration") {
        for (auto& m : heat_migration(store, now, theta)) {
            result.actions.push_back({ActionKind::Migrate, std::move(m.record_id), std::string(to_string(m.to))});
        }
    } else if (s == "link_evolution") {
        for (const auto& id : new_ids) {
            if (!store.find(id)) continue;
            for (auto& [a, b] : link_evolution(store, id, theta.link_top_m, theta.link_threshold)) {
                result.actions.push_back({ActionKind::Link, std::move(a), std::move(b)});
            }
        }
    } else if (s == "semantic_consolidation") {
        for (auto& [keep, drop] : semantic_consolidation(store, theta.dedup_threshold, &new_ids)) {
            result.actions.push_back({ActionKind::Merge, std::move(drop), std::move(keep)});
        }
    } else {
        throw Error(ErrorCode::ConfigError, "unknown consolidate strategy '" + s + "'");
    }
    return result;
}

}  // namespace streammem
