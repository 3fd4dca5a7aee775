#include "streammem/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "streammem/error.hpp"
#include "streammem/text.hpp"

namespace streammem {

namespace {

std::vector<std::string> reply_lines(std::string_view reply) {
    std::vector<std::string> out;
    std::istringstream in{std::string(reply)};
    std::string line;
    while (std::getline(in, line)) {
        line = text::trim(line);
        // Tolerate list markers from remote models.
        while (!line.empty() && (line.front() == '-' || line.front() == '*')) line = text::trim(line.substr(1));
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

bool candidate_order(const Candidate& a, const Candidate& b) {
    return a.score != b.score ? a.score > b.score : a.record.record_id < b.record.record_id;
}

/// RRF over candidate lists; records are taken from the first list holding them.
std::vector<Candidate> fuse_candidates(const std::vector<std::vector<Candidate>>& lists, std::size_t k, int k_rrf) {
    std::vector<std::vector<std::string>> ids;
    std::map<std::string, const Candidate*> by_id;
    for (const auto& list : lists) {
        auto& v = ids.emplace_back();
        for (const auto& c : list) {
            v.push_back(c.record.record_id);
            by_id.emplace(c.record.record_id, &c);
        }
    }
    const auto fused = rrf_fuse(ids, k_rrf);
    std::vector<Candidate> out;
    const double max_score = fused.empty() ? 1.0 : fused.front().score;
    for (const auto& s : fused) {
        if (out.size() == k) break;
        Candidate c = *by_id.at(s.id);
        c.score = s.score / max_score;
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

FormulateResult formulate_none(const RetrievePayload& q, Gateway& gateway) {
    FormulateResult r;
    r.signal.raw_query = q.query;
    r.signal.embedding = gateway.embed_one(q.query, Stage::PreRet);
    return r;
}

FormulateResult formulate_validate(const RetrievePayload& q, Gateway& gateway) {
    FormulateResult r;
    ChatRequest req;
    req.template_id = "validate";
    req.variables = {{"query", q.query}};
    r.chat_calls = 1;
    try {
        auto reply = text::trim(gateway.chat(req, Stage::PreRet));
        std::transform(reply.begin(), reply.end(), reply.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        r.signal.skip = reply.starts_with("SKIP");
    } catch (const GatewayError&) {
        r.gateway_failed = true;
        r.signal.skip = false;
    }
    r.signal.raw_query = q.query;
    if (!r.signal.skip) r.signal.embedding = gateway.embed_one(q.query, Stage::PreRet);
    return r;
}

FormulateResult formulate_keyword(const RetrievePayload& q, Gateway& gateway, int max_keywords, bool augment) {
    ChatRequest req;
    req.template_id = "keyword_extract";
    req.variables = {{"query", q.query}, {"max_keywords", std::to_string(max_keywords)}};
    std::vector<std::string> keywords;
    bool failed = false;
    try {
        for (auto& line : reply_lines(gateway.chat(req, Stage::PreRet))) {
            auto tokens = text::raw_tokens(line);
            if (tokens.empty()) continue;
            keywords.push_back(text::join(tokens, " "));
            if (static_cast<int>(keywords.size()) == max_keywords) break;
        }
    } catch (const GatewayError&) {
        failed = true;
    }
    if (keywords.empty()) {
        auto r = formulate_none(q, gateway);
        r.fallback = true;
        r.gateway_failed = failed;
        r.chat_calls = 1;
        return r;
    }
    FormulateResult r;
    r.chat_calls = 1;
    const std::string joined = text::join(keywords, " ");
    if (augment) {
        r.signal.raw_query = q.query + " " + joined;
    } else {
        r.signal.raw_query = joined;
        r.signal.keywords = keywords;
    }
    r.signal.embedding = gateway.embed_one(r.signal.raw_query, Stage::PreRet);
    return r;
}

FormulateResult formulate_decompose(const RetrievePayload& q, Gateway& gateway, int max_subqueries) {
    ChatRequest req;
    req.template_id = "decompose";
    req.variables = {{"query", q.query}, {"max_subqueries", std::to_string(max_subqueries)}};
    std::vector<std::string> subs;
    bool failed = false;
    try {
        subs = reply_lines(gateway.chat(req, Stage::PreRet));
    } catch (const GatewayError&) {
        failed = true;
    }
    if (static_cast<int>(subs.size()) > max_subqueries) subs.resize(static_cast<std::size_t>(max_subqueries));
    if (subs.empty()) {
        auto r = formulate_none(q, gateway);
        r.fallback = true;
        r.gateway_failed = failed;
        r.chat_calls = 1;
        return r;
    }
    FormulateResult r;
    r.chat_calls = 1;
    r.signal.raw_query = q.query;
    r.sub_embeddings = gateway.embed(subs, Stage::PreRet);
    r.signal.sub_queries = std::move(subs);
    return r;
}

FormulateResult formulate(const RetrievePayload& q, Gateway& gateway, const FormulateConfig& psi) {
    if (psi.strategy == "none") return formulate_none(q, gateway);
    if (psi.strategy == "validate") return formulate_validate(q, gateway);
    if (psi.strategy == "keyword") return formulate_keyword(q, gateway, psi.max_keywords, psi.keyword_augment);
    if (psi.strategy == "decompose") return formulate_decompose(q, gateway, psi.max_subqueries);
    throw Error(ErrorCode::ConfigError, "unknown formulate strategy '" + psi.strategy + "'");
}

std::vector<Candidate> search(MemoryStore& store, const FormulateResult& f, std::size_t k, Timestamp query_ts,
                              int k_rrf) {
    if (f.signal.skip) return {};
    if (!f.signal.sub_queries || f.signal.sub_queries->empty()) return store.retrieve(f.signal, k, query_ts);
    const auto& subs = *f.signal.sub_queries;
    const std::size_t per = (k + subs.size() - 1) / subs.size();
    std::vector<std::vector<Candidate>> lists;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        RetrievalSignal s;
        s.raw_query = subs[i];
        if (i < f.sub_embeddings.size()) s.embedding = f.sub_embeddings[i];
        lists.push_back(store.retrieve(s, per, query_ts));
    }
    if (lists.size() == 1) return lists.front();
    return fuse_candidates(lists, k, k_rrf);
}

// ---------------------------------------------------------------------------

int estimate_tokens(std::string_view s) {
    return static_cast<int>(std::ceil(1.3 * static_cast<double>(text::word_count(s)) - 1e-9));
}

std::string context_line(const MemoryRecord& record) {
    std::string line = "[ts=" + to_iso8601(record.ts) + "] ";
    if (record.speaker && !record.speaker->empty()) line += *record.speaker + ": ";
    return line + record.text;
}

ContextBundle integrate_none(const std::vector<Candidate>& cands, int budget_tokens) {
    ContextBundle b;
    std::set<std::string> seen;
    for (const auto& c : cands) {
        if (!seen.insert(c.record.record_id).second) continue;
        const std::string line = context_line(c.record);
        const int tokens = estimate_tokens(line);
        if (b.token_estimate + tokens > budget_tokens) {
            b.truncated = true;
            break;
        }
        if (!b.text.empty()) b.text += '\n';
        b.text += line;
        b.token_estimate += tokens;
        b.provenance.push_back(
            {c.record.record_id, c.score, c.record.ts, c.record.session_id, c.record.turn_index, c.record.kind});
    }
    return b;
}

std::vector<Candidate> integrate_time_weighted(std::vector<Candidate> cands, Timestamp now, double lambda) {
    for (auto& c : cands) {
        const double age_days = std::max(0.0, seconds_between(c.record.ts, now)) / 86400.0;
        c.score *= std::exp(-lambda * age_days);
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    return cands;
}

std::vector<Candidate> integrate_threshold(std::vector<Candidate> cands, double threshold) {
    std::erase_if(cands, [&](const Candidate& c) { return c.score < threshold; });
    return cands;
}

std::map<Tier, std::vector<Candidate>> group_by_tier(const std::vector<Candidate>& cands) {
    std::map<Tier, std::vector<Candidate>> out;
    for (const auto& c : cands) out[c.tier].push_back(c);
    return out;
}

std::vector<Candidate> integrate_multi_tier(const std::map<Tier, std::vector<Candidate>>& per_tier,
                                            const std::map<Tier, int>& quotas) {
    std::map<std::string, Candidate> best;
    for (Tier tier : {Tier::ShortTerm, Tier::MidTerm, Tier::LongTerm, Tier::NotApplicable}) {
        auto list = per_tier.find(tier);
        auto quota = quotas.find(tier);
        if (list == per_tier.end() || quota == quotas.end()) continue;
        const auto n = std::min<std::size_t>(list->second.size(), static_cast<std::size_t>(std::max(0, quota->second)));
        for (std::size_t i = 0; i < n; ++i) {
            const auto& c = list->second[i];
            auto [it, inserted] = best.emplace(c.record.record_id, c);
            if (!inserted && c.score > it->second.score) it->second = c;
        }
    }
    std::vector<Candidate> out;
    for (auto& [_, c] : best) out.push_back(std::move(c));
    std::sort(out.begin(), out.end(), candidate_order);
    return out;
}

std::vector<Candidate> integrate_augment(const std::vector<Candidate>& cands, const MemoryStore& store, int window) {
    if (window <= 0) return cands;
    std::set<std::string> present;
    for (const auto& c : cands) present.insert(c.record.record_id);
    std::vector<Candidate> out;
    for (const auto& c : cands) {
        out.push_back(c);
        if (c.record.kind != RecordKind::RawTurn) continue;
        for (int d = -window; d <= window; ++d) {
            if (d == 0) continue;
            const MemoryRecord* n = store.find_turn(c.record.session_id, c.record.turn_index + d);
            if (!n || !present.insert(n->record_id).second) continue;
            Candidate extra;
            extra.record = *n;
            extra.score = 0.0;
            extra.source_index = c.source_index;
            extra.tier = n->tier;
            out.push_back(std::move(extra));
        }
    }
    return out;
}

MultiQueryResult integrate_multi_query(const RetrievePayload& q, const std::vector<Candidate>& cands,
                                       MemoryStore& store, Gateway& gateway, int n_queries, std::size_t k,
                                       Timestamp query_ts, int k_rrf) {
    MultiQueryResult r;
    r.chat_calls = 1;
    ChatRequest req;
    req.template_id = "paraphrase";
    req.variables = {{"query", q.query}, {"n", std::to_string(n_queries)}};
    try {
        auto paraphrases = reply_lines(gateway.chat(req, Stage::PostRet));
        if (static_cast<int>(paraphrases.size()) > n_queries) paraphrases.resize(static_cast<std::size_t>(n_queries));
        if (paraphrases.empty()) {
            r.cands = cands;
            r.gateway_failed = true;
            return r;
        }
        const auto embs = gateway.embed(paraphrases, Stage::PostRet);
        std::vector<std::vector<Candidate>> lists = {cands};
        for (std::size_t i = 0; i < paraphrases.size(); ++i) {
            RetrievalSignal s;
            s.raw_query = paraphrases[i];
            s.embedding = embs[i];
            lists.push_back(store.retrieve(s, k, query_ts));
        }
        r.cands = fuse_candidates(lists, k, k_rrf);
    } catch (const GatewayError&) {
        r.cands = cands;
        r.gateway_failed = true;
    }
    return r;
}

}  // namespace streammem
