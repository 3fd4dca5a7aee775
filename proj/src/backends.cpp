#include <algorithm>
#include <deque>
#include <unordered_map>

#include "streammem/error.hpp"
#include "streammem/store.hpp"
#include "streammem/text.hpp"

namespace streammem {

namespace {

bool by_score_then_id(const Scored& a, const Scored& b) { return a.score != b.score ? a.score > b.score : a.id < b.id; }

void erase_id(std::deque<std::string>& q, const std::string& id) {
    auto it = std::find(q.begin(), q.end(), id);
    if (it != q.end()) q.erase(it);
}

// ---------------------------------------------------------------------------

class FifoQueueStore final : public MemoryStore {
public:
    using MemoryStore::MemoryStore;
    std::string_view name() const override { return "fifo_queue"; }

protected:
    void index_add(const MemoryRecord& r) override { queue_.push_back(r.record_id); }
    void index_remove(const MemoryRecord& r) override { erase_id(queue_, r.record_id); }

    void after_insert(const std::vector<std::string>& ids, Timestamp) override {
        if (queue_.size() <= options_.capacity) return;
        if (!options_.evict_on_overflow) {
            for (const auto& id : ids) remove(id, false);
            throw Error(ErrorCode::CapacityExceeded,
                        "fifo_queue holds " + std::to_string(options_.capacity) + " records and eviction is off");
        }
        while (queue_.size() > options_.capacity) note_eviction(queue_.front());
    }

    std::vector<Candidate> search(const RetrievalSignal& signal, std::size_t) override {
        return flat_scan(signal, SourceIndex::Queue);
    }

    void fill_index_sizes(StoreStats& s) const override { s.index_sizes["queue"] = queue_.size(); }

private:
    std::deque<std::string> queue_;
};

// ---------------------------------------------------------------------------

class QueueSegmentStore final : public MemoryStore {
public:
    using MemoryStore::MemoryStore;
    std::string_view name() const override { return "queue_segment"; }
    bool supports_tiers() const override { return true; }

    StoreStats migrate_tier(const std::string& id, Tier to) override {
        auto& rec = mutable_record(id);
        if (to == Tier::NotApplicable) throw Error(ErrorCode::UnknownTransition, "cannot move to tier n/a");
        if (rec.tier == to) {
            throw Error(ErrorCode::UnknownTransition, id + " is already in " + std::string(to_string(to)));
        }
        index_remove(rec);
        rec.tier = to;
        index_add(rec);
        return stats();
    }

protected:
    void index_add(const MemoryRecord& r) override {
        auto& rec = mutable_record(r.record_id);
        if (rec.tier == Tier::NotApplicable) rec.tier = Tier::ShortTerm;
        switch (rec.tier) {
            case Tier::ShortTerm: short_.push_back(rec.record_id); break;
            case Tier::MidTerm: segments_[rec.session_id].push_back(rec.record_id); break;
            default: long_.insert(rec.record_id); break;
        }
    }

    void index_remove(const MemoryRecord& r) override {
        switch (r.tier) {
            case Tier::ShortTerm: erase_id(short_, r.record_id); break;
            case Tier::MidTerm: {
                auto it = segments_.find(r.session_id);
                if (it == segments_.end()) break;
                erase_id(it->second, r.record_id);
                if (it->second.empty()) segments_.erase(it);
                break;
            }
            default: long_.erase(r.record_id); break;
        }
    }

    void after_insert(const std::vector<std::string>&, Timestamp) override {
        while (short_.size() > options_.short_term_capacity) {
            const std::string id = short_.front();
            short_.pop_front();
            auto& rec = mutable_record(id);
            rec.tier = Tier::MidTerm;
            segments_[rec.session_id].push_back(id);
        }
    }

    std::vector<Candidate> search(const RetrievalSignal& signal, std::size_t) override {
        return flat_scan(signal, SourceIndex::Queue);
    }

    void fill_index_sizes(StoreStats& s) const override {
        s.index_sizes["short_term_queue"] = short_.size();
        s.index_sizes["mid_term_segments"] = segments_.size();
        s.index_sizes["long_term"] = long_.size();
    }

private:
    std::deque<std::string> short_;
    std::map<std::string, std::deque<std::string>> segments_;
    std::set<std::string> long_;
};

// ---------------------------------------------------------------------------

class LshHashStore final : public MemoryStore {
public:
    explicit LshHashStore(StoreOptions options)
        : MemoryStore(options), lsh_(options.dimension, options.lsh_bits, options.lsh_tables, options.seed) {}
    std::string_view name() const override { return "lsh_hash"; }

protected:
    void index_add(const MemoryRecord& r) override {
        if (r.embedding) lsh_.add(r.record_id, *r.embedding);
    }
    void index_remove(const MemoryRecord& r) override {
        if (r.embedding) lsh_.remove(r.record_id, *r.embedding);
    }

    std::vector<Candidate> search(const RetrievalSignal& signal, std::size_t) override {
        if (!signal.embedding) return flat_scan(signal, SourceIndex::Lexical);
        std::vector<Candidate> out;
        for (const auto& id : lsh_.candidates(*signal.embedding)) {
            const auto* r = find(id);
            out.push_back(shallow_candidate(id, cosine_score(dot(*signal.embedding, *r->embedding)), SourceIndex::Lsh));
        }
        return out;
    }

    void fill_index_sizes(StoreStats& s) const override { s.index_sizes["lsh_buckets"] = lsh_.bucket_count(); }

private:
    LshIndex lsh_;
};

// ---------------------------------------------------------------------------

class InvertedVectorStore final : public MemoryStore {
public:
    using MemoryStore::MemoryStore;
    std::string_view name() const override { return "inverted_vector"; }

protected:
    void index_add(const MemoryRecord& r) override {
        for (const auto& t : text::index_terms(r.text)) ++postings_[t][r.record_id];
        if (r.embedding) ++vectors_;
    }

    void index_remove(const MemoryRecord& r) override {
        for (const auto& t : text::index_terms(r.text)) {
            auto it = postings_.find(t);
            if (it == postings_.end()) continue;
            it->second.erase(r.record_id);
            if (it->second.empty()) postings_.erase(it);
        }
        if (r.embedding) --vectors_;
    }

    std::vector<Scored> lexical_ranking(const RetrievalSignal& signal) const {
        const auto terms = query_terms(signal);
        const std::set<std::string> unique(terms.begin(), terms.end());
        std::map<std::string, double> tf;
        for (const auto& t : unique) {
            auto it = postings_.find(t);
            if (it == postings_.end()) continue;
            for (const auto& [id, count] : it->second) tf[id] += count;
        }
        std::vector<Scored> out;
        for (auto& [id, score] : tf) out.push_back({id, score});
        std::sort(out.begin(), out.end(), by_score_then_id);
        return out;
    }

    std::vector<Scored> vector_ranking(const RetrievalSignal& signal) const {
        if (!signal.embedding) return {};
        return nearest(*signal.embedding, records_.size());
    }

    std::vector<Candidate> search(const RetrievalSignal& signal, std::size_t k) override {
        std::vector<Candidate> out;
        const auto mode = options_.hybrid_mode;
        if (mode == HybridMode::LexicalOnly || (mode == HybridMode::Hybrid && !signal.embedding)) {
            auto lex = lexical_ranking(signal);
            const double max_tf = lex.empty() ? 1.0 : lex.front().score;
            for (const auto& s : lex) out.push_back(shallow_candidate(s.id, s.score / max_tf, SourceIndex::Lexical));
            return out;
        }
        if (mode == HybridMode::VectorOnly) {
            for (const auto& s : vector_ranking(signal)) {
                out.push_back(shallow_candidate(s.id, cosine_score(s.score), SourceIndex::Vector));
            }
            return out;
        }
        const std::size_t pool = std::max(options_.fusion_pool, k);
        std::vector<std::string> lex_ids;
        std::vector<std::string> vec_ids;
        for (const auto& s : lexical_ranking(signal)) {
            if (lex_ids.size() == pool) break;
            lex_ids.push_back(s.id);
        }
        for (const auto& s : vector_ranking(signal)) {
            if (vec_ids.size() == pool) break;
            vec_ids.push_back(s.id);
        }
        auto rank_of = [](const std::vector<std::string>& list, const std::string& id) {
            auto it = std::find(list.begin(), list.end(), id);
            return it == list.end() ? list.size() + 1 : static_cast<std::size_t>(it - list.begin());
        };
        const auto fused = fuse_scores(lex_ids, vec_ids, options_.k_rrf);
        const double max_score = fused.empty() ? 1.0 : fused.front().score;
        for (const auto& s : fused) {
            const auto source =
                rank_of(lex_ids, s.id) <= rank_of(vec_ids, s.id) ? SourceIndex::Lexical : SourceIndex::Vector;
            out.push_back(shallow_candidate(s.id, s.score / max_score, source));
        }
        return out;
    }

    void fill_index_sizes(StoreStats& s) const override {
        s.index_sizes["inverted_terms"] = postings_.size();
        s.index_sizes["vectors"] = vectors_;
    }

private:
    std::unordered_map<std::string, std::map<std::string, int>> postings_;
    std::size_t vectors_ = 0;
};

// ---------------------------------------------------------------------------

class PropertyGraphStore final : public MemoryStore {
public:
    using MemoryStore::MemoryStore;
    std::string_view name() const override { return "property_graph"; }
    bool supports_links() const override { return true; }

    /// Entities a record contributes to the index.
    static std::vector<std::string> entities_of(const MemoryRecord& r) {
        std::vector<std::string> out;
        auto add = [&](const std::string& phrase) {
            auto joined = text::join(text::raw_tokens(phrase), " ");
            if (!joined.empty() && std::find(out.begin(), out.end(), joined) == out.end()) out.push_back(joined);
        };
        if (r.triplet) {
            add(r.triplet->subject);
            add(r.triplet->object);
            return out;
        }
        std::size_t i = 0;
        const std::string& s = r.text;
        while (i < s.size()) {
            while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
            std::size_t j = i;
            while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
            if (j > i && std::isupper(static_cast<unsigned char>(s[i]))) {
                for (const auto& tok : text::raw_tokens(s.substr(i, j - i))) {
                    if (!text::is_stopword(tok)) add(tok);
                }
            }
            i = j;
        }
        return out;
    }

protected:
    void index_add(const MemoryRecord& r) override {
        for (const auto& e : entities_of(r)) entities_[e].insert(r.record_id);
    }

    void index_remove(const MemoryRecord& r) override {
        for (const auto& e : entities_of(r)) {
            auto it = entities_.find(e);
            if (it == entities_.end()) continue;
            it->second.erase(r.record_id);
            if (it->second.empty()) entities_.erase(it);
        }
    }

    std::vector<Candidate> search(const RetrievalSignal& signal, std::size_t) override {
        // Entity matches: every query n-gram (n <= 4) that names an indexed entity.
        std::vector<std::string> tokens = text::raw_tokens(signal.raw_query);
        if (signal.keywords) {
            for (const auto& kw : *signal.keywords) {
                for (auto& t : text::raw_tokens(kw)) tokens.push_back(std::move(t));
            }
        }
        std::map<std::string, double> boost;
        std::set<std::string> matched;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            std::string gram;
            for (std::size_t n = 0; n < 4 && i + n < tokens.size(); ++n) {
                gram += (n ? " " : "") + tokens[i + n];
                if (text::is_stopword(gram) || !matched.insert(gram).second) continue;
                auto it = entities_.find(gram);
                if (it == entities_.end()) continue;
                for (const auto& id : it->second) boost[id] += options_.graph_entity_weight;
            }
        }
        std::map<std::string, double> raw;
        if (signal.embedding) {
            for (const auto& [id, r] : records_) {
                if (r.embedding) raw[id] = cosine_score(dot(*signal.embedding, *r.embedding));
            }
        }
        for (const auto& [id, b] : boost) raw[id] += b;
        double max_score = 0.0;
        for (const auto& [_, s] : raw) max_score = std::max(max_score, s);
        std::vector<Candidate> out;
        if (max_score <= 0.0) return out;
        for (const auto& [id, s] : raw) out.push_back(shallow_candidate(id, s / max_score, SourceIndex::Graph));
        return out;
    }

    void fill_index_sizes(StoreStats& s) const override {
        s.index_sizes["entities"] = entities_.size();
        std::size_t links = 0;
        for (const auto& [_, r] : records_) links += r.links.size();
        s.index_sizes["links"] = links / 2;
    }

private:
    std::map<std::string, std::set<std::string>> entities_;
};

// ---------------------------------------------------------------------------

class SummaryVectorStore final : public MemoryStore {
public:
    using MemoryStore::MemoryStore;
    std::string_view name() const override { return "summary_vector"; }

protected:
    void index_add(const MemoryRecord& r) override {
        if (r.kind == RecordKind::RawTurn) session_turns_[r.session_id].push_back(r.record_id);
    }

    void index_remove(const MemoryRecord& r) override {
        if (r.kind == RecordKind::RawTurn) {
            auto it = session_turns_.find(r.session_id);
            if (it != session_turns_.end()) erase_id(it->second, r.record_id);
        }
        auto s = summaries_.find(r.session_id);
        if (s != summaries_.end() && s->second == r.record_id && !updating_) summaries_.erase(s);
    }

    void after_insert(const std::vector<std::string>& ids, Timestamp now) override {
        std::set<std::string> touched;
        for (const auto& id : ids) {
            const auto* r = find(id);
            if (r && r->kind == RecordKind::RawTurn) touched.insert(r->session_id);
        }
        for (const auto& session : touched) refresh_summary(session, now);
    }

    void refresh_summary(const std::string& session, Timestamp now) {
        const auto& turns = session_turns_[session];
        if (turns.empty()) return;
        std::vector<std::string> firsts;
        std::vector<double> mean(options_.dimension, 0.0);
        bool any_embedding = false;
        Timestamp latest{};
        int latest_turn = 0;
        const std::size_t from = turns.size() > options_.summary_window ? turns.size() - options_.summary_window : 0;
        for (std::size_t i = 0; i < turns.size(); ++i) {
            const auto* r = find(turns[i]);
            if (r->ts >= latest) {
                latest = r->ts;
                latest_turn = r->turn_index;
            }
            if (r->embedding) {
                any_embedding = true;
                for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += (*r->embedding)[d];
            }
            if (i >= from) {
                auto sentences = text::split_sentences(r->text);
                if (!sentences.empty()) firsts.push_back(sentences.front());
            }
        }
        std::optional<Embedding> emb;
        if (any_embedding) {
            Embedding e(mean.begin(), mean.end());
            if (normalize_in_place(e)) emb = std::move(e);
        }
        std::string summary = text::join(firsts, " ");
        auto it = summaries_.find(session);
        if (it != summaries_.end()) {
            updating_ = true;
            update_record(it->second, std::move(summary), std::move(emb), latest);
            updating_ = false;
            auto& rec = mutable_record(it->second);
            rec.turn_index = latest_turn;
            return;
        }
        MemoryRecord rec;
        rec.record_id = next_id();
        rec.text = std::move(summary);
        rec.embedding = std::move(emb);
        rec.ts = latest;
        rec.last_access = std::max(latest, now);
        rec.session_id = session;
        rec.turn_index = latest_turn;
        rec.kind = RecordKind::Summary;
        rec.strength = options_.initial_strength_s;
        summaries_[session] = rec.record_id;
        auto [pos, _] = records_.emplace(rec.record_id, std::move(rec));
        index_add(pos->second);
    }

    std::vector<Candidate> search(const RetrievalSignal& signal, std::size_t) override {
        auto out = flat_scan(signal, SourceIndex::Vector);
        for (auto& c : out) {
            if (find(c.record.record_id)->kind == RecordKind::Summary) c.source_index = SourceIndex::Summary;
        }
        return out;
    }

    void fill_index_sizes(StoreStats& s) const override {
        s.index_sizes["session_summaries"] = summaries_.size();
        std::size_t raw = 0;
        for (const auto& [_, v] : session_turns_) raw += v.size();
        s.index_sizes["raw_vectors"] = raw;
    }

private:
    std::map<std::string, std::deque<std::string>> session_turns_;
    std::map<std::string, std::string> summaries_;
    bool updating_ = false;
};

constexpr std::string_view kStoreNames[] = {"fifo_queue",     "queue_segment",  "lsh_hash",
                                            "inverted_vector", "property_graph", "summary_vector"};

}  // namespace

std::span<const std::string_view> store_names() { return kStoreNames; }

std::unique_ptr<MemoryStore> make_store(std::string_view name, const StoreOptions& options) {
    if (name == "fifo_queue") return std::make_unique<FifoQueueStore>(options);
    if (name == "queue_segment") return std::make_unique<QueueSegmentStore>(options);
    if (name == "lsh_hash") return std::make_unique<LshHashStore>(options);
    if (name == "inverted_vector") return std::make_unique<InvertedVectorStore>(options);
    if (name == "property_graph") return std::make_unique<PropertyGraphStore>(options);
    if (name == "summary_vector") return std::make_unique<SummaryVectorStore>(options);
    std::string valid;
    for (auto n : kStoreNames) valid += (valid.empty() ? "" : ", ") + std::string(n);
    throw Error(ErrorCode::ConfigError, "unknown store backend '" + std::string(name) + "' (valid: " + valid + ")");
}

}  // namespace streammem
