#include "streammem/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "streammem/error.hpp"
#include "streammem/text.hpp"

namespace streammem {

double dot(std::span<const float> a, std::span<const float> b) {
    const std::size_t n = std::min(a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

bool normalize_in_place(std::vector<float>& v) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    if (sq <= 0.0) return false;
    const double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(x * inv);
    return true;
}

// ---------------------------------------------------------------------------
// Prompt templates

namespace {

const std::vector<PromptTemplate>& templates() {
    static const std::vector<PromptTemplate> t = {
        {"summarize",
         "Summarize the following dialogue turn in at most {max_sentences} sentences. Keep names, dates and "
         "numbers.\n\n{text}",
         {"text", "max_sentences"}},
        {"triplet_extract",
         "Extract at most {max_triplets} factual triplets from the text. Output one per line as "
         "\"subject | relation | object\". Output \"no facts\" if there are none.\n\n{text}",
         {"text", "max_triplets"}},
        {"crud",
         "A new memory arrives. Compare it with the existing memories and reply with exactly one action: ADD, "
         "NOOP, UPDATE <id> or DELETE <id>.\n\nNew memory: {new_memory}\n\nExisting memories (id<TAB>text):\n"
         "{neighbors}",
         {"new_memory", "neighbors"}},
        {"validate",
         "Does answering the following message require looking up stored memories? Reply RETRIEVE or SKIP.\n\n"
         "{query}",
         {"query"}},
        {"keyword_extract",
         "Extract at most {max_keywords} search keywords from the question, most important first, one per "
         "line.\n\n{query}",
         {"query", "max_keywords"}},
        {"decompose",
         "Split the question into at most {max_subqueries} self-contained sub-questions, one per line.\n\n"
         "{query}",
         {"query", "max_subqueries"}},
        {"paraphrase",
         "Write {n} paraphrases of the question, one per line.\n\n{query}",
         {"query", "n"}},
        {"answer",
         "Answer the question using only the context. Reply with a short answer.\n\nContext:\n{context}\n\n"
         "Question: {query}\nAnswer:",
         {"query", "context"}},
    };
    return t;
}

}  // namespace

std::span<const PromptTemplate> prompt_templates() { return templates(); }

const PromptTemplate* find_template(std::string_view id) {
    for (const auto& t : templates()) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

std::string render_prompt(const ChatRequest& req) {
    const auto* tpl = find_template(req.template_id);
    if (!tpl) throw GatewayError(GatewayErrorKind::Malformed, "unregistered template '" + req.template_id + "'");
    for (auto ph : tpl->placeholders) {
        if (!req.variables.contains(std::string(ph))) {
            throw GatewayError(GatewayErrorKind::Malformed,
                               "template '" + req.template_id + "' needs variable '" + std::string(ph) + "'");
        }
    }
    std::string out;
    std::string_view src = tpl->text;
    std::size_t i = 0;
    while (i < src.size()) {
        if (src[i] == '{') {
            const auto close = src.find('}', i);
            if (close != std::string_view::npos) {
                const std::string key(src.substr(i + 1, close - i - 1));
                auto it = req.variables.find(key);
                if (it != req.variables.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += src[i++];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mock rules

namespace mock_rules {

namespace {

const std::unordered_set<std::string_view>& verbs() {
    static const std::unordered_set<std::string_view> v = {
        "is",     "are",     "was",     "were",   "likes",  "like",    "loves",   "love",    "hates",
        "owns",   "has",     "have",    "had",    "lives",  "lived",   "works",   "worked",  "visited",
        "visits", "went",    "plays",   "played", "enjoys", "enjoyed", "prefers", "bought",  "adopted",
        "moved",  "studies", "studied", "became", "married", "met",    "drives",  "drove",   "reads",
    };
    return v;
}

bool is_determiner(std::string_view w) {
    return w == "the" || w == "a" || w == "an" || w == "my" || w == "our" || w == "his" || w == "her" ||
           w == "their" || w == "your";
}

std::string join_words(const std::vector<std::string>& words, std::size_t from, std::size_t to) {
    while (from < to && is_determiner(words[from])) ++from;
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        if (!out.empty()) out += ' ';
        out += words[i];
    }
    return out;
}

const std::vector<std::vector<std::string_view>>& groups() {
    static const std::vector<std::vector<std::string_view>> g = {
        {"color", "shade", "hue"},     {"car", "automobile", "vehicle"}, {"city", "town"},
        {"job", "occupation", "profession"}, {"pet", "companion"},     {"food", "dish", "meal"},
        {"sport", "game"},             {"hobby", "pastime"},             {"house", "home", "residence"},
        {"movie", "film"},             {"book", "novel"},                {"song", "tune"},
        {"friend", "buddy", "pal"},    {"trip", "journey", "voyage"},    {"gift", "present"},
        {"big", "large"},              {"small", "little"},              {"happy", "glad"},
        {"begin", "start"},            {"favorite", "preferred"},        {"instrument", "device"},
        {"drink", "beverage"},         {"language", "tongue"},           {"team", "squad"},
    };
    return g;
}

}  // namespace

std::vector<Svo> extract_svo(std::string_view text) {
    std::vector<Svo> out;
    for (const auto& sentence : text::split_sentences(text)) {
        const auto words = text::raw_tokens(sentence);
        for (std::size_t i = 1; i + 1 < words.size(); ++i) {
            if (!verbs().contains(words[i])) continue;
            Svo t{join_words(words, 0, i), words[i], join_words(words, i + 1, words.size())};
            if (!t.subject.empty() && !t.object.empty()) out.push_back(std::move(t));
            break;
        }
    }
    return out;
}

std::span<const std::vector<std::string_view>> synonym_groups() { return groups(); }

std::string synonym(std::string_view word, std::size_t j) {
    for (const auto& g : groups()) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g[i] == word) return std::string(g[(i + 1 + j) % g.size()]);
        }
    }
    return std::string(word);
}

std::string strip_context_prefix(std::string_view line) {
    if (line.starts_with("[ts=")) {
        const auto close = line.find("] ");
        if (close != std::string_view::npos) {
            line.remove_prefix(close + 2);
            const auto colon = line.find(": ");
            // Speaker labels are short and contain no sentence punctuation.
            if (colon != std::string_view::npos && colon < 64 &&
                line.substr(0, colon).find_first_of(".!?") == std::string_view::npos) {
                line.remove_prefix(colon + 2);
            }
        }
    }
    return text::trim(line);
}

}  // namespace mock_rules

namespace {

using VarMap = std::map<std::string, std::string>;

const std::string& var(const VarMap& vars, const char* name) {
    static const std::string empty;
    auto it = vars.find(name);
    return it == vars.end() ? empty : it->second;
}

std::size_t var_count(const VarMap& vars, const char* name, std::size_t fallback) {
    try {
        return static_cast<std::size_t>(std::stoul(var(vars, name)));
    } catch (...) {
        return fallback;
    }
}

std::string mock_summarize(const VarMap& vars) {
    const auto sentences = text::split_sentences(var(vars, "text"));
    return sentences.empty() ? std::string() : sentences.front();
}

std::string mock_triplets(const VarMap& vars) {
    const auto svo = mock_rules::extract_svo(var(vars, "text"));
    if (svo.empty()) return "no facts";
    std::string out;
    for (const auto& t : svo) out += t.subject + " | " + t.relation + " | " + t.object + "\n";
    return out;
}

std::string mock_crud(const VarMap& vars) {
    const std::string incoming = text::trim(var(vars, "new_memory"));
    const auto new_facts = mock_rules::extract_svo(incoming);
    std::istringstream lines(var(vars, "neighbors"));
    std::string line;
    std::vector<std::pair<std::string, std::string>> neighbors;
    while (std::getline(lines, line)) {
        const auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        neighbors.emplace_back(line.substr(0, tab), text::trim(line.substr(tab + 1)));
    }
    for (const auto& [id, body] : neighbors) {
        if (body == incoming) return "NOOP";
    }
    for (const auto& [id, body] : neighbors) {
        for (const auto& old_fact : mock_rules::extract_svo(body)) {
            for (const auto& nf : new_facts) {
                if (nf.subject == old_fact.subject && nf.relation == old_fact.relation &&
                    nf.object != old_fact.object) {
                    return "UPDATE " + id;
                }
            }
        }
    }
    return "ADD";
}

std::string mock_validate(const VarMap& vars) {
    static const std::unordered_set<std::string_view> small_talk = {
        "hello", "hi",   "hey",     "thanks", "thank", "you",  "good", "morning", "evening", "night",
        "bye",   "goodbye", "how",  "are",    "ok",    "okay", "lol",  "there",   "cheers",  "great",
    };
    const auto tokens = text::raw_tokens(var(vars, "query"));
    if (tokens.empty()) return "SKIP";
    for (const auto& t : tokens) {
        if (!small_talk.contains(t)) return "RETRIEVE";
    }
    return "SKIP";
}

std::string mock_keywords(const VarMap& vars) {
    static const std::unordered_set<std::string_view> non_nouns = {
        "where", "when",  "why",   "how",  "whom",  "whose", "go",    "goes",  "went",  "gone",  "going",
        "get",   "got",   "make",  "made", "say",   "said",  "tell",  "told",  "can",   "could", "would",
        "should", "will", "shall", "may",  "might", "must",  "there", "here",  "not",   "no",    "yes",
        "also",  "very",  "just",  "ever", "never", "so",    "than",  "then",  "too",   "much",  "many",
        "some",  "any",   "all",   "each", "every", "other", "such",  "only",  "own",   "same",  "now",
        "kind",  "being", "belong", "belongs",
    };
    const std::string& query = var(vars, "query");
    const std::size_t max_keywords = var_count(vars, "max_keywords", 5);
    std::vector<std::string> order;
    std::unordered_map<std::string, int> tf;
    std::istringstream words(query);
    std::string word;
    while (words >> word) {
        const bool proper = std::isupper(static_cast<unsigned char>(word.front())) != 0;
        const auto cleaned = text::raw_tokens(word);
        for (const auto& tok : cleaned) {
            if (text::is_stopword(tok) || non_nouns.contains(tok)) continue;
            std::string kw = proper ? tok : text::porter_stem(tok);
            if (tf[kw]++ == 0) order.push_back(kw);
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) { return tf[a] > tf[b]; });
    if (order.size() > max_keywords) order.resize(max_keywords);
    std::string out;
    for (const auto& k : order) out += k + "\n";
    return out;
}

std::string mock_decompose(const VarMap& vars) {
    std::string q = text::trim(var(vars, "query"));
    const std::size_t max_sub = var_count(vars, "max_subqueries", 3);
    std::string terminal;
    while (!q.empty() && (q.back() == '?' || q.back() == '.' || q.back() == '!')) {
        terminal.insert(terminal.begin(), q.back());
        q.pop_back();
    }
    std::vector<std::string> parts;
    std::string lower = q;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::size_t start = 0;
    for (;;) {
        const auto pos = lower.find(" and ", start);
        if (pos == std::string::npos) break;
        parts.push_back(text::trim(std::string_view(q).substr(start, pos - start)));
        start = pos + 5;
    }
    parts.push_back(text::trim(std::string_view(q).substr(start)));
    std::string out;
    std::size_t emitted = 0;
    for (auto& p : parts) {
        while (!p.empty() && p.back() == ',') p.pop_back();
        if (p.empty() || emitted == max_sub) continue;
        out += p + terminal + "\n";
        ++emitted;
    }
    return out;
}

std::string mock_paraphrase(const VarMap& vars) {
    const std::string& q = var(vars, "query");
    const std::size_t n = var_count(vars, "n", 1);
    std::string out;
    for (std::size_t j = 0; j < n; ++j) {
        std::istringstream words(q);
        std::string word;
        std::string line;
        while (words >> word) {
            std::size_t b = 0;
            std::size_t e = word.size();
            while (b < e && std::ispunct(static_cast<unsigned char>(word[b]))) ++b;
            while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1]))) --e;
            std::string core = word.substr(b, e - b);
            std::string lower = core;
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            const std::string swapped = mock_rules::synonym(lower, j);
            if (!line.empty()) line += ' ';
            line += word.substr(0, b) + (swapped == lower ? core : swapped) + word.substr(e);
        }
        out += line + "\n";
    }
    return out;
}

/// Echoes the context sentence sharing the most index terms with the query;
/// ties go to the most recent line.
std::string mock_answer(const VarMap& vars) {
    const auto query_terms = text::index_terms(var(vars, "query"));
    const std::unordered_set<std::string> wanted(query_terms.begin(), query_terms.end());
    std::istringstream lines(var(vars, "context"));
    std::string line;
    std::string best;
    std::string best_ts;
    std::size_t best_overlap = 0;
    while (std::getline(lines, line)) {
        std::string ts;
        if (line.starts_with("[ts=")) {
            const auto close = line.find(']');
            if (close != std::string::npos) ts = line.substr(4, close - 4);
        }
        const std::string body = mock_rules::strip_context_prefix(line);
        for (const auto& sentence : text::split_sentences(body)) {
            const auto terms = text::index_terms(sentence);
            const std::unordered_set<std::string> have(terms.begin(), terms.end());
            std::size_t overlap = 0;
            for (const auto& w : wanted) overlap += have.contains(w) ? 1 : 0;
            if (overlap > best_overlap || (overlap > 0 && overlap == best_overlap && ts > best_ts)) {
                best_overlap = overlap;
                best = sentence;
                best_ts = ts;
            }
        }
    }
    return best_overlap == 0 ? std::string("unknown") : best;
}

}  // namespace

Embedding MockBackend::embed_text(std::string_view s) const {
    Embedding v(dim_, 0.0f);
    auto add_trigrams = [&](const std::string& padded) {
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
            std::uint64_t h = 1469598103934665603ULL ^ seed_;
            for (std::size_t k = i; k < i + 3; ++k) {
                h ^= static_cast<unsigned char>(padded[k]);
                h *= 1099511628211ULL;
            }
            h ^= h >> 29;
            const std::size_t bucket = static_cast<std::size_t>(h % dim_);
            v[bucket] += (h >> 63) ? -1.0f : 1.0f;
        }
    };
    auto tokens = text::normalize_tokens(s);
    for (const auto& t : tokens) add_trigrams(" " + t + " ");
    if (!normalize_in_place(v)) {
        // Punctuation-only input: fall back to the raw characters.
        add_trigrams(" " + std::string(s) + " ");
        if (!normalize_in_place(v)) {
            throw GatewayError(GatewayErrorKind::EmptyInput, "nothing to embed");
        }
    }
    return v;
}

std::vector<Embedding> MockBackend::embed(std::span<const std::string> texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        if (text::trim(t).empty()) throw GatewayError(GatewayErrorKind::EmptyInput, "empty text");
        out.push_back(embed_text(t));
    }
    return out;
}

std::string MockBackend::chat(const ChatRequest& req) {
    render_prompt(req);  // registry and placeholder checks
    const auto& id = req.template_id;
    if (id == "summarize") return mock_summarize(req.variables);
    if (id == "triplet_extract") return mock_triplets(req.variables);
    if (id == "crud") return mock_crud(req.variables);
    if (id == "validate") return mock_validate(req.variables);
    if (id == "keyword_extract") return mock_keywords(req.variables);
    if (id == "decompose") return mock_decompose(req.variables);
    if (id == "paraphrase") return mock_paraphrase(req.variables);
    if (id == "answer") return mock_answer(req.variables);
    throw GatewayError(GatewayErrorKind::Malformed, "mock has no rule for '" + id + "'");
}

// ---------------------------------------------------------------------------

TokenBucket::TokenBucket(double rate_per_s, double burst)
    : rate_(rate_per_s), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lock(mu_);
    for (;;) {
        const auto now = std::chrono::steady_clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait_s = (1.0 - tokens_) / rate_;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
        lock.lock();
    }
}

// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<GatewayBackend> backend, RetryPolicy retry)
    : backend_(std::move(backend)), retry_(retry) {}

std::vector<GatewayTiming> Gateway::take_timings() { return std::exchange(timings_, {}); }

template <class F>
auto Gateway::with_retry(CallKind kind, Stage stage, F&& call) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    int attempt = 0;
    for (;;) {
        try {
            auto result = call();
            timings_.push_back(
                {kind, std::chrono::duration<double, std::micro>(clock::now() - start).count(), stage, true, attempt});
            return result;
        } catch (const GatewayError& e) {
            const bool retryable = e.kind() == GatewayErrorKind::Timeout || e.kind() == GatewayErrorKind::Transport ||
                                   e.kind() == GatewayErrorKind::RateLimited;
            const auto backoff = retry_.base_backoff * (1LL << attempt);
            const bool in_budget = clock::now() - start + backoff < retry_.total_timeout;
            if (!retryable || attempt >= retry_.max_retries || !in_budget) {
                timings_.push_back({kind, std::chrono::duration<double, std::micro>(clock::now() - start).count(),
                                    stage, false, attempt});
                throw GatewayError(e.kind(), e.what(), attempt);
            }
            std::this_thread::sleep_for(backoff);
            ++attempt;
        }
    }
}

std::vector<Embedding> Gateway::embed(std::span<const std::string> texts, Stage stage) {
    return with_retry(CallKind::Embed, stage, [&] {
        if (texts.empty()) throw GatewayError(GatewayErrorKind::EmptyInput, "no texts to embed");
        auto out = backend_->embed(texts);
        if (out.size() != texts.size()) throw GatewayError(GatewayErrorKind::Malformed, "embedding count mismatch");
        return out;
    });
}

Embedding Gateway::embed_one(std::string_view text, Stage stage) {
    const std::string s(text);
    return std::move(embed(std::span<const std::string>(&s, 1), stage).front());
}

std::string Gateway::chat(const ChatRequest& req, Stage stage) {
    return with_retry(CallKind::Chat, stage, [&] { return backend_->chat(req); });
}

AnswerResult answer(Gateway& gateway, std::string_view query, std::string_view context) {
    ChatRequest req;
    req.template_id = "answer";
    req.variables["query"] = std::string(query);
    req.variables["context"] = std::string(context);
    req.max_tokens = 64;
    try {
        return {text::trim(gateway.chat(req, Stage::Generation)), false};
    } catch (const GatewayError&) {
        return {"", true};
    }
}

}  // namespace streammem
