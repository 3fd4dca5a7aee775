#include "streammem/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "streammem/error.hpp"
#include "streammem/gateway.hpp"

namespace streammem {

using json = nlohmann::json;

void SyntheticSpec::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
    if (n_sessions < 1 || turns_per_session < 1 || n_facts < 1 || rounds < 1 || needles_per_depth < 1) {
        fail("synthetic counts must be >= 1");
    }
    if (!(update_rate >= 0.0 && update_rate <= 1.0)) fail("update_rate must lie in [0, 1]");
    if (!(paraphrase_rate >= 0.0 && paraphrase_rate <= 1.0)) fail("paraphrase_rate must lie in [0, 1]");
    const auto total = n_sessions * turns_per_session;
    const auto updates = static_cast<std::size_t>(std::llround(update_rate * static_cast<double>(n_facts)));
    if (n_facts + updates > total) {
        fail("stream of " + std::to_string(total) + " turns cannot hold " + std::to_string(n_facts + updates) +
             " fact statements");
    }
    for (auto d : needle_depths) {
        if (d == 0 || d >= total) fail("needle depth " + std::to_string(d) + " out of range");
    }
}

namespace {

constexpr std::string_view kAttributes[] = {"color", "car",   "city",  "job",  "pet",      "food", "sport",
                                            "hobby", "movie", "book",  "song", "language", "team", "drink"};
constexpr std::string_view kActs[] = {"walking", "cooking", "painting", "jogging",
                                      "gardening", "sketching", "knitting", "baking"};
constexpr std::string_view kPlaces[] = {"river", "market", "station", "garden", "library", "harbor", "bakery", "plaza"};
constexpr std::string_view kAdjectives[] = {"breezy", "calm", "gloomy", "sunny", "chilly", "foggy", "quiet", "busy"};
constexpr std::string_view kSpeakers[] = {"Ava", "Ben"};

class Generator {
public:
    explicit Generator(std::uint64_t seed) : rng_(seed) {}

    std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    std::mt19937_64& rng() { return rng_; }

    std::string word(int syllables, bool closed) {
        static constexpr std::string_view consonants = "bdfgklmnprstvz";
        static constexpr std::string_view vowels = "aeiou";
        std::string w;
        for (int i = 0; i < syllables; ++i) {
            w += consonants[below(consonants.size())];
            w += vowels[below(vowels.size())];
        }
        if (closed) w += consonants[below(consonants.size())];
        return w;
    }

    std::string unique_word(std::set<std::string>& used, int syllables, bool closed) {
        for (;;) {
            auto w = word(syllables, closed);
            if (used.insert(w).second) return w;
        }
    }

    template <std::size_t N>
    std::string_view pick(const std::string_view (&list)[N]) {
        return list[below(N)];
    }

    std::string filler() {
        const auto act = pick(kActs);
        const auto place = pick(kPlaces);
        const auto adj = pick(kAdjectives);
        switch (below(5)) {
            case 0: return "I spent the afternoon " + std::string(act) + " near the " + std::string(place) + ".";
            case 1: return "It was " + std::string(adj) + " again, so we stayed by the " + std::string(place) + ".";
            case 2: return "Yesterday felt " + std::string(adj) + " after all that " + std::string(act) + ".";
            case 3: return "We were " + std::string(act) + " for hours at the " + std::string(place) + ".";
            default: return "Honestly the " + std::string(place) + " looked " + std::string(adj) + " this morning.";
        }
    }

private:
    std::mt19937_64 rng_;
};

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

struct FactKey {
    std::string entity;     // capitalized
    std::string attribute;  // lowercase
};

struct FactEvent {
    std::size_t key = 0;
    std::size_t position = 0;  // global insert index
    std::string value;
    bool update = false;
};

}  // namespace

SyntheticWorkload synth_workload(const SyntheticSpec& spec) {
    spec.validate();
    Generator gen(spec.seed);
    const std::size_t total = spec.n_sessions * spec.turns_per_session;
    const std::size_t n_updates = static_cast<std::size_t>(std::llround(spec.update_rate * static_cast<double>(spec.n_facts)));

    // Fact keys: each entity carries up to three attributes.
    std::set<std::string> used;
    std::vector<FactKey> keys;
    const std::size_t attrs_per_entity = 3;
    std::vector<std::string_view> attrs(std::begin(kAttributes), std::end(kAttributes));
    while (keys.size() < spec.n_facts) {
        const std::string entity = capitalize(gen.unique_word(used, 3, true));
        std::shuffle(attrs.begin(), attrs.end(), gen.rng());
        for (std::size_t a = 0; a < attrs_per_entity && keys.size() < spec.n_facts; ++a) {
            keys.push_back({entity, std::string(attrs[a])});
        }
    }

    // Events: every key once, update keys twice; the first occurrence in
    // stream order is the original statement.
    std::vector<std::size_t> event_keys(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) event_keys[i] = i;
    {
        std::vector<std::size_t> order(keys.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), gen.rng());
        for (std::size_t i = 0; i < n_updates; ++i) event_keys.push_back(order[i]);
    }
    std::shuffle(event_keys.begin(), event_keys.end(), gen.rng());
    std::vector<std::size_t> positions(total);
    for (std::size_t i = 0; i < total; ++i) positions[i] = i;
    std::shuffle(positions.begin(), positions.end(), gen.rng());
    positions.resize(event_keys.size());
    std::sort(positions.begin(), positions.end());

    std::vector<FactEvent> events;
    std::vector<std::vector<std::size_t>> key_events(keys.size());
    std::map<std::size_t, std::size_t> event_at;  // position -> event index
    for (std::size_t i = 0; i < event_keys.size(); ++i) {
        const auto k = event_keys[i];
        FactEvent e{k, positions[i], gen.unique_word(used, 2, true), !key_events[k].empty()};
        key_events[k].push_back(events.size());
        event_at[e.position] = events.size();
        events.push_back(std::move(e));
    }

    SyntheticWorkload out;
    auto ref_of = [&](std::size_t position) {
        return TurnRef{"s" + std::to_string(position / spec.turns_per_session),
                       static_cast<int>(position % spec.turns_per_session)};
    };
    for (std::size_t s = 0; s < spec.n_sessions; ++s) {
        Session session;
        session.session_id = "s" + std::to_string(s);
        for (std::size_t t = 0; t < spec.turns_per_session; ++t) {
            const std::size_t pos = s * spec.turns_per_session + t;
            Turn turn;
            turn.turn_index = static_cast<int>(t);
            turn.speaker = std::string(kSpeakers[pos % 2]);
            auto it = event_at.find(pos);
            if (it != event_at.end()) {
                const auto& e = events[it->second];
                turn.text = "The " + keys[e.key].attribute + " of " + keys[e.key].entity + " is " + e.value + ".";
                turn.fact_update = e.update;
            } else {
                turn.text = gen.filler();
            }
            session.turns.push_back(std::move(turn));
        }
        out.sessions.push_back(std::move(session));
    }

    // Latest event of key k at or before position p.
    auto latest_at = [&](std::size_t k, std::size_t p) -> const FactEvent* {
        const FactEvent* best = nullptr;
        for (auto idx : key_events[k]) {
            if (events[idx].position <= p) best = &events[idx];
        }
        return best;
    };

    std::size_t query_no = 0;
    auto next_id = [&](const char* prefix) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%04zu", prefix, ++query_no);
        return std::string(buf);
    };

    for (std::size_t j = 1; j <= spec.rounds; ++j) {
        const double fraction = static_cast<double>(j) / static_cast<double>(spec.rounds);
        const auto cut = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total) - 1e-9));
        std::vector<std::size_t> visible;
        for (std::size_t k = 0; k < keys.size(); ++k) {
            if (cut > 0 && latest_at(k, cut - 1)) visible.push_back(k);
        }
        std::shuffle(visible.begin(), visible.end(), gen.rng());
        if (visible.size() > spec.queries_per_round) visible.resize(spec.queries_per_round);
        for (auto k : visible) {
            const FactEvent* e = latest_at(k, cut - 1);
            RetrievePayload q;
            q.query_id = next_id("r");
            q.query = "What is the " + keys[k].attribute + " of " + keys[k].entity + "?";
            q.gold_answer = e->value;
            q.category = "single-hop";
            out.queries.push_back({q, AtFraction{fraction}});
            out.answer_key.push_back({q.query_id, e->value, {ref_of(e->position)}, "round", std::nullopt, false,
                                      keys[k].entity, keys[k].attribute});
        }
    }

    std::set<std::size_t> needle_keys;
    for (auto depth : spec.needle_depths) {
        for (std::size_t rep = 0; rep < spec.needles_per_depth; ++rep) {
            // Events that stay current for `depth` more inserts.
            std::vector<std::size_t> eligible;
            std::vector<std::size_t> fresh;
            for (std::size_t i = 0; i < events.size(); ++i) {
                const auto& e = events[i];
                if (e.position + depth >= total) continue;
                bool superseded = false;
                for (auto other : key_events[e.key]) {
                    const auto p = events[other].position;
                    if (p > e.position && p <= e.position + depth) superseded = true;
                }
                if (superseded) continue;
                eligible.push_back(i);
                if (!needle_keys.contains(e.key)) fresh.push_back(i);
            }
            const auto& pool = fresh.empty() ? eligible : fresh;
            if (pool.empty()) continue;
            const auto& e = events[pool[gen.below(pool.size())]];
            needle_keys.insert(e.key);
            const bool paraphrase = gen.unit() < spec.paraphrase_rate;
            const auto& key = keys[e.key];
            RetrievePayload q;
            q.query_id = next_id("n");
            if (paraphrase) {
                q.query = "Which " + mock_rules::synonym(key.attribute, 0) + " belongs to " + key.entity + "ian?";
            } else {
                q.query = "What is the " + key.attribute + " of " + key.entity + "?";
            }
            q.gold_answer = e.value;
            q.category = "needle";
            out.queries.push_back({q, AfterEvidence{{ref_of(e.position + depth)}}});
            out.answer_key.push_back(
                {q.query_id, e.value, {ref_of(e.position)}, "needle", depth, paraphrase, key.entity, key.attribute});
        }
    }

    SerializeOptions opts;
    opts.source = "synth";
    opts.logical_ticks = true;
    out.stream = serialize_stream(out.sessions, out.queries, opts);
    return out;
}

void write_answer_key(std::ostream& out, const std::vector<AnswerKeyEntry>& key) {
    for (const auto& e : key) {
        nlohmann::ordered_json j;
        j["query_id"] = e.query_id;
        j["gold"] = e.gold;
        auto ev = nlohmann::ordered_json::array();
        for (const auto& r : e.evidence) ev.push_back({{"session_id", r.session_id}, {"turn_index", r.turn_index}});
        j["evidence"] = ev;
        j["kind"] = e.kind;
        j["depth"] = e.depth ? nlohmann::ordered_json(*e.depth) : nlohmann::ordered_json(nullptr);
        j["paraphrased"] = e.paraphrased;
        j["entity"] = e.entity;
        j["attribute"] = e.attribute;
        out << j.dump() << '\n';
    }
}

std::vector<AnswerKeyEntry> read_answer_key(std::istream& in) {
    std::vector<AnswerKeyEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            AnswerKeyEntry e;
            e.query_id = j.at("query_id").get<std::string>();
            e.gold = j.at("gold").get<std::string>();
            for (const auto& r : j.at("evidence")) {
                e.evidence.push_back({r.at("session_id").get<std::string>(), r.at("turn_index").get<int>()});
            }
            e.kind = j.at("kind").get<std::string>();
            if (!j.at("depth").is_null()) e.depth = j.at("depth").get<std::size_t>();
            e.paraphrased = j.at("paraphrased").get<bool>();
            e.entity = j.value("entity", "");
            e.attribute = j.value("attribute", "");
            out.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::SchemaError, "answer key line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// LoCoMo

namespace {

[[noreturn]] void schema_fail(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::SchemaError, where + ": " + what);
}

/// "1:56 pm on 8 May, 2023" -> timestamp (UTC).
std::optional<Timestamp> parse_locomo_date(const std::string& s) {
    static const std::regex re(R"((\d{1,2}):(\d{2})\s*([ap]m)\s+on\s+(\d{1,2})\s+([A-Za-z]+),?\s+(\d{4}))",
                               std::regex::icase);
    std::smatch m;
    if (!std::regex_search(s, m, re)) return std::nullopt;
    static const char* months[] = {"jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"};
    std::string mon = m[5].str().substr(0, 3);
    std::transform(mon.begin(), mon.end(), mon.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    int month = -1;
    for (int i = 0; i < 12; ++i) {
        if (mon == months[i]) month = i;
    }
    if (month < 0) return std::nullopt;
    int hour = std::stoi(m[1].str()) % 12;
    std::string ampm = m[3].str();
    if (ampm[0] == 'p' || ampm[0] == 'P') hour += 12;
    std::tm tm{};
    tm.tm_year = std::stoi(m[6].str()) - 1900;
    tm.tm_mon = month;
    tm.tm_mday = std::stoi(m[4].str());
    tm.tm_hour = hour;
    tm.tm_min = std::stoi(m[2].str());
    return Timestamp{static_cast<std::int64_t>(timegm(&tm)) * kMicrosPerSecond};
}

std::string category_label(const json& c) {
    int v = -1;
    if (c.is_number_integer()) v = c.get<int>();
    if (c.is_string()) {
        try {
            v = std::stoi(c.get<std::string>());
        } catch (...) {
            return "unknown";
        }
    }
    switch (v) {
        case 1: return "multi-hop";
        case 2: return "temporal";
        case 3: return "open-domain";
        case 4: return "single-hop";
        case 5: return "abstention";
        default: return "unknown";
    }
}

std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "";
    return v.dump();
}

/// Splits an evidence field ("D1:3", "D1:3; D2:4") into dia ids.
std::vector<std::string> evidence_ids(const json& ev) {
    std::vector<std::string> out;
    auto add = [&](const std::string& s) {
        static const std::regex id_re(R"(D\d+:\d+)");
        for (auto it = std::sregex_iterator(s.begin(), s.end(), id_re); it != std::sregex_iterator(); ++it) {
            out.push_back(it->str());
        }
    };
    if (ev.is_array()) {
        for (const auto& e : ev) {
            if (e.is_string()) add(e.get<std::string>());
        }
    } else if (ev.is_string()) {
        add(ev.get<std::string>());
    }
    return out;
}

StreamManifest convert_sample(const json& sample, const std::string& where) {
    if (!sample.is_object()) schema_fail(where, "sample is not an object");
    if (!sample.contains("conversation")) schema_fail(where, "missing field 'conversation'");
    const auto& conv = sample.at("conversation");
    if (!conv.is_object()) schema_fail(where + ".conversation", "not an object");
    const std::string sample_id = sample.contains("sample_id") ? scalar_text(sample.at("sample_id")) : where;

    std::map<int, Session> sessions;
    std::map<std::string, TurnRef> dia;
    static const std::regex session_key(R"(session_(\d+))");
    for (const auto& [key, value] : conv.items()) {
        std::smatch m;
        if (!std::regex_match(key, m, session_key)) continue;
        const int n = std::stoi(m[1].str());
        const std::string field = where + ".conversation." + key;
        if (!value.is_array()) schema_fail(field, "expected a list of turns");
        Session s;
        s.session_id = key;
        const std::string date_key = key + "_date_time";
        if (!conv.contains(date_key)) schema_fail(where + ".conversation." + date_key, "missing session date");
        s.start = parse_locomo_date(scalar_text(conv.at(date_key)));
        if (!s.start) schema_fail(where + ".conversation." + date_key, "unparseable date '" + scalar_text(conv.at(date_key)) + "'");
        int position = 0;
        for (const auto& t : value) {
            const std::string tf = field + "[" + std::to_string(position) + "]";
            if (!t.is_object() || !t.contains("dia_id")) schema_fail(tf, "turn without 'dia_id'");
            const std::string id = scalar_text(t.at("dia_id"));
            std::string body = t.contains("text") ? scalar_text(t.at("text")) : "";
            if (t.contains("blip_caption") && t.at("blip_caption").is_string()) {
                const auto caption = t.at("blip_caption").get<std::string>();
                body += (body.empty() ? "" : " ") + std::string("[shares an image: ") + caption + "]";
            }
            Turn turn;
            turn.turn_index = position;
            turn.text = body;
            if (t.contains("speaker")) turn.speaker = scalar_text(t.at("speaker"));
            // Turns sit one second apart after the session start.
            turn.ts = Timestamp{s.start->us + position * kMicrosPerSecond};
            ++position;
            if (body.find_first_not_of(" \t\r\n") == std::string::npos) continue;
            dia[id] = {key, turn.turn_index};
            s.turns.push_back(std::move(turn));
        }
        sessions[n] = std::move(s);
    }
    if (sessions.empty()) schema_fail(where + ".conversation", "no session_N lists");

    std::vector<Session> ordered;
    for (auto& [_, s] : sessions) ordered.push_back(std::move(s));

    std::vector<QuerySpec> queries;
    if (sample.contains("qa")) {
        const auto& qa = sample.at("qa");
        if (!qa.is_array()) schema_fail(where + ".qa", "expected a list");
        for (std::size_t i = 0; i < qa.size(); ++i) {
            const auto& item = qa[i];
            const std::string qf = where + ".qa[" + std::to_string(i) + "]";
            if (!item.is_object() || !item.contains("question")) schema_fail(qf, "missing field 'question'");
            RetrievePayload p;
            p.query = scalar_text(item.at("question"));
            p.category = item.contains("category") ? category_label(item.at("category")) : "unknown";
            if (item.contains("answer")) {
                p.gold_answer = scalar_text(item.at("answer"));
            } else if (p.category != "abstention") {
                schema_fail(qf, "missing field 'answer'");
            }
            p.query_id = sample_id + "/q" + std::to_string(i);
            AfterEvidence trig;
            if (item.contains("evidence")) {
                for (const auto& id : evidence_ids(item.at("evidence"))) {
                    auto it = dia.find(id);
                    if (it == dia.end()) schema_fail(qf + ".evidence", "unknown dialogue id '" + id + "'");
                    trig.evidence.push_back(it->second);
                }
            }
            queries.push_back({std::move(p), std::move(trig)});
        }
    }
    SerializeOptions opts;
    opts.source = "locomo";
    return serialize_stream(ordered, queries, opts);
}

}  // namespace

StreamManifest load_locomo_text(const std::string& json_text, const std::string& source) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        schema_fail(source, e.what());
    }
    std::vector<StreamManifest> parts;
    if (root.is_array()) {
        for (std::size_t i = 0; i < root.size(); ++i) parts.push_back(convert_sample(root[i], source + "[" + std::to_string(i) + "]"));
    } else {
        parts.push_back(convert_sample(root, source));
    }
    if (parts.size() == 1) {
        parts.front().source = "locomo";
        return std::move(parts.front());
    }
    auto m = concat_streams(parts, kMicrosPerDay);
    m.source = "locomo";
    return m;
}

StreamManifest load_locomo(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return load_locomo_text(ss.str(), path.string());
}

StreamManifest load_generic(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    auto m = read_stream(in, path.filename().string());
    const auto report = validate_stream(m);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        throw Error(ErrorCode::ValidationError, path.string() + ": " + std::to_string(report.violations.size()) +
                                                    " violation(s); first at request " + std::to_string(v.index) +
                                                    ": " + v.detail);
    }
    return m;
}

RecallStats evidence_recall(const std::vector<CheckpointReport>& reports, const std::vector<AnswerKeyEntry>& key,
                            const std::function<bool(const AnswerKeyEntry&)>& select, std::size_t top_k) {
    std::map<std::string, const AnswerKeyEntry*> by_id;
    for (const auto& e : key) by_id[e.query_id] = &e;
    RecallStats stats;
    for (const auto& r : reports) {
        for (const auto& q : r.queries) {
            auto it = by_id.find(q.query_id);
            if (it == by_id.end() || !select(*it->second)) continue;
            ++stats.total;
            const std::size_t n = std::min(top_k, q.provenance.size());
            bool hit = false;
            for (std::size_t i = 0; i < n && !hit; ++i) {
                const auto& p = q.provenance[i];
                if (p.kind == "summary") continue;
                for (const auto& ev : it->second->evidence) {
                    if (ev.session_id == p.session_id && ev.turn_index == p.turn_index) hit = true;
                }
            }
            if (hit) ++stats.hits;
        }
    }
    return stats;
}

}  // namespace streammem
