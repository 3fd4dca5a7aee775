#include "streammem/config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "streammem/error.hpp"

namespace streammem {

using ojson = nlohmann::ordered_json;

namespace {

ojson from_yaml(const YAML::Node& n) {
    switch (n.Type()) {
        case YAML::NodeType::Undefined:
        case YAML::NodeType::Null: return nullptr;
        case YAML::NodeType::Sequence: {
            ojson arr = ojson::array();
            for (const auto& item : n) arr.push_back(from_yaml(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            ojson obj = ojson::object();
            for (const auto& kv : n) obj[kv.first.as<std::string>()] = from_yaml(kv.second);
            return obj;
        }
        case YAML::NodeType::Scalar: break;
    }
    const std::string& s = n.Scalar();
    if (n.Tag() == "!") return s;  // quoted
    std::int64_t i = 0;
    if (YAML::convert<std::int64_t>::decode(n, i)) return i;
    double d = 0.0;
    if (YAML::convert<double>::decode(n, d)) return d;
    std::string lower = s;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "true" || lower == "yes") return true;
    if (lower == "false" || lower == "no") return false;
    return s;
}

ojson parse_yaml(const std::string& text, const std::string& source) {
    try {
        return from_yaml(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::ConfigError, source + ": " + e.what());
    }
}

std::vector<std::string> split_dotted(const std::string& key) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : key) {
        if (c == '.') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

/// Sets a dotted key. A string standing where a section is expected is the
/// strategy shorthand and becomes {strategy: <string>}.
void set_dotted(ojson& root, const std::string& key, ojson value) {
    const auto parts = split_dotted(key);
    ojson* node = &root;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) *node = ojson::object();
        ojson& child = (*node)[parts[i]];
        if (child.is_string()) {
            child = ojson{{"strategy", child.get<std::string>()}};
        } else if (!child.is_object()) {
            child = ojson::object();
        }
        node = &child;
    }
    if (!node->is_object()) *node = ojson::object();
    (*node)[parts.back()] = std::move(value);
}

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw Error(ErrorCode::ConfigError, source_ + ": key '" + key + "': " + what);
    }

    void check_keys(const ojson& obj, const std::string& prefix, std::initializer_list<std::string_view> allowed) const {
        if (!obj.is_object()) fail(prefix, "expected a mapping");
        for (const auto& [k, _] : obj.items()) {
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
                std::string list;
                for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
                fail(join(prefix, k), "unknown key (expected one of: " + list + ")");
            }
        }
    }

    static std::string join(const std::string& prefix, const std::string& k) {
        return prefix.empty() ? k : prefix + "." + k;
    }

    void str(const ojson& obj, const std::string& prefix, const char* key, std::string& out) const {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        if (!v.is_string()) fail(join(prefix, key), "expected a string");
        out = v.get<std::string>();
    }

    template <typename Int>
    void integer(const ojson& obj, const std::string& prefix, const char* key, Int& out) const {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        if (!v.is_number_integer()) fail(join(prefix, key), "expected an integer");
        const auto x = v.get<std::int64_t>();
        if constexpr (std::is_unsigned_v<Int>) {
            if (x < 0) fail(join(prefix, key), "expected a non-negative integer");
        }
        if (x < static_cast<std::int64_t>(std::numeric_limits<Int>::min()) ||
            static_cast<std::uint64_t>(std::max<std::int64_t>(x, 0)) > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) {
            fail(join(prefix, key), "integer out of range");
        }
        out = static_cast<Int>(x);
    }

    void real(const ojson& obj, const std::string& prefix, const char* key, double& out) const {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        if (!v.is_number()) fail(join(prefix, key), "expected a number");
        out = v.get<double>();
    }

    void boolean(const ojson& obj, const std::string& prefix, const char* key, bool& out) const {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        if (!v.is_boolean()) fail(join(prefix, key), "expected true or false");
        out = v.get<bool>();
    }

    std::vector<std::size_t> sizes(const ojson& obj, const std::string& prefix, const char* key) const {
        std::vector<std::size_t> out;
        const auto& v = obj.at(key);
        if (!v.is_array()) fail(join(prefix, key), "expected a list of integers");
        for (const auto& x : v) {
            if (!x.is_number_integer() || x.get<std::int64_t>() < 0) fail(join(prefix, key), "expected a list of integers");
            out.push_back(x.get<std::size_t>());
        }
        return out;
    }

    /// Section that may be written as a bare strategy name.
    ojson section(const ojson& obj, const std::string& prefix, const char* key) const {
        if (!obj.contains(key)) return ojson::object();
        const auto& v = obj.at(key);
        if (v.is_string()) return ojson{{"strategy", v.get<std::string>()}};
        if (!v.is_object()) fail(join(prefix, key), "expected a strategy name or a mapping");
        return v;
    }

private:
    std::string source_;
};

void read_store(const Reader& r, const ojson& s, RunSpec& run, bool& dimension_set) {
    const std::string p = "store";
    r.check_keys(s, p,
                 {"backend", "dimension", "capacity", "evict_on_overflow", "short_term_capacity", "lsh_bits", "lsh_tables",
                  "hybrid_mode", "k_rrf", "fusion_pool", "graph_entity_weight", "summary_window", "initial_strength_days",
                  "strength_gain"});
    auto& o = run.experiment.store;
    r.str(s, p, "backend", run.experiment.store_backend);
    dimension_set = s.contains("dimension");
    r.integer(s, p, "dimension", o.dimension);
    r.integer(s, p, "capacity", o.capacity);
    r.boolean(s, p, "evict_on_overflow", o.evict_on_overflow);
    r.integer(s, p, "short_term_capacity", o.short_term_capacity);
    r.integer(s, p, "lsh_bits", o.lsh_bits);
    r.integer(s, p, "lsh_tables", o.lsh_tables);
    if (s.contains("hybrid_mode")) {
        std::string mode;
        r.str(s, p, "hybrid_mode", mode);
        if (mode == "hybrid") {
            o.hybrid_mode = HybridMode::Hybrid;
        } else if (mode == "lexical_only") {
            o.hybrid_mode = HybridMode::LexicalOnly;
        } else if (mode == "vector_only") {
            o.hybrid_mode = HybridMode::VectorOnly;
        } else {
            r.fail("store.hybrid_mode", "'" + mode + "' is not one of hybrid, lexical_only, vector_only");
        }
    }
    r.integer(s, p, "k_rrf", o.k_rrf);
    r.integer(s, p, "fusion_pool", o.fusion_pool);
    r.real(s, p, "graph_entity_weight", o.graph_entity_weight);
    r.integer(s, p, "summary_window", o.summary_window);
    if (s.contains("initial_strength_days")) {
        double days = 0.0;
        r.real(s, p, "initial_strength_days", days);
        if (!(days > 0.0)) r.fail("store.initial_strength_days", "must be > 0");
        o.initial_strength_s = days * 86400.0;
    }
    r.real(s, p, "strength_gain", o.strength_gain);
    if (o.dimension == 0) r.fail("store.dimension", "must be >= 1");
    if (o.lsh_bits == 0 || o.lsh_bits > 64) r.fail("store.lsh_bits", "must lie in [1, 64]");
    if (o.lsh_tables == 0) r.fail("store.lsh_tables", "must be >= 1");
    if (o.k_rrf < 1) r.fail("store.k_rrf", "must be >= 1");
}

void read_operators(const Reader& r, const ojson& s, OperatorConfig& ops) {
    const std::string p = "operators";
    r.check_keys(s, p, {"k", "normalize", "consolidate", "formulate", "integrate"});
    r.integer(s, p, "k", ops.K);

    const auto phi = r.section(s, p, "normalize");
    r.check_keys(phi, "operators.normalize", {"strategy", "max_triplets", "summary_max_sentences"});
    r.str(phi, "operators.normalize", "strategy", ops.phi.strategy);
    r.integer(phi, "operators.normalize", "max_triplets", ops.phi.max_triplets);
    r.integer(phi, "operators.normalize", "summary_max_sentences", ops.phi.summary_max_sentences);

    const auto th = r.section(s, p, "consolidate");
    const std::string tp = "operators.consolidate";
    r.check_keys(th, tp,
                 {"strategy", "retention_threshold", "heat_alpha", "heat_beta", "heat_tau_s", "hot_threshold",
                  "cold_threshold", "link_top_m", "link_threshold", "dedup_threshold", "crud_neighbors", "fire_every"});
    auto& t = ops.theta;
    r.str(th, tp, "strategy", t.strategy);
    r.real(th, tp, "retention_threshold", t.retention_threshold);
    r.real(th, tp, "heat_alpha", t.heat_alpha);
    r.real(th, tp, "heat_beta", t.heat_beta);
    r.real(th, tp, "heat_tau_s", t.heat_tau_s);
    r.real(th, tp, "hot_threshold", t.hot_threshold);
    r.real(th, tp, "cold_threshold", t.cold_threshold);
    r.integer(th, tp, "link_top_m", t.link_top_m);
    r.real(th, tp, "link_threshold", t.link_threshold);
    r.real(th, tp, "dedup_threshold", t.dedup_threshold);
    r.integer(th, tp, "crud_neighbors", t.crud_neighbors);
    r.integer(th, tp, "fire_every", t.fire_every);

    const auto psi = r.section(s, p, "formulate");
    const std::string fp = "operators.formulate";
    r.check_keys(psi, fp, {"strategy", "max_keywords", "max_subqueries", "keyword_augment"});
    r.str(psi, fp, "strategy", ops.psi.strategy);
    r.integer(psi, fp, "max_keywords", ops.psi.max_keywords);
    r.integer(psi, fp, "max_subqueries", ops.psi.max_subqueries);
    r.boolean(psi, fp, "keyword_augment", ops.psi.keyword_augment);

    const auto in = r.section(s, p, "integrate");
    const std::string ip = "operators.integrate";
    r.check_keys(in, ip,
                 {"strategy", "decay_lambda", "score_threshold", "augment_window", "multi_query_count", "tier_quotas",
                  "budget_tokens"});
    auto& g = ops.integration;
    r.str(in, ip, "strategy", g.strategy);
    r.real(in, ip, "decay_lambda", g.decay_lambda);
    r.real(in, ip, "score_threshold", g.score_threshold);
    r.integer(in, ip, "augment_window", g.augment_window);
    r.integer(in, ip, "multi_query_count", g.multi_query_count);
    r.integer(in, ip, "budget_tokens", g.budget_tokens);
    if (in.contains("tier_quotas")) {
        const auto& q = in.at("tier_quotas");
        const std::string qp = ip + ".tier_quotas";
        r.check_keys(q, qp, {"short_term", "mid_term", "long_term", "n/a"});
        for (Tier tier : {Tier::ShortTerm, Tier::MidTerm, Tier::LongTerm, Tier::NotApplicable}) {
            const std::string name(to_string(tier));
            int v = g.tier_quotas[tier];
            r.integer(q, qp, name.c_str(), v);
            g.tier_quotas[tier] = v;
        }
    }
}

void read_checkpoints(const Reader& r, const ojson& s, CheckpointSchedule& out) {
    const std::string p = "checkpoints";
    r.check_keys(s, p, {"fraction", "every_n", "boundaries"});
    if (s.size() != 1) r.fail(p, "give exactly one of fraction, every_n, boundaries");
    if (s.contains("fraction")) {
        double f = 0.0;
        r.real(s, p, "fraction", f);
        out = CheckpointSchedule::at_fraction(f);
    } else if (s.contains("every_n")) {
        std::size_t n = 0;
        r.integer(s, p, "every_n", n);
        out = CheckpointSchedule::every(n);
    } else {
        out = CheckpointSchedule::at(r.sizes(s, p, "boundaries"));
    }
}

void read_dataset(const Reader& r, const ojson& s, DatasetSpec& d, std::uint64_t seed) {
    const std::string p = "dataset";
    r.check_keys(s, p, {"kind", "path", "synth"});
    r.str(s, p, "kind", d.kind);
    r.str(s, p, "path", d.path);
    d.synth.seed = seed;
    if (s.contains("synth")) {
        const auto& y = s.at("synth");
        const std::string sp = "dataset.synth";
        r.check_keys(y, sp,
                     {"seed", "n_sessions", "turns_per_session", "n_facts", "update_rate", "needle_depths",
                      "needles_per_depth", "paraphrase_rate", "rounds", "queries_per_round"});
        r.integer(y, sp, "seed", d.synth.seed);
        r.integer(y, sp, "n_sessions", d.synth.n_sessions);
        r.integer(y, sp, "turns_per_session", d.synth.turns_per_session);
        r.integer(y, sp, "n_facts", d.synth.n_facts);
        r.real(y, sp, "update_rate", d.synth.update_rate);
        if (y.contains("needle_depths")) d.synth.needle_depths = r.sizes(y, sp, "needle_depths");
        r.integer(y, sp, "needles_per_depth", d.synth.needles_per_depth);
        r.real(y, sp, "paraphrase_rate", d.synth.paraphrase_rate);
        r.integer(y, sp, "rounds", d.synth.rounds);
        r.integer(y, sp, "queries_per_round", d.synth.queries_per_round);
    }
    if (d.kind == "synth") {
        try {
            d.synth.validate();
        } catch (const Error& e) {
            r.fail("dataset.synth", e.what());
        }
    } else if (d.kind == "locomo" || d.kind == "stream") {
        if (d.path.empty()) r.fail("dataset.path", "required for kind '" + d.kind + "'");
    } else {
        r.fail("dataset.kind", "'" + d.kind + "' is not one of synth, locomo, stream");
    }
}

void read_gateway(const Reader& r, const ojson& s, GatewaySpec& g, RetryPolicy& retry, std::optional<std::size_t>& dim) {
    const std::string p = "gateway";
    r.check_keys(s, p,
                 {"backend", "dimension", "base_url", "chat_model", "embed_model", "timeout_ms", "requests_per_second",
                  "max_retries", "backoff_ms", "total_timeout_ms"});
    r.str(s, p, "backend", g.backend);
    if (g.backend != "mock" && g.backend != "remote") r.fail("gateway.backend", "'" + g.backend + "' is not one of mock, remote");
    if (s.contains("dimension")) {
        std::size_t d = 0;
        r.integer(s, p, "dimension", d);
        dim = d;
    }
    r.str(s, p, "base_url", g.remote.base_url);
    r.str(s, p, "chat_model", g.remote.chat_model);
    r.str(s, p, "embed_model", g.remote.embed_model);
    std::int64_t ms = g.remote.request_timeout.count();
    r.integer(s, p, "timeout_ms", ms);
    g.remote.request_timeout = std::chrono::milliseconds(ms);
    r.real(s, p, "requests_per_second", g.remote.requests_per_second);
    r.integer(s, p, "max_retries", retry.max_retries);
    ms = retry.base_backoff.count();
    r.integer(s, p, "backoff_ms", ms);
    retry.base_backoff = std::chrono::milliseconds(ms);
    ms = retry.total_timeout.count();
    r.integer(s, p, "total_timeout_ms", ms);
    retry.total_timeout = std::chrono::milliseconds(ms);
    if (retry.max_retries < 0) r.fail("gateway.max_retries", "must be >= 0");
}

RunSpec build_run(const ojson& t, const std::string& source) {
    Reader r(source);
    r.check_keys(t, "",
                 {"name", "seed", "buffer_capacity", "output_dir", "dataset", "store", "operators", "checkpoints", "gateway",
                  "ablate"});
    RunSpec run;
    auto& cfg = run.experiment;
    r.str(t, "", "name", cfg.name);
    r.integer(t, "", "seed", cfg.seed);
    r.integer(t, "", "buffer_capacity", cfg.buffer_capacity);
    cfg.store.seed = cfg.seed;

    bool store_dim_set = false;
    if (t.contains("store")) read_store(r, t.at("store"), run, store_dim_set);
    if (t.contains("operators")) read_operators(r, t.at("operators"), cfg.ops);
    if (t.contains("checkpoints")) read_checkpoints(r, t.at("checkpoints"), cfg.schedule);
    read_dataset(r, t.contains("dataset") ? t.at("dataset") : ojson::object(), run.dataset, cfg.seed);

    std::optional<std::size_t> gateway_dim;
    if (t.contains("gateway")) read_gateway(r, t.at("gateway"), run.gateway, cfg.retry, gateway_dim);
    if (run.gateway.backend == "remote") {
        const std::size_t d = gateway_dim.value_or(run.gateway.remote.dimension);
        run.gateway.remote.dimension = d;
        if (store_dim_set && cfg.store.dimension != d) {
            r.fail("store.dimension", "differs from gateway.dimension " + std::to_string(d));
        }
        cfg.store.dimension = d;
    } else if (gateway_dim) {
        if (store_dim_set && cfg.store.dimension != *gateway_dim) {
            r.fail("store.dimension", "differs from gateway.dimension " + std::to_string(*gateway_dim));
        }
        cfg.store.dimension = *gateway_dim;
    }

    std::string out_dir = "results/" + cfg.name;
    r.str(t, "", "output_dir", out_dir);
    run.output_dir = out_dir;
    cfg.output_dir = out_dir;
    cfg.dataset = run.dataset.kind == "synth" ? "synth:seed=" + std::to_string(run.dataset.synth.seed)
                                              : run.dataset.kind + ":" + run.dataset.path;
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, source + ": " + e.what());
    }
    return run;
}

std::string scalar_label(const ojson& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

std::string dir_safe(std::string s) {
    for (char& c : s) {
        if (c == '/' || c == ' ') c = '_';
    }
    return s;
}

}  // namespace

std::vector<RunSpec> load_config_text(const std::string& yaml, const std::vector<std::string>& overrides,
                                      const std::string& source) {
    ojson tree = parse_yaml(yaml, source);
    if (tree.is_null()) tree = ojson::object();
    if (!tree.is_object()) throw Error(ErrorCode::ConfigError, source + ": top level must be a mapping");

    ojson ablate = ojson::object();
    if (tree.contains("ablate")) {
        ablate = tree.at("ablate");
        if (!ablate.is_object()) throw Error(ErrorCode::ConfigError, source + ": key 'ablate': expected a mapping");
        tree.erase("ablate");
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw Error(ErrorCode::ConfigError, "override '" + o + "' is not of the form key=value");
        }
        const std::string key = o.substr(0, eq);
        ojson value = parse_yaml(o.substr(eq + 1), "override '" + o + "'");
        if (key.starts_with("ablate.")) {
            ablate[key.substr(7)] = std::move(value);
        } else {
            ablate.erase(key);
            set_dotted(tree, key, std::move(value));
        }
    }

    std::vector<std::pair<std::string, std::vector<ojson>>> axes;
    for (const auto& [k, v] : ablate.items()) {
        if (!v.is_array() || v.empty()) {
            throw Error(ErrorCode::ConfigError, source + ": key 'ablate." + k + "': expected a non-empty list");
        }
        axes.emplace_back(k, std::vector<ojson>(v.begin(), v.end()));
    }

    std::vector<RunSpec> runs;
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
        ojson member = tree;
        std::string label;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& v = axes[a].second[idx[a]];
            set_dotted(member, axes[a].first, v);
            label += (label.empty() ? "" : ",") + axes[a].first + "=" + scalar_label(v);
        }
        auto run = build_run(member, label.empty() ? source : source + " [" + label + "]");
        if (!label.empty()) {
            run.grid_label = label;
            run.output_dir /= dir_safe(label);
            run.experiment.output_dir = run.output_dir.string();
            run.experiment.name += "[" + label + "]";
        }
        runs.push_back(std::move(run));
        // Odometer over the axes, last axis fastest.
        std::size_t a = axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < axes[a].second.size()) break;
            idx[a] = 0;
            if (a == 0) return runs;
        }
        if (axes.empty()) return runs;
    }
}

std::vector<RunSpec> load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return load_config_text(ss.str(), overrides, path.string());
}

LoadedDataset load_dataset(const DatasetSpec& spec) {
    LoadedDataset out;
    if (spec.kind == "synth") {
        auto w = synth_workload(spec.synth);
        out.stream = std::move(w.stream);
        out.answer_key = std::move(w.answer_key);
    } else if (spec.kind == "locomo") {
        out.stream = load_locomo(spec.path);
    } else if (spec.kind == "stream") {
        out.stream = load_generic(spec.path);
    } else {
        throw Error(ErrorCode::ConfigError, "unknown dataset kind '" + spec.kind + "'");
    }
    return out;
}

std::shared_ptr<GatewayBackend> make_backend(const GatewaySpec& spec, const ExperimentConfig& cfg) {
    if (spec.backend == "mock") return std::make_shared<MockBackend>(cfg.store.dimension, cfg.seed);
    if (spec.backend == "remote") return std::make_shared<RemoteBackend>(RemoteConfig::from_env(spec.remote));
    throw Error(ErrorCode::ConfigError, "unknown gateway backend '" + spec.backend + "'");
}

}  // namespace streammem
