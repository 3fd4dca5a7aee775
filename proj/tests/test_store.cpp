#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "streammem/error.hpp"
#include "streammem/store.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace streammem;
using streammem::testing::make_record;

namespace {

Gateway mock_gateway() { return Gateway(std::make_shared<MockBackend>()); }

RetrievalSignal text_signal(Gateway& gw, const std::string& q) {
    RetrievalSignal s;
    s.raw_query = q;
    s.embedding = gw.embed_one(q, Stage::PreRet);
    return s;
}

std::vector<std::string> ids(const std::vector<Candidate>& c) {
    std::vector<std::string> out;
    for (const auto& x : c) out.push_back(x.record.record_id);
    return out;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::Gateway;
}

const char* kCorpus[] = {"I adopted a puppy named Biscuit last spring.",
                         "My sister moved to Lisbon for a new job.",
                         "We cooked paella on Sunday with fresh saffron.",
                         "The marathon training plan starts in March.",
                         "I finally finished reading the long fantasy novel."};

}  // namespace

TEST_CASE("fifo capacity 2 keeps the two newest records") {
    StoreOptions o;
    o.capacity = 2;
    auto store = make_store("fifo_queue", o);
    auto gw = mock_gateway();
    const auto a = store->insert({make_record("a", 1, &gw)}, Timestamp{1 * kMicrosPerSecond});
    store->insert({make_record("b", 2, &gw)}, Timestamp{2 * kMicrosPerSecond});
    store->insert({make_record("c", 3, &gw)}, Timestamp{3 * kMicrosPerSecond});
    CHECK(store->size() == 2);
    CHECK(store->is_tombstoned(a[0]));
    std::vector<std::string> texts;
    for (const auto* r : store->records()) texts.push_back(r->text);
    CHECK(texts == std::vector<std::string>{"b", "c"});
    CHECK(store->take_evicted() == a);
    CHECK(store->stats().evicted_total == 1);
}

TEST_CASE("fifo without eviction rejects overflow and keeps its state") {
    StoreOptions o;
    o.capacity = 1;
    o.evict_on_overflow = false;
    auto store = make_store("fifo_queue", o);
    auto gw = mock_gateway();
    store->insert({make_record("a", 1, &gw)}, Timestamp{kMicrosPerSecond});
    CHECK(code_of([&] { store->insert({make_record("b", 2, &gw)}, Timestamp{2 * kMicrosPerSecond}); }) ==
          ErrorCode::CapacityExceeded);
    CHECK(store->size() == 1);
    CHECK(store->records()[0]->text == "a");
}

TEST_CASE("every backend retrieves an inserted text first") {
    for (auto name : store_names()) {
        CAPTURE(name);
        auto store = make_store(name);
        auto gw = mock_gateway();
        std::int64_t t = 1;
        for (const char* text : kCorpus) {
            auto rec = make_record(text, t, &gw, "s1", static_cast<int>(t));
            store->insert({rec}, Timestamp{t * kMicrosPerSecond});
            ++t;
        }
        const auto hits = store->retrieve(text_signal(gw, kCorpus[2]), 3, Timestamp{100 * kMicrosPerSecond});
        REQUIRE_FALSE(hits.empty());
        CHECK(hits.size() <= 3);
        CHECK(hits[0].record.text == kCorpus[2]);
        for (const auto& h : hits) {
            CHECK(h.score >= 0.0);
            CHECK(h.score <= 1.0);
            CHECK(h.record.ts.us < 100 * kMicrosPerSecond);
        }
        for (std::size_t i = 1; i < hits.size(); ++i) CHECK(hits[i - 1].score >= hits[i].score);
    }
}

TEST_CASE("empty store and truncation") {
    for (auto name : store_names()) {
        CAPTURE(name);
        auto store = make_store(name);
        auto gw = mock_gateway();
        CHECK(store->retrieve(text_signal(gw, "anything"), 5, Timestamp{kMicrosPerSecond}).empty());
        for (int i = 0; i < 3; ++i) {
            store->insert({make_record(kCorpus[i], i + 1, &gw, "s", i)}, Timestamp{(i + 1) * kMicrosPerSecond});
        }
        const auto hits = store->retrieve(text_signal(gw, "puppy Lisbon paella"), 5, Timestamp{10 * kMicrosPerSecond});
        if (name == "summary_vector") {
            CHECK(hits.size() == 4);  // three turns plus the session summary
        } else if (name == "lsh_hash") {
            CHECK(hits.size() <= 3);
        } else {
            CHECK(hits.size() == 3);
        }
    }
}

TEST_CASE("lexical match on the inverted index") {
    StoreOptions o;
    o.hybrid_mode = HybridMode::LexicalOnly;
    auto store = make_store("inverted_vector", o);
    auto gw = mock_gateway();
    store->insert({make_record("red apple", 1, &gw)}, Timestamp{kMicrosPerSecond});
    store->insert({make_record("blue sky", 2, &gw)}, Timestamp{2 * kMicrosPerSecond});
    RetrievalSignal s;
    s.raw_query = "apple";
    s.keywords = std::vector<std::string>{"apple"};
    const auto hits = store->retrieve(s, 1, Timestamp{3 * kMicrosPerSecond});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].record.text == "red apple");
    CHECK(hits[0].source_index == SourceIndex::Lexical);
    CHECK(hits[0].score == 1.0);
}

TEST_CASE("retrieve preconditions") {
    auto store = make_store("inverted_vector");
    auto gw = mock_gateway();
    store->insert({make_record("x", 1, &gw)}, Timestamp{kMicrosPerSecond});
    CHECK(code_of([&] { store->retrieve(RetrievalSignal{}, 3, Timestamp{5 * kMicrosPerSecond}); }) ==
          ErrorCode::EmptySignal);
    RetrievalSignal skip;
    skip.skip = true;
    CHECK(store->retrieve(skip, 3, Timestamp{5 * kMicrosPerSecond}).empty());
    CHECK(code_of([&] { store->insert({make_record("y", 0, &gw)}, Timestamp{0}); }) == ErrorCode::CausalityViolation);
    auto bad = make_record("z", 3);
    bad.embedding = Embedding(3, 1.0f);
    CHECK(code_of([&] { store->insert({bad}, Timestamp{3 * kMicrosPerSecond}); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { store->retrieve(text_signal(gw, "x"), 3, Timestamp{kMicrosPerSecond}); }) ==
          ErrorCode::CausalityViolation);
}

TEST_CASE("make_store lists valid names on error") {
    try {
        make_store("btree");
        FAIL("expected ConfigError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
        for (auto n : store_names()) CHECK(std::string(e.what()).find(n) != std::string::npos);
    }
    CHECK(store_names().size() == 6);
}

TEST_CASE("retrieval bumps access statistics") {
    StoreOptions o;
    auto store = make_store("inverted_vector", o);
    auto gw = mock_gateway();
    const auto id = store->insert({make_record("hiking trip", 1, &gw)}, Timestamp{kMicrosPerSecond})[0];
    const double s0 = store->find(id)->strength;
    CHECK(s0 == doctest::Approx(o.initial_strength_s));
    store->retrieve(text_signal(gw, "hiking trip"), 1, Timestamp{9 * kMicrosPerSecond});
    const auto* r = store->find(id);
    CHECK(r->access_count == 1);
    CHECK(r->last_access.us == 9 * kMicrosPerSecond);
    CHECK(r->strength == doctest::Approx(s0 * o.strength_gain));
}

TEST_CASE("removed records never come back") {
    for (auto name : store_names()) {
        CAPTURE(name);
        auto store = make_store(name);
        auto gw = mock_gateway();
        const auto a = store->insert({make_record("the puppy chewed a shoe", 1, &gw)}, Timestamp{kMicrosPerSecond})[0];
        store->insert({make_record("the puppy slept all day", 2, &gw, "s", 1)}, Timestamp{2 * kMicrosPerSecond});
        CHECK(store->remove(a));
        CHECK_FALSE(store->remove(a));
        CHECK(store->is_tombstoned(a));
        for (const auto& c : store->retrieve(text_signal(gw, "the puppy chewed a shoe"), 5, Timestamp{3 * kMicrosPerSecond})) {
            CHECK(c.record.record_id != a);
        }
    }
}

TEST_CASE("lsh signatures") {
    const std::vector<std::vector<float>> basis = {{1.0f, 0.0f}, {0.0f, 1.0f}};
    const std::vector<float> v = {1.0f, 1.0f};
    CHECK(lsh_signature(v, basis) == 0b11u);
    const std::vector<std::vector<float>> planes = {{0.3f, -0.9f, 0.2f}, {-0.5f, 0.1f, 0.8f}, {0.7f, 0.7f, -0.1f}};
    const std::vector<float> w = {0.2f, 0.5f, -0.4f};
    const std::vector<float> neg = {-0.2f, -0.5f, 0.4f};
    CHECK(lsh_signature(w, planes) == lsh_signature(w, planes));
    CHECK((lsh_signature(w, planes) ^ lsh_signature(neg, planes)) == 0b111u);
    const std::vector<float> wrong = {1.0f};
    CHECK_THROWS_AS(lsh_signature(wrong, basis), Error);

    LshIndex index(2, 2, 3, 1);
    index.add("a", v);
    CHECK(index.candidates(v) == std::vector<std::string>{"a"});
    index.remove("a", v);
    CHECK(index.candidates(v).empty());
}

TEST_CASE("reciprocal rank fusion") {
    const auto both = rrf_fuse({{"d", "x"}, {"d", "y"}}, 60);
    REQUIRE_FALSE(both.empty());
    CHECK(both[0].id == "d");
    CHECK(both[0].score == doctest::Approx(2.0 / 61.0).epsilon(1e-12));
    const auto single = rrf_fuse({{"a", "b", "c"}}, 60);
    CHECK(single[2].score == doctest::Approx(1.0 / 63.0));
    const auto vec_only = fuse_scores({}, {"p", "q", "r"});
    CHECK(std::vector<std::string>{vec_only[0].id, vec_only[1].id, vec_only[2].id} ==
          std::vector<std::string>{"p", "q", "r"});
    // Ties broken by id.
    const auto tie = rrf_fuse({{"b"}, {"a"}}, 60);
    CHECK(tie[0].id == "a");
    // Duplicates within one list count once.
    CHECK(rrf_fuse({{"a", "a"}}, 60).size() == 1);
}

TEST_CASE("queue_segment tier migration") {
    auto store = make_store("queue_segment");
    auto gw = mock_gateway();
    const auto id = store->insert({make_record("saffron paella recipe", 1, &gw)}, Timestamp{kMicrosPerSecond})[0];
    CHECK(store->supports_tiers());
    auto before = store->stats();
    CHECK(before.per_tier[Tier::ShortTerm] == 1);
    auto after = store->migrate_tier(id, Tier::MidTerm);
    CHECK(after.per_tier[Tier::MidTerm] == before.per_tier[Tier::MidTerm] + 1);
    CHECK(after.per_tier[Tier::ShortTerm] + 1 == before.per_tier[Tier::ShortTerm]);
    CHECK(after.record_count == before.record_count);
    CHECK(code_of([&] { store->migrate_tier(id, Tier::MidTerm); }) == ErrorCode::UnknownTransition);
    const auto hits = store->retrieve(text_signal(gw, "saffron paella recipe"), 1, Timestamp{5 * kMicrosPerSecond});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].record.record_id == id);
    CHECK(hits[0].tier == Tier::MidTerm);

    auto flat = make_store("inverted_vector");
    const auto fid = flat->insert({make_record("x", 1, &gw)}, Timestamp{kMicrosPerSecond})[0];
    CHECK(code_of([&] { flat->migrate_tier(fid, Tier::MidTerm); }) == ErrorCode::UnsupportedBackend);
}

TEST_CASE("queue_segment overflows short-term into session segments") {
    StoreOptions o;
    o.short_term_capacity = 2;
    auto store = make_store("queue_segment", o);
    auto gw = mock_gateway();
    for (int i = 0; i < 5; ++i) {
        store->insert({make_record("turn " + std::to_string(i), i + 1, &gw, "s", i)}, Timestamp{(i + 1) * kMicrosPerSecond});
    }
    const auto st = store->stats();
    CHECK(st.record_count == 5);
    CHECK(st.per_tier.at(Tier::ShortTerm) == 2);
    CHECK(st.per_tier.at(Tier::MidTerm) == 3);
}

TEST_CASE("property graph indexes triplet entities") {
    auto store = make_store("property_graph");
    auto gw = mock_gateway();
    auto rec = make_record("alice likes tea", 1, &gw);
    rec.kind = RecordKind::Triplet;
    rec.triplet = Triplet{"alice", "likes", "tea", "s#0"};
    const auto id = store->insert({rec}, Timestamp{kMicrosPerSecond})[0];
    CHECK(store->stats().index_sizes.at("entities") == 2);
    RetrievalSignal s;
    s.raw_query = "tea";
    s.keywords = std::vector<std::string>{"tea"};
    const auto hits = store->retrieve(s, 1, Timestamp{2 * kMicrosPerSecond});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].record.record_id == id);
    CHECK(hits[0].source_index == SourceIndex::Graph);
    CHECK(hits[0].record.triplet->linearize() == "alice likes tea");
}

TEST_CASE("links are bidirectional and limited to graph stores") {
    auto store = make_store("property_graph");
    auto gw = mock_gateway();
    const auto a = store->insert({make_record("a", 1, &gw)}, Timestamp{kMicrosPerSecond})[0];
    const auto b = store->insert({make_record("b", 2, &gw)}, Timestamp{2 * kMicrosPerSecond})[0];
    store->add_link(a, b);
    CHECK(store->find(a)->links.contains(b));
    CHECK(store->find(b)->links.contains(a));
    CHECK(code_of([&] { store->add_link(a, "r99999999"); }) == ErrorCode::UnknownRecord);
    store->remove(b);
    CHECK_FALSE(store->find(a)->links.contains(b));
    auto flat = make_store("fifo_queue");
    const auto x = flat->insert({make_record("x", 1, &gw)}, Timestamp{kMicrosPerSecond})[0];
    CHECK(code_of([&] { flat->add_link(x, x); }) == ErrorCode::UnsupportedBackend);
}

TEST_CASE("summary_vector keeps one summary per session") {
    auto store = make_store("summary_vector");
    auto gw = mock_gateway();
    store->insert({make_record("We hiked. It rained.", 1, &gw, "s1", 0)}, Timestamp{kMicrosPerSecond});
    store->insert({make_record("I baked bread.", 2, &gw, "s1", 1)}, Timestamp{2 * kMicrosPerSecond});
    store->insert({make_record("New town.", 3, &gw, "s2", 0)}, Timestamp{3 * kMicrosPerSecond});
    std::size_t summaries = 0;
    for (const auto* r : store->records()) {
        if (r->kind != RecordKind::Summary) continue;
        ++summaries;
        if (r->session_id == "s1") {
            CHECK(r->text == "We hiked. I baked bread.");
            CHECK(r->ts.us == 2 * kMicrosPerSecond);
        }
    }
    CHECK(summaries == 2);
}

TEST_CASE("stores are deterministic") {
    for (auto name : store_names()) {
        CAPTURE(name);
        std::string snapshots[2];
        std::vector<std::string> results[2];
        for (int run = 0; run < 2; ++run) {
            StoreOptions o;
            o.seed = 42;
            auto store = make_store(name, o);
            auto gw = mock_gateway();
            std::int64_t t = 1;
            for (const char* text : kCorpus) {
                store->insert({make_record(text, t, &gw, "s", static_cast<int>(t))}, Timestamp{t * kMicrosPerSecond});
                ++t;
            }
            results[run] = ids(store->retrieve(text_signal(gw, "novel about Lisbon"), 3, Timestamp{99 * kMicrosPerSecond}));
            std::ostringstream snap;
            store->write_snapshot(snap);
            snapshots[run] = snap.str();
        }
        CHECK(results[0] == results[1]);
        CHECK(snapshots[0] == snapshots[1]);
    }
}

TEST_CASE("brute-force oracle and lsh_hash agree on near-duplicates") {
    std::mt19937_64 rng(12);
    std::normal_distribution<float> g(0.0f, 1.0f);
    auto unit = [](std::vector<float> v) {
        double n = 0.0;
        for (float x : v) n += static_cast<double>(x) * x;
        for (auto& x : v) x = static_cast<float>(x / std::sqrt(n));
        return v;
    };
    std::vector<std::vector<float>> data;
    for (int c = 0; c < 10; ++c) {
        std::vector<float> center(64);
        for (auto& x : center) x = g(rng);
        for (int i = 0; i < 10; ++i) {
            auto v = center;
            for (auto& x : v) x += 0.01f * g(rng);
            data.push_back(unit(v));
        }
    }
    const auto top = testing::brute_force_top_k(data, data[0], 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0] == 0);
    for (auto i : top) CHECK(i < 10);

    StoreOptions o;
    o.dimension = 64;
    auto store = make_store("lsh_hash", o);
    std::vector<MemoryRecord> units;
    for (std::size_t i = 0; i < data.size(); ++i) {
        MemoryRecord r;
        r.record_id = "v" + std::to_string(100 + i);
        r.text = "v";
        r.embedding = data[i];
        units.push_back(r);
    }
    store->insert(std::move(units), Timestamp{0});
    RetrievalSignal s;
    s.raw_query = "q";
    s.embedding = data[0];
    const auto hits = store->retrieve(s, 1, Timestamp{1});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].record.record_id == "v100");
}
