#include <doctest.h>

#include <cmath>

#include "streammem/error.hpp"
#include "streammem/gateway.hpp"
#include "test_util.hpp"

using namespace streammem;
using streammem::testing::FailingBackend;

namespace {

double norm(const Embedding& v) { return std::sqrt(dot(v, v)); }

std::string mock_chat(const std::string& id, std::map<std::string, std::string> vars) {
    MockBackend mock;
    ChatRequest req;
    req.template_id = id;
    req.variables = std::move(vars);
    auto out = mock.chat(req);
    while (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

/// Fails the first `failures` chat calls with a retryable error.
class FlakyBackend final : public GatewayBackend {
public:
    FlakyBackend(int failures, GatewayErrorKind kind) : failures_(failures), kind_(kind) {}
    std::string name() const override { return "flaky"; }
    std::size_t dimension() const override { return 8; }
    std::vector<Embedding> embed(std::span<const std::string> texts) override {
        return std::vector<Embedding>(texts.size(), testing::unit_vector(8, 0));
    }
    std::string chat(const ChatRequest&) override {
        ++calls;
        if (calls <= failures_) throw GatewayError(kind_, "flaky");
        return "ok";
    }
    int calls = 0;

private:
    int failures_;
    GatewayErrorKind kind_;
};

RetryPolicy fast_retry(int max_retries) {
    RetryPolicy p;
    p.max_retries = max_retries;
    p.base_backoff = std::chrono::milliseconds(1);
    return p;
}

}  // namespace

TEST_CASE("mock embeddings are deterministic and unit norm") {
    MockBackend mock;
    const auto a = mock.embed_text("I love hiking in the mountains");
    const auto b = mock.embed_text("I love hiking in the mountains");
    CHECK(a == b);
    CHECK(a.size() == 256);
    CHECK(std::abs(norm(a) - 1.0) < 1e-6);
    CHECK(mock.embed_text("cat") == mock.embed_text("cat."));
    CHECK(mock.embed_text("Cat!") == mock.embed_text("cat"));
    const auto far = mock.embed_text("quarterly revenue projections");
    CHECK(dot(a, far) < dot(a, mock.embed_text("I loved hiking in mountains")));
    MockBackend small(32);
    CHECK(small.embed_text("x y z").size() == 32);
}

TEST_CASE("mock chat rules") {
    CHECK(mock_chat("summarize", {{"text", "First one. Second one. Third one."}, {"max_sentences", "2"}}) == "First one.");
    CHECK(mock_chat("summarize", {{"text", "Only one."}, {"max_sentences", "2"}}) == "Only one.");
    CHECK(mock_chat("triplet_extract", {{"text", "Alice likes tea"}, {"max_triplets", "5"}}) == "alice | likes | tea");
    CHECK(mock_chat("triplet_extract", {{"text", "Hello there"}, {"max_triplets", "5"}}) == "no facts");
    CHECK(mock_chat("validate", {{"query", "hello!"}}) == "SKIP");
    CHECK(mock_chat("validate", {{"query", "Where did Melanie go camping?"}}) == "RETRIEVE");
    CHECK(mock_chat("keyword_extract", {{"query", "where did Melanie go camping"}, {"max_keywords", "5"}}) ==
          "melanie\ncamp");
    CHECK(mock_chat("decompose", {{"query", "Where is X and when is Y?"}, {"max_subqueries", "3"}}) ==
          "Where is X?\nwhen is Y?");
    CHECK(mock_chat("decompose", {{"query", "Where is X?"}, {"max_subqueries", "3"}}) == "Where is X?");
}

TEST_CASE("mock answer echoes the best-overlap sentence") {
    const std::string ctx =
        "[ts=2023-01-01T00:00:00Z] Ava: We went to the beach. Melanie went camping in Yosemite.\n"
        "[ts=2023-01-02T00:00:00Z] Ben: The weather was nice.";
    CHECK(mock_chat("answer", {{"query", "Where did Melanie go camping?"}, {"context", ctx}}) ==
          "Melanie went camping in Yosemite.");
    CHECK(mock_chat("answer", {{"query", "Where did Melanie go camping?"}, {"context", ""}}) == "unknown");
    // Equal overlap: the more recent line wins.
    const std::string updates =
        "[ts=2023-01-01T00:00:00Z] The color of Zo is red.\n[ts=2023-01-05T00:00:00Z] The color of Zo is blue.";
    CHECK(mock_chat("answer", {{"query", "What is the color of Zo?"}, {"context", updates}}) == "The color of Zo is blue.");
}

TEST_CASE("prompt registry rejects unknown templates and unbound variables") {
    ChatRequest req;
    req.template_id = "nope";
    try {
        render_prompt(req);
        FAIL("expected Malformed");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == GatewayErrorKind::Malformed);
    }
    req.template_id = "summarize";
    CHECK_THROWS_AS(render_prompt(req), GatewayError);
    req.variables = {{"text", "abc"}, {"max_sentences", "2"}};
    CHECK(render_prompt(req).find("abc") != std::string::npos);
    CHECK(prompt_templates().size() == 8);
}

TEST_CASE("gateway retries retryable errors and logs one timing per call") {
    auto flaky = std::make_shared<FlakyBackend>(2, GatewayErrorKind::Timeout);
    Gateway gw(flaky, fast_retry(2));
    ChatRequest req;
    req.template_id = "validate";
    req.variables = {{"query", "x"}};
    CHECK(gw.chat(req, Stage::PreRet) == "ok");
    CHECK(flaky->calls == 3);
    REQUIRE(gw.timings().size() == 1);
    CHECK(gw.timings()[0].retries == 2);
    CHECK(gw.timings()[0].stage == Stage::PreRet);
    CHECK(gw.timings()[0].ok);

    auto worse = std::make_shared<FlakyBackend>(5, GatewayErrorKind::Transport);
    Gateway gw2(worse, fast_retry(2));
    CHECK_THROWS_AS(gw2.chat(req, Stage::PreRet), GatewayError);
    CHECK(worse->calls == 3);
    REQUIRE(gw2.timings().size() == 1);
    CHECK_FALSE(gw2.timings()[0].ok);

    auto malformed = std::make_shared<FlakyBackend>(5, GatewayErrorKind::Malformed);
    Gateway gw3(malformed, fast_retry(2));
    CHECK_THROWS_AS(gw3.chat(req, Stage::PreRet), GatewayError);
    CHECK(malformed->calls == 1);
}

TEST_CASE("answer fails open to an empty prediction") {
    Gateway ok(std::make_shared<MockBackend>());
    const auto good = answer(ok, "Where did Melanie camp?", "Melanie camped in Yosemite.");
    CHECK_FALSE(good.failed);
    CHECK(good.prediction == "Melanie camped in Yosemite.");
    REQUIRE(ok.timings().size() == 1);
    CHECK(ok.timings()[0].stage == Stage::Generation);

    Gateway bad(std::make_shared<FailingBackend>(GatewayErrorKind::Transport), fast_retry(0));
    const auto r = answer(bad, "q", "c");
    CHECK(r.failed);
    CHECK(r.prediction.empty());
}

TEST_CASE("token bucket paces requests") {
    TokenBucket bucket(1000.0, 1.0);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 5; ++i) bucket.acquire();
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(elapsed >= std::chrono::milliseconds(3));
}

TEST_CASE("remote backend refuses a missing base URL") {
    RemoteConfig cfg;
    CHECK_THROWS_AS(RemoteBackend{cfg}, Error);
    cfg.base_url = "no-scheme";
    CHECK_THROWS_AS(RemoteBackend{cfg}, Error);
}

TEST_CASE("synonyms are symmetric within a group") {
    CHECK(mock_rules::synonym("color", 0) == "shade");
    CHECK(mock_rules::synonym("zzz", 0) == "zzz");
    for (const auto& g : mock_rules::synonym_groups()) CHECK(g.size() >= 2);
}
