#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include "streammem/error.hpp"
#include "streammem/metrics.hpp"
#include "streammem/text.hpp"
#include "oracles.hpp"

using namespace streammem;
using namespace streammem::testing;

TEST_CASE("porter_stem matches the reference vector suite") {
    const auto suite = run_porter_suite(std::string(STREAMMEM_TEST_DATA) + "/porter_vectors.tsv");
    REQUIRE(suite.opened);
    INFO(suite.first_bad);
    CHECK(suite.checked > 9000);
    CHECK(suite.mismatches == 0);
}

TEST_CASE("porter_stem examples") {
    CHECK(text::porter_stem("caresses") == "caress");
    CHECK(text::porter_stem("running") == "run");
    CHECK(text::porter_stem("sky") == "sky");
    CHECK(text::porter_stem("ponies") == "poni");
    CHECK(text::porter_stem("2023") == "2023");
}

TEST_CASE("punctuation stripping uses Unicode categories") {
    CHECK(text::strip_punctuation_lower("Cat.") == "cat");
    CHECK(text::strip_punctuation_lower("\xE2\x80\x9CHello\xE2\x80\x9D \xE2\x80\x94 World!") == "hello  world");
    CHECK(text::strip_punctuation_lower("caf\xC3\xA9, 1999") == "caf\xC3\xA9 1999");
    CHECK(text::strip_punctuation_lower("$5 + 3") == "$5 + 3");
    const std::string once = text::strip_punctuation_lower("It's (really) \xC2\xBFOK?");
    CHECK(text::strip_punctuation_lower(once) == once);
}

TEST_CASE("index terms drop stopwords but scoring keeps them") {
    const auto terms = text::index_terms("Where did Melanie go camping?");
    CHECK(terms == std::vector<std::string>{"where", "melani", "go", "camp"});
    CHECK(metrics::tokenize_for_scoring("the cat").tokens.size() == 2);
}

TEST_CASE("split_sentences keeps terminal punctuation") {
    const auto s = text::split_sentences("One. Two! Three? Four");
    REQUIRE(s.size() == 4);
    CHECK(s[0] == "One.");
    CHECK(s[2] == "Three?");
    CHECK(s[3] == "Four");
    CHECK(text::split_sentences("3.5 apples").size() == 1);
}

TEST_CASE("token_f1 examples") {
    CHECK(metrics::token_f1("Paris", "Paris") == 1.0);
    CHECK(metrics::token_f1("went camping in Yosemite", "camping") == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(metrics::token_f1("blue sky", "red apple") == 0.0);
    CHECK(metrics::token_f1("", "") == 1.0);
    CHECK(metrics::token_f1("", "x") == 0.0);
    CHECK(metrics::token_f1("x", "") == 0.0);
    // Multiset overlap: one shared "the".
    CHECK(metrics::token_f1("the the", "the cat") == doctest::Approx(0.5));
}

TEST_CASE("token_f1 agrees with the brute-force reference on 500 seeded pairs") {
    std::mt19937_64 rng(20240611);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const auto a = random_phrase(rng);
        const auto b = random_phrase(rng);
        const double got = metrics::token_f1(a, b);
        worst = std::max(worst, std::abs(got - ref_f1(a, b)));
        CHECK(got == doctest::Approx(metrics::token_f1(b, a)).epsilon(1e-15));
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("degradation reproduces the published round tables") {
    CHECK(metrics::degradation(std::vector<double>{0.169, 0.128, 0.118, 0.109, 0.094}) == doctest::Approx(-44.4).epsilon(1e-9));
    CHECK(metrics::degradation(std::vector<double>{0.395, 0.362, 0.356, 0.349, 0.338}) == doctest::Approx(-14.4).epsilon(1e-9));
    CHECK(metrics::degradation(std::vector<double>{0.411, 0.395, 0.375, 0.385, 0.358}) == doctest::Approx(-12.9).epsilon(1e-9));
    CHECK(metrics::degradation(std::vector<double>{0.3, 0.3, 0.3}) == 0.0);
    CHECK_THROWS_AS(metrics::degradation(std::vector<double>{0.0, 0.1}), Error);
    CHECK_THROWS_AS(metrics::degradation(std::vector<double>{0.1}), Error);
}

TEST_CASE("latency summaries use nearest rank") {
    std::vector<double> xs;
    for (int i = 1; i <= 100; ++i) xs.push_back(i);
    const auto s = metrics::summarize(xs);
    CHECK(s.p50_us == 50.0);
    CHECK(s.p95_us == 95.0);
    CHECK(s.mean_us == doctest::Approx(50.5));
    const auto one = metrics::summarize(std::vector<double>{100.0});
    CHECK(one.mean_us == 100.0);
    CHECK(one.p50_us == 100.0);
    CHECK(one.p95_us == 100.0);

    std::vector<StageTiming> t = {{Stage::PreIns, 3.0}, {Stage::PreIns, 5.0}, {Stage::Search, 7.0}};
    const auto agg = metrics::latency_aggregate(t);
    CHECK(agg.size() == 2);
    CHECK(agg.at(Stage::PreIns).count == 2);
    CHECK_FALSE(agg.contains(Stage::Generation));
}
