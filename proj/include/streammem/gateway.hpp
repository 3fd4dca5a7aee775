#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "streammem/metrics.hpp"

namespace streammem {

/// Unit-norm embedding vector.
using Embedding = std::vector<float>;

double dot(std::span<const float> a, std::span<const float> b);
/// Scales v to unit L2 norm in place; returns false for a zero vector.
bool normalize_in_place(std::vector<float>& v);

struct ChatRequest {
    std::string template_id;
    std::map<std::string, std::string> variables;
    int max_tokens = 256;
    double temperature = 0.0;
};

struct PromptTemplate {
    std::string_view id;
    std::string_view text;
    std::vector<std::string_view> placeholders;
};

/// Registered templates: summarize, triplet_extract, crud, validate,
/// keyword_extract, decompose, paraphrase, answer.
std::span<const PromptTemplate> prompt_templates();
const PromptTemplate* find_template(std::string_view id);

/// Checks the template is registered and every placeholder is bound, then
/// substitutes "{name}" occurrences. Throws GatewayError(Malformed).
std::string render_prompt(const ChatRequest& req);

enum class CallKind { Chat, Embed };

struct GatewayTiming {
    CallKind call_kind = CallKind::Chat;
    double wall_us = 0.0;
    Stage stage = Stage::Generation;
    bool ok = true;
    int retries = 0;
};

/// A model provider. Implementations must be safe to call from several
/// experiment threads at once.
class GatewayBackend {
public:
    virtual ~GatewayBackend() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
    virtual std::string chat(const ChatRequest& req) = 0;
};

/// Deterministic rule-based backend.
///
/// Embeddings hash boundary-padded character trigrams of each normalized
/// (lowercased, punctuation-stripped, Porter-stemmed) token into `dim`
/// buckets with a +/-1 sign, then L2-normalize. Chat dispatches on the
/// template id to fixed extractive rules; see mock_rules in gateway.cpp.
class MockBackend final : public GatewayBackend {
public:
    explicit MockBackend(std::size_t dim = 256, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}

    std::string name() const override { return "mock"; }
    std::size_t dimension() const override { return dim_; }
    std::vector<Embedding> embed(std::span<const std::string> texts) override;
    std::string chat(const ChatRequest& req) override;

    Embedding embed_text(std::string_view text) const;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Simple token bucket; `rate_per_s <= 0` disables limiting.
class TokenBucket {
public:
    explicit TokenBucket(double rate_per_s = 0.0, double burst = 1.0);
    /// Blocks until a token is available.
    void acquire();

private:
    std::mutex mu_;
    double rate_;
    double burst_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
};

struct RemoteConfig {
    std::string base_url;  // e.g. https://api.example.com/v1
    std::string api_key;
    std::string chat_model = "gpt-4o-mini";
    std::string embed_model = "text-embedding-3-small";
    std::size_t dimension = 1536;
    std::chrono::milliseconds request_timeout{30'000};
    double requests_per_second = 0.0;

    /// Reads NEUROMEM_BASE_URL and NEUROMEM_API_KEY; fields already set win.
    static RemoteConfig from_env(RemoteConfig base);
    static RemoteConfig from_env();
};

/// OpenAI-compatible HTTP client for {base_url}/chat/completions and
/// {base_url}/embeddings.
class RemoteBackend final : public GatewayBackend {
public:
    explicit RemoteBackend(RemoteConfig cfg);

    std::string name() const override { return "remote"; }
    std::size_t dimension() const override { return cfg_.dimension; }
    std::vector<Embedding> embed(std::span<const std::string> texts) override;
    std::string chat(const ChatRequest& req) override;

private:
    std::string post(const std::string& path, const std::string& body);

    RemoteConfig cfg_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    TokenBucket bucket_;
};

struct RetryPolicy {
    int max_retries = 2;
    std::chrono::milliseconds base_backoff{250};
    std::chrono::milliseconds total_timeout{30'000};
};

/// Per-run handle over a shared backend. Applies the retry policy and logs
/// exactly one GatewayTiming per call, attributed to the caller's stage.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<GatewayBackend> backend, RetryPolicy retry = {});

    std::vector<Embedding> embed(std::span<const std::string> texts, Stage stage);
    Embedding embed_one(std::string_view text, Stage stage);
    std::string chat(const ChatRequest& req, Stage stage);

    std::size_t dimension() const { return backend_->dimension(); }
    const GatewayBackend& backend() const { return *backend_; }

    std::span<const GatewayTiming> timings() const { return timings_; }
    std::vector<GatewayTiming> take_timings();

private:
    template <class F>
    auto with_retry(CallKind kind, Stage stage, F&& call);

    std::shared_ptr<GatewayBackend> backend_;
    RetryPolicy retry_;
    std::vector<GatewayTiming> timings_;
};

struct AnswerResult {
    std::string prediction;
    bool failed = false;
};

/// One chat call with the fixed answer template, attributed to Generation.
/// Gateway failures yield an empty prediction with `failed` set.
AnswerResult answer(Gateway& gateway, std::string_view query, std::string_view context);

// Rules shared by the mock backend and the synthetic workload generator.
namespace mock_rules {

struct Svo {
    std::string subject;
    std::string relation;
    std::string object;
};

/// Rule-based subject/verb/object split of each sentence at the first verb
/// from a fixed list. Sentences without such a verb yield nothing.
std::vector<Svo> extract_svo(std::string_view text);

/// Synonym groups used by paraphrasing; each word belongs to at most one.
std::span<const std::vector<std::string_view>> synonym_groups();
/// The j-th alternative for `word` (lowercase), or the word itself.
std::string synonym(std::string_view word, std::size_t j);

/// Strips a leading "[ts=...] speaker: " context prefix.
std::string strip_context_prefix(std::string_view line);

}  // namespace mock_rules

}  // namespace streammem
