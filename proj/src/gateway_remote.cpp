#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "streammem/error.hpp"
#include "streammem/gateway.hpp"

namespace streammem {

using json = nlohmann::json;

RemoteConfig RemoteConfig::from_env() { return from_env(RemoteConfig{}); }

RemoteConfig RemoteConfig::from_env(RemoteConfig base) {
    if (base.base_url.empty()) {
        if (const char* v = std::getenv("NEUROMEM_BASE_URL")) base.base_url = v;
    }
    if (base.api_key.empty()) {
        if (const char* v = std::getenv("NEUROMEM_API_KEY")) base.api_key = v;
    }
    return base;
}

RemoteBackend::RemoteBackend(RemoteConfig cfg)
    : cfg_(std::move(cfg)), bucket_(cfg_.requests_per_second, std::max(1.0, cfg_.requests_per_second)) {
    if (cfg_.base_url.empty()) throw Error(ErrorCode::ConfigError, "remote gateway needs a base URL (NEUROMEM_BASE_URL)");
    std::string url = cfg_.base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "base URL lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? std::string() : url.substr(path_start);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url.starts_with("https://")) {
        throw Error(ErrorCode::ConfigError, "https base URL but the build has no TLS support");
    }
#endif
}

std::string RemoteBackend::post(const std::string& path, const std::string& body) {
    bucket_.acquire();
    httplib::Client client(scheme_host_port_);
    const auto secs = cfg_.request_timeout.count() / 1000;
    const auto usecs = (cfg_.request_timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    auto res = client.Post(path_prefix_ + path, headers, body, "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout) {
            throw GatewayError(GatewayErrorKind::Timeout, httplib::to_string(err));
        }
        throw GatewayError(GatewayErrorKind::Transport, httplib::to_string(err));
    }
    if (res->status == 429) throw GatewayError(GatewayErrorKind::RateLimited, "HTTP 429");
    if (res->status == 408 || res->status == 504) {
        throw GatewayError(GatewayErrorKind::Timeout, "HTTP " + std::to_string(res->status));
    }
    if (res->status >= 500) throw GatewayError(GatewayErrorKind::Transport, "HTTP " + std::to_string(res->status));
    if (res->status != 200) {
        throw GatewayError(GatewayErrorKind::Malformed,
                           "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    return res->body;
}

std::vector<Embedding> RemoteBackend::embed(std::span<const std::string> texts) {
    if (texts.empty()) throw GatewayError(GatewayErrorKind::EmptyInput, "no texts to embed");
    json req = {{"model", cfg_.embed_model}, {"input", json::array()}};
    for (const auto& t : texts) {
        if (t.empty()) throw GatewayError(GatewayErrorKind::EmptyInput, "empty text");
        req["input"].push_back(t);
    }
    const std::string body = post("/embeddings", req.dump());
    try {
        const auto res = json::parse(body);
        std::vector<Embedding> out(texts.size());
        for (const auto& item : res.at("data")) {
            const auto idx = item.value("index", std::size_t{0});
            if (idx >= out.size()) throw GatewayError(GatewayErrorKind::Malformed, "embedding index out of range");
            out[idx] = item.at("embedding").get<Embedding>();
            if (out[idx].size() != cfg_.dimension) {
                throw GatewayError(GatewayErrorKind::Malformed,
                                   "embedding dimension " + std::to_string(out[idx].size()) + ", expected " +
                                       std::to_string(cfg_.dimension));
            }
            if (!normalize_in_place(out[idx])) throw GatewayError(GatewayErrorKind::Malformed, "zero embedding");
        }
        for (const auto& e : out) {
            if (e.empty()) throw GatewayError(GatewayErrorKind::Malformed, "missing embedding in response");
        }
        return out;
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::Malformed, e.what());
    }
}

std::string RemoteBackend::chat(const ChatRequest& req) {
    const std::string prompt = render_prompt(req);
    json body = {
        {"model", cfg_.chat_model},
        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
        {"max_tokens", req.max_tokens},
        {"temperature", req.temperature},
    };
    const std::string raw = post("/chat/completions", body.dump());
    try {
        const auto res = json::parse(raw);
        const auto& content = res.at("choices").at(0).at("message").at("content");
        if (content.is_null()) throw GatewayError(GatewayErrorKind::EmptyCompletion, "null content");
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::Malformed, e.what());
    }
}

}  // namespace streammem
