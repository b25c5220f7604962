#pragma once

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>

#include "freshstack/gateway.hpp"
#include "freshstack/mock_backend.hpp"

namespace freshstack {

// OpenAI-compatible chat/embeddings provider. The endpoint is the API base
// (e.g. "http://localhost:8089/v1"); credentials come from the environment
// variable named in the config and are never serialized.
class HttpBackend final : public GatewayBackend {
public:
    explicit HttpBackend(const GatewayConfig& config) {
        if (config.endpoint.empty()) throw ConfigError("http_provider backend requires an endpoint");
        split_endpoint(config.endpoint, base_, path_prefix_);
        if (!config.credentials_env_var.empty()) {
            const char* key = std::getenv(config.credentials_env_var.c_str());
            if (key != nullptr) api_key_ = key;
        }
        timeout_sec_ = 120;
    }

    std::string name() const override { return "http_provider"; }

    ChatResponse complete_raw(const ChatRequest& request) override {
        json payload{{"model", request.model_id},
                     {"messages", json::array({json{{"role", "system"}, {"content", request.system_text}},
                                               json{{"role", "user"}, {"content", request.user_text}}})},
                     {"temperature", request.temperature},
                     {"max_tokens", request.max_output_tokens}};
        json reply = post_json("/chat/completions", payload);
        ChatResponse resp;
        try {
            const auto& choice = reply.at("choices").at(0);
            resp.text = choice.at("message").at("content").get<std::string>();
            resp.finish_reason = choice.value("finish_reason", std::string{});
            if (reply.contains("usage")) {
                resp.usage.prompt_tokens = reply["usage"].value("prompt_tokens", std::size_t{0});
                resp.usage.output_tokens = reply["usage"].value("completion_tokens", std::size_t{0});
            }
        } catch (const json::exception& e) {
            throw BackendFailure{0, std::string("malformed completion payload: ") + e.what()};
        }
        return resp;
    }

    std::vector<EmbeddingVector> embed_raw(const std::string& model_id,
                                           const std::vector<std::string>& texts) override {
        json payload{{"model", model_id}, {"input", texts}};
        json reply = post_json("/embeddings", payload);
        std::vector<EmbeddingVector> out;
        try {
            const auto& data = reply.at("data");
            out.resize(data.size());
            for (const auto& item : data) {
                std::size_t idx = item.value("index", out.size());
                EmbeddingVector v;
                v.values = item.at("embedding").get<std::vector<float>>();
                if (idx >= out.size()) throw BackendFailure{0, "embedding index out of range"};
                out[idx] = std::move(v);
            }
        } catch (const json::exception& e) {
            throw BackendFailure{0, std::string("malformed embeddings payload: ") + e.what()};
        }
        return out;
    }

private:
    static void split_endpoint(const std::string& endpoint, std::string& base, std::string& prefix) {
        std::size_t scheme = endpoint.find("://");
        if (scheme == std::string::npos) throw ConfigError("endpoint must include a scheme: " + endpoint);
        std::size_t path = endpoint.find('/', scheme + 3);
        if (path == std::string::npos) {
            base = endpoint;
            prefix.clear();
        } else {
            base = endpoint.substr(0, path);
            prefix = endpoint.substr(path);
            while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
        }
    }

    json post_json(const std::string& route, const json& payload) {
        httplib::Client client(base_);
        client.set_read_timeout(timeout_sec_, 0);
        client.set_write_timeout(timeout_sec_, 0);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(path_prefix_ + route, headers, payload.dump(), "application/json");
        if (!res) {
            throw BackendFailure{0, "transport error: " + httplib::to_string(res.error())};
        }
        if (res->status != 200) {
            throw BackendFailure{res->status, res->body.substr(0, 500)};
        }
        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded()) throw BackendFailure{0, "provider returned invalid JSON"};
        return reply;
    }

    std::string base_;
    std::string path_prefix_;
    std::string api_key_;
    time_t timeout_sec_;
};

inline std::shared_ptr<GatewayBackend> make_backend(const GatewayConfig& config) {
    if (config.backend == BackendKind::mock) {
        return std::make_shared<MockBackend>(config.mock_dims);
    }
    return std::make_shared<HttpBackend>(config);
}

} // namespace freshstack
