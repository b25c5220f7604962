#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "freshstack/errors.hpp"
#include "freshstack/io.hpp"
#include "freshstack/prompts.hpp"
#include "freshstack/sha256.hpp"
#include "freshstack/text.hpp"
#include "freshstack/warn.hpp"

namespace freshstack {

struct EmbeddingVector {
    std::vector<float> values;
    std::size_t dims() const { return values.size(); }
};

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dims() != b.dims()) throw ContractError("embedding dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        s += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
    }
    return s;
}

inline double l2_norm(const EmbeddingVector& v) {
    double s = 0.0;
    for (float x : v.values) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

inline void normalize_in_place(EmbeddingVector& v) {
    double n = l2_norm(v);
    if (n == 0.0 || !std::isfinite(n)) throw ContractError("cannot normalize zero/non-finite vector");
    for (float& x : v.values) x = static_cast<float>(static_cast<double>(x) / n);
}

struct ChatRequest {
    std::string model_id;
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
    int max_output_tokens = 2048;
};

struct ChatUsage {
    std::size_t prompt_tokens = 0;
    std::size_t output_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::string finish_reason;
    int attempt_count = 1;
    ChatUsage usage;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::vector<int> backoff_ms = {100, 400, 1600};
};

enum class BackendKind { http_provider, mock };

struct GatewayConfig {
    BackendKind backend = BackendKind::mock;
    std::string endpoint;            // e.g. "https://api.openai.com/v1"
    std::string credentials_env_var; // name of the env var holding the key; never serialized
    int max_parallel_requests = 4;
    RetryPolicy retry;
    std::string cache_dir; // embedding cache; empty disables caching
    std::size_t mock_dims = 64;
    std::size_t max_embed_chars = 32768; // provider context limit, crude char proxy
    std::size_t embed_batch_size = 64;
    // Optional instruction prefixes for instruction-tuned embedders.
    std::map<std::string, std::string> query_prefix;
    std::map<std::string, std::string> doc_prefix;
    // Optional expected-dims registry; mismatches are contract errors.
    std::map<std::string, std::size_t> expected_dims;
};

enum class EmbedKind { document, query };

struct RequestLogEntry {
    std::string model_id;
    double temperature = 0.0;
    std::string prompt_sha256;
    int attempt_count = 1;
};

// Internal failure signal a backend raises so the gateway can retry.
struct BackendFailure {
    int status = 0; // HTTP status, or 0 for transport-level failures
    std::string message;
};

class GatewayBackend {
public:
    virtual ~GatewayBackend() = default;
    virtual std::string name() const = 0;
    virtual ChatResponse complete_raw(const ChatRequest& request) = 0;
    virtual std::vector<EmbeddingVector> embed_raw(const std::string& model_id,
                                                   const std::vector<std::string>& texts) = 0;
};

namespace detail {

class Semaphore {
public:
    explicit Semaphore(int count) : count_(count) {}
    void acquire() {
        std::unique_lock<std::mutex> lock(m_);
        cv_.wait(lock, [&] { return count_ > 0; });
        --count_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(m_);
            ++count_;
        }
        cv_.notify_one();
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    int count_;
};

class SemaphoreGuard {
public:
    explicit SemaphoreGuard(Semaphore& s) : s_(s) { s_.acquire(); }
    ~SemaphoreGuard() { s_.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

private:
    Semaphore& s_;
};

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 1469598103934665603ull) {
    std::uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::string sanitize_for_path(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        out.push_back(is_ascii_alnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    return out;
}

} // namespace detail

// Provider-agnostic chat/embedding gateway: bounded parallelism, retries with
// backoff, disk-backed embedding cache, unit normalization, and a request log.
class Gateway {
public:
    Gateway(GatewayConfig config, std::shared_ptr<GatewayBackend> backend)
        : config_(std::move(config)),
          backend_(std::move(backend)),
          semaphore_(config_.max_parallel_requests) {
        if (config_.max_parallel_requests < 1) {
            throw ConfigError("max_parallel_requests must be >= 1");
        }
    }

    const GatewayConfig& config() const { return config_; }
    GatewayBackend& backend() { return *backend_; }

    ChatResponse complete(const ChatRequest& request) {
        if (request.temperature < 0.0 || request.temperature > 2.0) {
            throw ContractError("temperature must be in [0, 2]");
        }
        detail::SemaphoreGuard guard(semaphore_);
        std::vector<std::string> attempts;
        const int max_attempts = std::max(1, config_.retry.max_attempts);
        for (int attempt = 1; attempt <= max_attempts; ++attempt) {
            try {
                ChatResponse resp = backend_->complete_raw(request);
                if (resp.text.empty()) {
                    throw ContractError("provider returned empty response text");
                }
                resp.attempt_count = attempt;
                log_request(request, attempt);
                return resp;
            } catch (const BackendFailure& f) {
                attempts.push_back("attempt " + std::to_string(attempt) + ": status " +
                                   std::to_string(f.status) + ": " + f.message);
                if (attempt < max_attempts) backoff(attempt);
            }
        }
        throw TransportError("chat completion failed after " + std::to_string(max_attempts) +
                                 " attempts (model " + request.model_id + ")",
                             attempts);
    }

    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                             const std::string& model_id,
                                             EmbedKind kind = EmbedKind::document) {
        std::vector<std::string> prepared;
        prepared.reserve(texts.size());
        const auto& prefixes = (kind == EmbedKind::query) ? config_.query_prefix : config_.doc_prefix;
        auto pit = prefixes.find(model_id);
        for (const auto& t : texts) {
            if (t.empty()) throw ContractError("cannot embed an empty text");
            std::string p = (pit == prefixes.end()) ? t : pit->second + t;
            if (p.size() > config_.max_embed_chars) p.resize(config_.max_embed_chars);
            prepared.push_back(std::move(p));
        }

        std::vector<EmbeddingVector> out(prepared.size());
        std::vector<std::size_t> misses;
        for (std::size_t i = 0; i < prepared.size(); ++i) {
            if (auto cached = cache_lookup(model_id, prepared[i])) {
                out[i] = std::move(*cached);
            } else {
                misses.push_back(i);
            }
        }

        for (std::size_t off = 0; off < misses.size(); off += config_.embed_batch_size) {
            std::size_t batch_end = std::min(misses.size(), off + config_.embed_batch_size);
            std::vector<std::string> batch;
            for (std::size_t i = off; i < batch_end; ++i) batch.push_back(prepared[misses[i]]);
            auto vectors = embed_batch_with_retry(model_id, batch);
            if (vectors.size() != batch.size()) {
                throw ContractError("provider returned " + std::to_string(vectors.size()) +
                                    " vectors for " + std::to_string(batch.size()) + " inputs");
            }
            for (std::size_t i = 0; i < vectors.size(); ++i) {
                check_dims(model_id, vectors[i]);
                normalize_in_place(vectors[i]);
                cache_store(model_id, batch[i], vectors[i]);
                out[misses[off + i]] = std::move(vectors[i]);
            }
        }
        return out;
    }

    EmbeddingVector embed_one(const std::string& text, const std::string& model_id,
                              EmbedKind kind = EmbedKind::document) {
        return embed_texts({text}, model_id, kind).at(0);
    }

    std::vector<RequestLogEntry> request_log() const {
        std::lock_guard<std::mutex> lock(log_mutex_);
        return request_log_;
    }

private:
    void backoff(int attempt) {
        const auto& schedule = config_.retry.backoff_ms;
        if (schedule.empty()) return;
        int ms = schedule[std::min<std::size_t>(static_cast<std::size_t>(attempt) - 1,
                                                schedule.size() - 1)];
        if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }

    void check_dims(const std::string& model_id, const EmbeddingVector& v) {
        auto it = config_.expected_dims.find(model_id);
        if (it != config_.expected_dims.end() && v.dims() != it->second) {
            throw ContractError("embedding dims " + std::to_string(v.dims()) + " != registered " +
                                std::to_string(it->second) + " for model " + model_id);
        }
        for (float x : v.values) {
            if (!std::isfinite(x)) throw ContractError("non-finite embedding entry from provider");
        }
    }

    std::vector<EmbeddingVector> embed_batch_with_retry(const std::string& model_id,
                                                        const std::vector<std::string>& batch) {
        detail::SemaphoreGuard guard(semaphore_);
        std::vector<std::string> attempts;
        const int max_attempts = std::max(1, config_.retry.max_attempts);
        for (int attempt = 1; attempt <= max_attempts; ++attempt) {
            try {
                return backend_->embed_raw(model_id, batch);
            } catch (const BackendFailure& f) {
                attempts.push_back("attempt " + std::to_string(attempt) + ": status " +
                                   std::to_string(f.status) + ": " + f.message);
                if (attempt < max_attempts) backoff(attempt);
            }
        }
        throw TransportError("embedding failed after " + std::to_string(max_attempts) +
                                 " attempts (model " + model_id + ")",
                             attempts);
    }

    fs::path cache_path(const std::string& model_id, const std::string& text) const {
        std::string key = Sha256::hex(model_id + '\x1f' + text);
        return fs::path(config_.cache_dir) / detail::sanitize_for_path(model_id) / (key + ".json");
    }

    std::optional<EmbeddingVector> cache_lookup(const std::string& model_id, const std::string& text) {
        if (config_.cache_dir.empty()) return std::nullopt;
        fs::path p = cache_path(model_id, text);
        std::error_code ec;
        if (!fs::exists(p, ec)) return std::nullopt;
        try {
            json j = json::parse(read_file(p));
            EmbeddingVector v;
            v.values = j.at("values").get<std::vector<float>>();
            return v;
        } catch (const std::exception&) {
            warn("corrupt embedding cache entry ignored: " + p.string());
            return std::nullopt;
        }
    }

    void cache_store(const std::string& model_id, const std::string& text, const EmbeddingVector& v) {
        if (config_.cache_dir.empty()) return;
        json j{{"model_id", model_id}, {"dims", v.dims()}, {"values", v.values}};
        atomic_write_file(cache_path(model_id, text), j.dump());
    }

    void log_request(const ChatRequest& request, int attempt_count) {
        RequestLogEntry entry;
        entry.model_id = request.model_id;
        entry.temperature = request.temperature;
        entry.prompt_sha256 = Sha256::hex(request.system_text + '\x1f' + request.user_text);
        entry.attempt_count = attempt_count;
        std::lock_guard<std::mutex> lock(log_mutex_);
        request_log_.push_back(std::move(entry));
    }

    GatewayConfig config_;
    std::shared_ptr<GatewayBackend> backend_;
    detail::Semaphore semaphore_;
    mutable std::mutex log_mutex_;
    std::vector<RequestLogEntry> request_log_;
};

} // namespace freshstack
