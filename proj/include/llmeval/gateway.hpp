#pragma once

#include "llmeval/errors.hpp"
#include "llmeval/jsonl.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace llmeval {

/// Retryable backend failure (connection reset, 429, 5xx). Callers see TransportError
/// once the retry budget is spent.
class TransientFailure : public TransportError {
    using TransportError::TransportError;
};

enum class Decoding { Greedy };

/// Field names for a chat-completion style JSON POST. Defaults follow the OpenAI layout.
struct WireMapping {
    std::string endpoint = "/v1/chat/completions";
    std::string model_field = "model";
    std::string messages_field = "messages";
    std::string temperature_field = "temperature";
    std::string response_pointer = "/choices/0/message/content";
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";

    static WireMapping from_json(const json& j);
};

struct GatewayConfig {
    std::string base_url;
    std::string model_id;
    std::string api_key_env = "OPENAI_API_KEY";
    int max_in_flight = 4;
    int retry_limit = 3;
    Decoding decoding = Decoding::Greedy;
    std::chrono::duration<double> timeout{120.0};
    /// Client-side request rate cap; 0 disables it.
    double requests_per_second = 0.0;
    std::chrono::milliseconds backoff_base{500};
    WireMapping wire;

    /// Throws ConfigError when an invariant does not hold.
    void validate() const;

    /// Reads the keys above (timeout in seconds, backoff_base_ms, optional "wire" object).
    static GatewayConfig from_json(const json& j);
};

/// Prompt text with `{{name}}` placeholders. The checksum is the SHA-256 of the body.
class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(std::string name, std::string body);

    static PromptTemplate load(const std::filesystem::path& path);

    const std::string& name() const { return name_; }
    const std::string& body() const { return body_; }
    const std::string& checksum() const { return checksum_; }
    const std::set<std::string>& placeholders() const { return placeholders_; }

    /// Substitutes every placeholder. Throws PreconditionError when a binding is missing
    /// or names a placeholder the template does not have. Bound values are not re-scanned.
    std::string render(const std::map<std::string, std::string>& bindings) const;

private:
    std::string name_;
    std::string body_;
    std::string checksum_;
    std::set<std::string> placeholders_;
};

/// Loads `<dir>/<name>.txt`; defaults to the prompt directory shipped with the project.
PromptTemplate load_prompt(std::string_view name,
                           const std::filesystem::path& dir = LLMEVAL_PROMPT_DIR);

struct TranscriptEntry {
    std::string prompt;
    std::string response;
    /// Replays as a transport failure on every attempt instead of returning `response`.
    bool transport_failure = false;

    bool operator==(const TranscriptEntry&) const = default;
};

/// Recorded (prompt, response) pairs, persisted one JSON object per line with the
/// prompt's SHA-256 alongside.
struct Transcript {
    std::vector<TranscriptEntry> entries;

    static Transcript load(const std::filesystem::path& path);
    static Transcript parse(std::string_view text);
    std::string serialize() const;
    void save(const std::filesystem::path& path) const;
};

class Backend {
public:
    virtual ~Backend() = default;
    /// Raw backend text. Throws TransientFailure for retryable faults.
    virtual std::string send(const std::string& prompt, const GatewayConfig& config) = 0;
};

/// Live HTTP backend. The API key is read from `config.api_key_env` on every call.
class HttpBackend : public Backend {
public:
    std::string send(const std::string& prompt, const GatewayConfig& config) override;
};

/// Replays a transcript. Each call consumes the earliest unconsumed entry whose prompt
/// equals the request, so replay is independent of the order concurrent workers arrive in.
/// With `strict_order` the entry at the cursor must match instead.
class MockBackend : public Backend {
public:
    explicit MockBackend(Transcript transcript, bool strict_order = false);

    std::string send(const std::string& prompt, const GatewayConfig& config) override;

    std::size_t cursor() const;
    std::size_t calls() const { return calls_.load(); }
    int max_observed_in_flight() const { return max_in_flight_.load(); }
    /// Artificial latency per call, used to make concurrency observable in tests.
    void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

private:
    Transcript transcript_;
    std::vector<bool> consumed_;
    std::size_t consumed_count_ = 0;
    bool strict_order_;
    mutable std::mutex mutex_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::chrono::milliseconds latency_{0};
};

/// Answers prompts with a caller-supplied function.
class CallbackBackend : public Backend {
public:
    using Responder = std::function<std::string(const std::string&)>;
    explicit CallbackBackend(Responder responder) : responder_(std::move(responder)) {}
    std::string send(const std::string& prompt, const GatewayConfig&) override {
        return responder_(prompt);
    }

private:
    Responder responder_;
};

/// Forwards to another backend and keeps every successful exchange.
class RecordingBackend : public Backend {
public:
    explicit RecordingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}
    std::string send(const std::string& prompt, const GatewayConfig& config) override;
    Transcript transcript() const;

private:
    std::shared_ptr<Backend> inner_;
    mutable std::mutex mutex_;
    Transcript recorded_;
};

struct BatchItemError {
    std::size_t index = 0;
    std::string kind;  // "transport", "auth", "mock_exhausted", "error"
    std::string message;
};

struct BatchResult {
    /// Positionally aligned with the prompts; empty where the item failed.
    std::vector<std::optional<std::string>> responses;
    std::vector<BatchItemError> errors;

    bool ok() const { return errors.empty(); }
};

/// Single access point for LLM calls: bounded concurrency, rate limiting and retries.
class Gateway {
public:
    Gateway(GatewayConfig config, std::shared_ptr<Backend> backend);

    std::string complete(const std::string& prompt);
    BatchResult complete_batch(const std::vector<std::string>& prompts);

    const GatewayConfig& config() const { return config_; }
    std::size_t calls() const { return calls_.load(); }

private:
    void acquire_slot();
    void release_slot();
    void pace();

    GatewayConfig config_;
    std::shared_ptr<Backend> backend_;
    std::mutex slot_mutex_;
    std::condition_variable slot_cv_;
    int in_flight_ = 0;
    std::mutex pace_mutex_;
    std::chrono::steady_clock::time_point next_slot_{};
    std::atomic<std::size_t> calls_{0};
};

/// Removes trailing newline characters and nothing else.
std::string strip_trailing_newlines(std::string s);

}  // namespace llmeval
