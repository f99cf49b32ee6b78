#include "llmeval/gateway.hpp"

#include "llmeval/text_util.hpp"

#include "httplib.h"

#include <cstdlib>
#include <random>
#include <regex>
#include <thread>

namespace llmeval {

WireMapping WireMapping::from_json(const json& j) {
    WireMapping w;
    w.endpoint = j.value("endpoint", w.endpoint);
    w.model_field = j.value("model_field", w.model_field);
    w.messages_field = j.value("messages_field", w.messages_field);
    w.temperature_field = j.value("temperature_field", w.temperature_field);
    w.response_pointer = j.value("response_pointer", w.response_pointer);
    w.auth_header = j.value("auth_header", w.auth_header);
    w.auth_prefix = j.value("auth_prefix", w.auth_prefix);
    return w;
}

void GatewayConfig::validate() const {
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (retry_limit < 0) throw ConfigError("retry_limit must be >= 0");
    if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
    if (requests_per_second < 0) throw ConfigError("requests_per_second must be >= 0");
}

GatewayConfig GatewayConfig::from_json(const json& j) {
    GatewayConfig c;
    c.base_url = j.value("base_url", c.base_url);
    c.model_id = j.value("model_id", c.model_id);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.retry_limit = j.value("retry_limit", c.retry_limit);
    if (j.contains("decoding") && j["decoding"] != "greedy")
        throw ConfigError("only greedy decoding is supported");
    c.timeout = std::chrono::duration<double>(j.value("timeout", c.timeout.count()));
    c.requests_per_second = j.value("requests_per_second", c.requests_per_second);
    c.backoff_base = std::chrono::milliseconds(j.value("backoff_base_ms", c.backoff_base.count()));
    if (j.contains("wire")) c.wire = WireMapping::from_json(j["wire"]);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

PromptTemplate::PromptTemplate(std::string name, std::string body)
    : name_(std::move(name)), body_(std::move(body)), checksum_(text::sha256_hex(body_)) {
    static const std::regex placeholder(R"(\{\{([A-Za-z_][A-Za-z0-9_]*)\}\})");
    for (std::sregex_iterator it(body_.begin(), body_.end(), placeholder), end; it != end; ++it)
        placeholders_.insert((*it)[1].str());
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    return PromptTemplate(path.stem().string(), text::read_file(path));
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
    for (const auto& [key, _] : bindings)
        if (!placeholders_.count(key))
            throw PreconditionError("template " + name_ + " has no placeholder " + key);
    for (const auto& p : placeholders_)
        if (!bindings.count(p))
            throw PreconditionError("template " + name_ + " missing binding " + p);

    std::string out;
    out.reserve(body_.size());
    std::size_t pos = 0;
    while (pos < body_.size()) {
        auto open = body_.find("{{", pos);
        if (open == std::string::npos) {
            out.append(body_, pos);
            break;
        }
        auto close = body_.find("}}", open + 2);
        std::string key = close == std::string::npos ? "" : body_.substr(open + 2, close - open - 2);
        if (close == std::string::npos || !placeholders_.count(key)) {
            out.append(body_, pos, open + 2 - pos);
            pos = open + 2;
            continue;
        }
        out.append(body_, pos, open - pos);
        out += bindings.at(key);
        pos = close + 2;
    }
    return out;
}

PromptTemplate load_prompt(std::string_view name, const std::filesystem::path& dir) {
    return PromptTemplate::load(dir / (std::string(name) + ".txt"));
}

// ---------------------------------------------------------------------------

Transcript Transcript::parse(std::string_view text) {
    Transcript t;
    std::size_t lineno = 0;
    for (const auto& line : text::split_lines(text)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        json row;
        try {
            row = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError("transcript line " + std::to_string(lineno) + ": " + e.what());
        }
        TranscriptEntry e;
        e.prompt = row.at("prompt").get<std::string>();
        e.response = row.value("response", "");
        e.transport_failure = row.value("error", "") == "transport";
        if (row.contains("prompt_hash") && row["prompt_hash"] != text::sha256_hex(e.prompt))
            throw SchemaError("transcript line " + std::to_string(lineno) + ": prompt hash mismatch");
        t.entries.push_back(std::move(e));
    }
    return t;
}

Transcript Transcript::load(const std::filesystem::path& path) {
    return parse(text::read_file(path));
}

std::string Transcript::serialize() const {
    std::vector<json> rows;
    rows.reserve(entries.size());
    for (const auto& e : entries) {
        json row = {{"prompt_hash", text::sha256_hex(e.prompt)},
                    {"prompt", e.prompt},
                    {"response", e.response}};
        if (e.transport_failure) row["error"] = "transport";
        rows.push_back(std::move(row));
    }
    return to_jsonl(rows);
}

void Transcript::save(const std::filesystem::path& path) const {
    text::write_file(path, serialize());
}

// ---------------------------------------------------------------------------

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path_prefix;
};

ParsedUrl parse_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("malformed base_url: " + url);
    ParsedUrl out{m[1].str(), m[2].str()};
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    return out;
}

}  // namespace

std::string HttpBackend::send(const std::string& prompt, const GatewayConfig& config) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
        throw AuthError("environment variable " + config.api_key_env + " is not set");

    auto url = parse_url(config.base_url);
    httplib::Client client(url.origin);
    auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                  timeout.count() % 1000000);
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                            timeout.count() % 1000000);

    const auto& w = config.wire;
    json body;
    body[w.model_field] = config.model_id;
    body[w.messages_field] = json::array({{{"role", "user"}, {"content", prompt}}});
    if (!w.temperature_field.empty()) body[w.temperature_field] = 0;

    httplib::Headers headers = {{w.auth_header, w.auth_prefix + key}};
    auto res = client.Post(url.path_prefix + w.endpoint, headers, body.dump(), "application/json");
    if (!res) throw TransientFailure("request failed: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
        throw AuthError("backend rejected credentials (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429 || res->status >= 500)
        throw TransientFailure("HTTP " + std::to_string(res->status));
    if (res->status != 200)
        throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);

    json parsed;
    try {
        parsed = json::parse(res->body);
        return parsed.at(json::json_pointer(w.response_pointer)).get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(std::string("unexpected response body: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

MockBackend::MockBackend(Transcript transcript, bool strict_order)
    : transcript_(std::move(transcript)),
      consumed_(transcript_.entries.size(), false),
      strict_order_(strict_order) {}

std::size_t MockBackend::cursor() const {
    std::lock_guard lock(mutex_);
    return consumed_count_;
}

std::string MockBackend::send(const std::string& prompt, const GatewayConfig&) {
    ++calls_;
    int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    struct Leave {
        std::atomic<int>& counter;
        ~Leave() { --counter; }
    } leave{in_flight_};

    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

    std::lock_guard lock(mutex_);
    const auto& entries = transcript_.entries;
    if (strict_order_) {
        if (consumed_count_ >= entries.size())
            throw MockExhausted("transcript exhausted after " + std::to_string(entries.size()) +
                                " entries");
        const auto& e = entries[consumed_count_];
        if (e.prompt != prompt)
            throw MockExhausted("prompt at cursor " + std::to_string(consumed_count_) +
                                " does not match the recorded prompt");
        if (e.transport_failure) throw TransientFailure("recorded transport failure");
        consumed_[consumed_count_++] = true;
        return e.response;
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (consumed_[i] || entries[i].prompt != prompt) continue;
        if (entries[i].transport_failure) throw TransientFailure("recorded transport failure");
        consumed_[i] = true;
        ++consumed_count_;
        return entries[i].response;
    }
    throw MockExhausted("no unconsumed transcript entry for prompt " +
                        text::sha256_hex(prompt).substr(0, 12));
}

std::string RecordingBackend::send(const std::string& prompt, const GatewayConfig& config) {
    std::string response = inner_->send(prompt, config);
    std::lock_guard lock(mutex_);
    recorded_.entries.push_back({prompt, response, false});
    return response;
}

Transcript RecordingBackend::transcript() const {
    std::lock_guard lock(mutex_);
    return recorded_;
}

// ---------------------------------------------------------------------------

std::string strip_trailing_newlines(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Backend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
    config_.validate();
    if (!backend_) throw ConfigError("gateway needs a backend");
}

void Gateway::acquire_slot() {
    std::unique_lock lock(slot_mutex_);
    slot_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
}

void Gateway::release_slot() {
    {
        std::lock_guard lock(slot_mutex_);
        --in_flight_;
    }
    slot_cv_.notify_one();
}

void Gateway::pace() {
    if (config_.requests_per_second <= 0) return;
    auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / config_.requests_per_second));
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(pace_mutex_);
        auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_slot_);
        next_slot_ = slot + interval;
    }
    std::this_thread::sleep_until(slot);
}

std::string Gateway::complete(const std::string& prompt) {
    if (prompt.empty()) throw PreconditionError("prompt must be non-empty");
    thread_local std::mt19937_64 jitter_rng{std::random_device{}()};

    for (int attempt = 0;; ++attempt) {
        pace();
        acquire_slot();
        ++calls_;
        try {
            std::string response = backend_->send(prompt, config_);
            release_slot();
            return strip_trailing_newlines(std::move(response));
        } catch (const TransientFailure& e) {
            release_slot();
            if (attempt >= config_.retry_limit)
                throw TransportError("gave up after " + std::to_string(attempt + 1) +
                                     " attempts: " + e.what());
        } catch (...) {
            release_slot();
            throw;
        }
        auto base = config_.backoff_base.count();
        if (base > 0) {
            std::uniform_int_distribution<long long> jitter(0, base);
            auto delay = base * (1LL << std::min(attempt, 10)) + jitter(jitter_rng);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
    }
}

BatchResult Gateway::complete_batch(const std::vector<std::string>& prompts) {
    if (prompts.empty()) throw PreconditionError("batch must be non-empty");
    BatchResult result;
    result.responses.resize(prompts.size());
    std::vector<std::optional<BatchItemError>> errors(prompts.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next++;
            if (i >= prompts.size()) return;
            try {
                result.responses[i] = complete(prompts[i]);
            } catch (const AuthError& e) {
                errors[i] = BatchItemError{i, "auth", e.what()};
            } catch (const MockExhausted& e) {
                errors[i] = BatchItemError{i, "mock_exhausted", e.what()};
            } catch (const TransportError& e) {
                errors[i] = BatchItemError{i, "transport", e.what()};
            } catch (const std::exception& e) {
                errors[i] = BatchItemError{i, "error", e.what()};
            }
        }
    };

    std::size_t workers = std::min<std::size_t>(prompts.size(), config_.max_in_flight);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
        worker();
    }
    for (auto& e : errors)
        if (e) result.errors.push_back(std::move(*e));
    return result;
}

}  // namespace llmeval
