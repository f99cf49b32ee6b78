#include "doctest.h"

#include "builders.hpp"
#include "llmeval/gateway.hpp"
#include "llmeval/text_util.hpp"

#include "httplib.h"

#include <cstdlib>
#include <filesystem>
#include <thread>

using namespace llmeval;
using fixture::mock_gateway;

namespace {

Transcript transcript(std::initializer_list<std::pair<std::string, std::string>> pairs) {
    Transcript t;
    for (const auto& [p, r] : pairs) t.entries.push_back({p, r});
    return t;
}

}  // namespace

TEST_CASE("mock replays the recorded response") {
    auto gw = mock_gateway(transcript({{"P", "true"}}));
    CHECK(gw.complete("P") == "true");
}

TEST_CASE("mock past its last entry is exhausted") {
    auto gw = mock_gateway(transcript({{"P", "true"}}));
    gw.complete("P");
    CHECK_THROWS_AS(gw.complete("P"), MockExhausted);
}

TEST_CASE("mock serves equal prompts in recorded order") {
    auto gw = mock_gateway(transcript({{"A", "1"}, {"B", "2"}, {"A", "3"}}));
    CHECK(gw.complete("B") == "2");
    CHECK(gw.complete("A") == "1");
    CHECK(gw.complete("A") == "3");
}

TEST_CASE("strict mock requires the prompt at its cursor") {
    GatewayConfig cfg;
    Gateway gw(cfg, std::make_shared<MockBackend>(transcript({{"A", "1"}, {"B", "2"}}), true));
    CHECK_THROWS_AS(gw.complete("B"), MockExhausted);
}

TEST_CASE("empty prompt is a precondition failure") {
    auto gw = mock_gateway(transcript({{"P", "x"}}));
    CHECK_THROWS_AS(gw.complete(""), PreconditionError);
}

TEST_CASE("only trailing newlines are removed from responses") {
    auto gw = mock_gateway(transcript({{"P", "  spaced \n\n"}}));
    CHECK(gw.complete("P") == "  spaced ");
    CHECK(strip_trailing_newlines("a\r\n") == "a");
}

TEST_CASE("live backend without its key variable is an auth error") {
    GatewayConfig cfg;
    cfg.base_url = "http://127.0.0.1:9";
    cfg.api_key_env = "LLMEVAL_TEST_KEY_THAT_IS_NOT_SET";
    ::unsetenv(cfg.api_key_env.c_str());
    Gateway gw(cfg, std::make_shared<HttpBackend>());
    CHECK_THROWS_AS(gw.complete("hello"), AuthError);
}

TEST_CASE("batch responses align with prompts") {
    auto gw = mock_gateway(transcript({{"a", "1"}, {"b", "2"}, {"c", "3"}}));
    auto res = gw.complete_batch({"a", "b", "c"});
    REQUIRE(res.ok());
    REQUIRE(res.responses.size() == 3);
    CHECK(*res.responses[0] == "1");
    CHECK(*res.responses[1] == "2");
    CHECK(*res.responses[2] == "3");
}

TEST_CASE("empty batch is a precondition failure") {
    auto gw = mock_gateway(Transcript{});
    CHECK_THROWS_AS(gw.complete_batch({}), PreconditionError);
}

TEST_CASE("a failing item does not abort the batch") {
    Transcript t = transcript({{"a", "1"}});
    t.entries.push_back({"b", "", true});
    auto gw = mock_gateway(t);
    auto res = gw.complete_batch({"a", "b"});
    CHECK(*res.responses[0] == "1");
    CHECK_FALSE(res.responses[1].has_value());
    REQUIRE(res.errors.size() == 1);
    CHECK(res.errors[0].index == 1);
    CHECK(res.errors[0].kind == "transport");
}

TEST_CASE("transient failures are retried up to the limit") {
    int calls = 0;
    auto flaky = std::make_shared<CallbackBackend>([&](const std::string&) -> std::string {
        if (++calls < 3) throw TransientFailure("503");
        return "ok";
    });
    GatewayConfig cfg;
    cfg.backoff_base = std::chrono::milliseconds(0);
    cfg.retry_limit = 2;
    Gateway gw(cfg, flaky);
    CHECK(gw.complete("p") == "ok");
    CHECK(calls == 3);

    calls = 0;
    cfg.retry_limit = 1;
    Gateway strict(cfg, flaky);
    CHECK_THROWS_AS(strict.complete("p"), TransportError);
    CHECK(calls == 2);
}

TEST_CASE("in-flight requests never exceed the configured bound") {
    Transcript t;
    std::vector<std::string> prompts;
    for (int i = 0; i < 24; ++i) {
        prompts.push_back("p" + std::to_string(i));
        t.entries.push_back({prompts.back(), std::to_string(i)});
    }
    auto mock = std::make_shared<MockBackend>(t);
    mock->set_latency(std::chrono::milliseconds(5));
    GatewayConfig cfg;
    cfg.max_in_flight = 3;
    Gateway gw(cfg, mock);
    auto res = gw.complete_batch(prompts);
    CHECK(res.ok());
    CHECK(mock->max_observed_in_flight() <= 3);
    CHECK(mock->max_observed_in_flight() >= 2);
    for (int i = 0; i < 24; ++i) CHECK(*res.responses[i] == std::to_string(i));
}

TEST_CASE("config invariants") {
    GatewayConfig cfg;
    cfg.max_in_flight = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(GatewayConfig::from_json({{"decoding", "nucleus"}}), ConfigError);
    auto c = GatewayConfig::from_json({{"max_in_flight", 2}, {"timeout", 5}, {"wire", {{"endpoint", "/chat"}}}});
    CHECK(c.max_in_flight == 2);
    CHECK(c.timeout.count() == doctest::Approx(5.0));
    CHECK(c.wire.endpoint == "/chat");
}

TEST_CASE("prompt templates render every placeholder") {
    PromptTemplate t("t", "Hello {{name}}, {{name}} and {{other}}.");
    CHECK(t.placeholders() == std::set<std::string>{"name", "other"});
    CHECK(t.render({{"name", "A"}, {"other", "{{name}}"}}) == "Hello A, A and {{name}}.");
    CHECK_THROWS_AS(t.render({{"name", "A"}}), PreconditionError);
    CHECK_THROWS_AS(t.render({{"name", "A"}, {"other", "B"}, {"extra", "C"}}), PreconditionError);
    CHECK(t.checksum() == text::sha256_hex(t.body()));
}

TEST_CASE("shipped prompt templates have their fixed placeholder sets") {
    CHECK(load_prompt("leaderboard").placeholders() == std::set<std::string>{"table_latex"});
    CHECK(load_prompt("extraction").placeholders() == std::set<std::string>{"target_model", "table_latex"});
    CHECK(load_prompt("augmentation").placeholders() ==
          std::set<std::string>{"records", "table_latex", "context"});
    CHECK(load_prompt("description_knowledge").placeholders() == std::set<std::string>{"query"});
    CHECK(load_prompt("description_grounded").placeholders() == std::set<std::string>{"source_text", "query"});
    CHECK(load_prompt("categorize").placeholders() ==
          std::set<std::string>{"taxonomy", "dataset", "subset", "description"});
}

TEST_CASE("transcript round trip") {
    Transcript t = transcript({{"p\nwith newline", "r1"}, {"q", "r \"quoted\""}});
    t.entries.push_back({"z", "", true});
    CHECK(Transcript::parse(t.serialize()).entries == t.entries);

    auto bad = t.serialize();
    bad.replace(bad.find("\"r1\""), 4, "\"r2\"");
    CHECK(Transcript::parse(bad).entries[0].response == "r2");
    auto tampered = t.serialize();
    tampered.replace(tampered.find("\"q\""), 3, "\"Q\"");
    CHECK_THROWS_AS(Transcript::parse(tampered), SchemaError);
}

TEST_CASE("recording zero calls gives an empty transcript") {
    auto rec = std::make_shared<RecordingBackend>(std::make_shared<CallbackBackend>([](auto&) { return "x"; }));
    CHECK(rec->transcript().entries.empty());
    auto gw = mock_gateway(rec->transcript());
    CHECK_THROWS_AS(gw.complete("anything"), MockExhausted);
}

TEST_CASE("a session recorded against a stub server replays byte-identically") {
    httplib::Server server;
    int hits = 0;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = json::parse(req.body);
        CHECK(body["temperature"] == 0);
        CHECK(req.get_header_value("Authorization") == "Bearer secret");
        auto prompt = body["messages"][0]["content"].get<std::string>();
        json reply = {{"choices", {{{"message", {{"content", "echo:" + prompt + "\n"}}}}}}};
        ++hits;
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("LLMEVAL_TEST_STUB_KEY", "secret", 1);
    GatewayConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.api_key_env = "LLMEVAL_TEST_STUB_KEY";
    cfg.max_in_flight = 2;
    auto rec = std::make_shared<RecordingBackend>(std::make_shared<HttpBackend>());
    std::vector<std::string> live;
    {
        Gateway gw(cfg, rec);
        for (int i = 0; i < 5; ++i) live.push_back(gw.complete("prompt " + std::to_string(i)));
    }
    server.stop();
    th.join();
    CHECK(hits == 5);

    auto path = std::filesystem::temp_directory_path() / "llmeval_stub_transcript.jsonl";
    rec->transcript().save(path);
    auto replay = mock_gateway(Transcript::load(path));
    for (int i = 0; i < 5; ++i) CHECK(replay.complete("prompt " + std::to_string(i)) == live[i]);
    CHECK(live[0] == "echo:prompt 0");
    auto again = std::filesystem::temp_directory_path() / "llmeval_stub_transcript2.jsonl";
    Transcript::load(path).save(again);
    CHECK(text::read_file(path) == text::read_file(again));
}
