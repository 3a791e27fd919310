#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "halo/backend.hpp"
#include "halo/retrieval.hpp"

using halo::GenerationParams;
using halo::HttpBackend;
using halo::HttpBackendConfig;

namespace {

// Serves canned JSON on a loopback port for the duration of a test.
class TestServer {
 public:
  TestServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this]() { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("http backend round-trips a completion with logprobs") {
  TestServer server;
  nlohmann::json captured_request;
  server.server().Post(
      "/v1/completions",
      [&](const httplib::Request& req, httplib::Response& res) {
        captured_request = nlohmann::json::parse(req.body);
        nlohmann::json reply = {
            {"choices",
             {{{"text", "Hello world"},
               {"finish_reason", "stop"},
               {"logprobs",
                {{"tokens", {"Hello", " world"}},
                 {"token_logprobs", {-0.693147, -0.105361}}}}}}}};
        res.set_content(reply.dump(), "application/json");
      });

  HttpBackendConfig config;
  config.base_url = server.base_url();
  HttpBackend backend(config);

  GenerationParams params;
  params.max_tokens = 32;
  params.temperature = 0.0;
  halo::Completion c = backend.complete("Write an article about X", params);

  CHECK(c.text == "Hello world");
  CHECK(c.finish_reason == halo::FinishReason::stop);
  REQUIRE(c.tokens.size() == 2);
  CHECK(c.tokens[0].token_text == "Hello");
  CHECK(c.tokens[0].probability == Catch::Approx(0.5).margin(1e-6));
  CHECK(c.tokens[1].probability == Catch::Approx(0.9).margin(1e-6));

  // the request carried the decoding configuration and the logprobs flag
  CHECK(captured_request["prompt"] == "Write an article about X");
  CHECK(captured_request["max_tokens"] == 32);
  CHECK(captured_request["temperature"] == 0.0);
  CHECK(captured_request["logprobs"] == true);
}

TEST_CASE("missing logprobs on request is a malformed response") {
  TestServer server;
  server.server().Post(
      "/v1/completions", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices": [{"text": "Hi"}]})", "application/json");
      });

  HttpBackendConfig config;
  config.base_url = server.base_url();
  HttpBackend backend(config);

  GenerationParams with_logprobs;
  CHECK_THROWS_AS(backend.complete("P", with_logprobs),
                  halo::MalformedResponse);

  GenerationParams without;
  without.logprobs_requested = false;
  CHECK(backend.complete("P", without).text == "Hi");
}

TEST_CASE("http failures surface as BackendUnreachable") {
  HttpBackendConfig config;
  config.base_url = "http://127.0.0.1:1";  // nothing listens here
  config.timeout_seconds = 1;
  HttpBackend backend(config);
  CHECK_THROWS_AS(backend.complete("P", {}), halo::BackendUnreachable);

  TestServer server;
  server.server().Post(
      "/v1/completions", [](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
      });
  HttpBackendConfig cfg2;
  cfg2.base_url = server.base_url();
  HttpBackend backend2(cfg2);
  CHECK_THROWS_AS(backend2.complete("P", {}), halo::BackendUnreachable);
}

TEST_CASE("the API key from the environment rides the auth header") {
  TestServer server;
  std::string seen_auth;
  server.server().Post(
      "/v1/completions",
      [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices": [{"text": "ok"}]})", "application/json");
      });

  setenv("HALO_LLM_API_KEY", "secret-token", 1);
  HttpBackendConfig config;
  config.base_url = server.base_url();
  HttpBackend backend(config);  // key is read at construction
  unsetenv("HALO_LLM_API_KEY");

  GenerationParams params;
  params.logprobs_requested = false;
  backend.complete("P", params);
  CHECK(seen_auth == "Bearer secret-token");
}

TEST_CASE("token text mismatches are rejected") {
  CHECK_THROWS_AS(
      HttpBackend::parse_completion(
          R"({"choices": [{"text": "Hello",
                           "logprobs": {"tokens": ["Bye"],
                                        "token_logprobs": [-0.1]}}]})",
          true),
      halo::MalformedResponse);
  CHECK_THROWS_AS(HttpBackend::parse_completion("not json", false),
                  halo::MalformedResponse);
  CHECK_THROWS_AS(HttpBackend::parse_completion(R"({"choices": []})", false),
                  halo::MalformedResponse);
}

// ---------------------------------------------------------------------------
// Web search client
// ---------------------------------------------------------------------------

TEST_CASE("web search maps result snippets to evidence") {
  TestServer server;
  std::string seen_query, seen_key;
  server.server().Get(
      "/search", [&](const httplib::Request& req, httplib::Response& res) {
        seen_query = req.get_param_value("q");
        seen_key = req.get_header_value("Ocp-Apim-Subscription-Key");
        nlohmann::json reply = {
            {"webPages",
             {{"value",
               {{{"snippet", "Reynolds was born in Romsey in 1828."},
                 {"url", "https://example.org/reynolds"}},
                {{"snippet", std::string(2000, 'x')},
                 {"url", "https://example.org/long"}},
                {{"snippet", "A third result."},
                 {"url", "https://example.org/three"}}}}}}};
        res.set_content(reply.dump(), "application/json");
      });

  setenv("HALO_SEARCH_API_KEY", "search-secret", 1);
  halo::WebSearchConfig config;
  config.base_url = server.base_url();
  halo::WebSearchClient client(config);
  unsetenv("HALO_SEARCH_API_KEY");

  auto evidence = client.search("Was Reynolds born in London?", 2, 100);
  REQUIRE(evidence.size() == 2);
  CHECK(evidence[0].text == "Reynolds was born in Romsey in 1828.");
  CHECK(evidence[0].locator == "https://example.org/reynolds");
  CHECK(evidence[0].source == halo::RetrievalMode::web_search);
  CHECK(evidence[1].text.size() == 100);  // clipped to max_snippet_chars
  CHECK(seen_query == "Was Reynolds born in London?");
  CHECK(seen_key == "search-secret");
}

TEST_CASE("web search tolerates empty and missing result lists") {
  TestServer server;
  server.server().Get("/search",
                      [](const httplib::Request&, httplib::Response& res) {
                        res.set_content(R"({"webPages": {"value": []}})",
                                        "application/json");
                      });
  server.server().Get("/other",
                      [](const httplib::Request&, httplib::Response& res) {
                        res.set_content(R"({"unexpected": true})",
                                        "application/json");
                      });

  halo::WebSearchConfig config;
  config.base_url = server.base_url();
  CHECK(halo::WebSearchClient(config).search("q", 3, 100).empty());

  config.search_path = "/other";
  CHECK(halo::WebSearchClient(config).search("q", 3, 100).empty());
}

TEST_CASE("search failures surface as SearchUnreachable") {
  halo::WebSearchConfig config;
  config.base_url = "http://127.0.0.1:1";
  config.timeout_seconds = 1;
  CHECK_THROWS_AS(halo::WebSearchClient(config).search("q", 1, 10),
                  halo::SearchUnreachable);
}

TEST_CASE("custom field paths select different response shapes") {
  TestServer server;
  server.server().Get(
      "/api", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(
            R"({"results": [{"body": "snippet text", "link": "https://a"}]})",
            "application/json");
      });

  halo::WebSearchConfig config;
  config.base_url = server.base_url();
  config.search_path = "/api";
  config.results_path = "results";
  config.snippet_field = "body";
  config.url_field = "link";

  auto evidence = halo::WebSearchClient(config).search("q", 3, 100);
  REQUIRE(evidence.size() == 1);
  CHECK(evidence[0].text == "snippet text");
  CHECK(evidence[0].locator == "https://a");
}
