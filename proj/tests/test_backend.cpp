#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "halo/backend.hpp"
#include "helpers.hpp"

using halo::Completion;
using halo::GenerationParams;
using halo::ScriptedBackend;

TEST_CASE("scripted backend replays a registered entry verbatim") {
  ScriptedBackend backend;
  backend.add_entry("P", halo::testing::entry_with_tokens("Hello",
                                                          {{"Hello", 1.0}}));
  Completion c = backend.complete("P", {});
  CHECK(c.text == "Hello");
  REQUIRE(c.tokens.size() == 1);
  CHECK(c.tokens[0].token_text == "Hello");
  CHECK(c.tokens[0].probability == 1.0);
  CHECK(c.finish_reason == halo::FinishReason::stop);
}

TEST_CASE("log-probability conversion recovers the softmax probability") {
  // exp(-0.693147) = 0.50000009027998... (high-precision value)
  CHECK(halo::probability_from_logprob(-0.693147) ==
        Catch::Approx(0.5).margin(1e-6));
  CHECK(halo::probability_from_logprob(0.0) == 1.0);

  SECTION("bounded and monotone") {
    double previous = -1.0;
    for (double lp = -30.0; lp <= 1.0; lp += 0.25) {
      double p = halo::probability_from_logprob(lp);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      CHECK(p >= previous);
      previous = p;
    }
  }
}

TEST_CASE("unregistered prompts exhaust the script") {
  ScriptedBackend backend;
  backend.add_reply("known", "ok");
  CHECK_THROWS_AS(backend.complete("unknown", {}), halo::ScriptExhausted);

  // a key is also exhausted once its queue is drained
  CHECK(backend.complete("known", {}).text == "ok");
  CHECK_THROWS_AS(backend.complete("known", {}), halo::ScriptExhausted);
}

TEST_CASE("prompt keys ignore trailing whitespace") {
  ScriptedBackend backend;
  backend.add_reply("P", "one");
  CHECK(backend.complete("P \n\t ", {}).text == "one");
}

TEST_CASE("colliding entries are consumed in registration order") {
  ScriptedBackend backend;
  backend.add_reply("P", "first");
  backend.add_reply("P", "second");
  CHECK(backend.complete("P", {}).text == "first");
  CHECK(backend.complete("P", {}).text == "second");
}

TEST_CASE("scripted replay is deterministic across instances") {
  nlohmann::json entry;
  entry["prompt"] = "P";
  entry["text"] = "Hello world";
  entry["tokens"] = nlohmann::json::array(
      {nlohmann::json::array({"Hello", 0.25}),
       nlohmann::json::array({" world", 0.75})});
  nlohmann::json script = nlohmann::json::array({entry});
  Completion a = ScriptedBackend::from_json(script).complete("P", {});
  Completion b = ScriptedBackend::from_json(script).complete("P", {});
  CHECK(a.text == b.text);
  REQUIRE(a.tokens.size() == b.tokens.size());
  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    CHECK(a.tokens[i].token_text == b.tokens[i].token_text);
    CHECK(a.tokens[i].probability == b.tokens[i].probability);
  }
}

TEST_CASE("token texts concatenate to the completion text") {
  ScriptedBackend backend;
  std::vector<std::string> texts = {
      "one token", "a few more tokens here",
      "Trailing punctuation, too. And a second sentence."};
  for (std::size_t i = 0; i < texts.size(); ++i) {
    backend.add_entry("p" + std::to_string(i),
                      halo::testing::entry_with_tokens(
                          texts[i],
                          halo::testing::tokens_with_probability(texts[i], 0.5)));
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Completion c = backend.complete("p" + std::to_string(i), {});
    std::size_t total = 0;
    for (const auto& t : c.tokens) {
      total += t.token_text.size();
      CHECK(t.probability >= 0.0);
      CHECK(t.probability <= 1.0);
    }
    CHECK(total == c.text.size());
  }
}

TEST_CASE("mismatched scripted tokens are rejected at registration") {
  ScriptedBackend backend;
  CHECK_THROWS_AS(
      backend.add_entry("P", halo::testing::entry_with_tokens(
                                 "Hello", {{"Bye", 1.0}})),
      halo::MalformedResponse);
  CHECK_THROWS_AS(
      backend.add_entry("P", halo::testing::entry_with_tokens(
                                 "Hi", {{"Hi", 1.5}})),
      halo::MalformedResponse);
}

TEST_CASE("tokens are stripped when logprobs are not requested") {
  ScriptedBackend backend;
  backend.add_reply("P", "Hello");
  GenerationParams params;
  params.logprobs_requested = false;
  Completion c = backend.complete("P", params);
  CHECK(c.text == "Hello");
  CHECK(c.tokens.empty());
}

TEST_CASE("generation parameters are validated") {
  ScriptedBackend backend;
  backend.add_reply("P", "x");
  GenerationParams params;
  params.max_tokens = 0;
  CHECK_THROWS_AS(backend.complete("P", params), halo::ConfigError);
  params.max_tokens = 16;
  params.temperature = -1.0;
  CHECK_THROWS_AS(backend.complete("P", params), halo::ConfigError);
  params.temperature = std::nan("");
  CHECK_THROWS_AS(backend.complete("P", params), halo::ConfigError);
}
