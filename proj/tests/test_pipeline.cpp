#include <catch2/catch_amalgamated.hpp>

#include "halo/pipeline.hpp"
#include "halo/retrieval.hpp"
#include "halo/serialize.hpp"
#include "helpers.hpp"

using halo::ConceptMethod;
using halo::GenerationReport;
using halo::LocalCorpus;
using halo::PipelineConfig;
using halo::RetrievalMode;
using halo::Retriever;
using halo::run_article;
using halo::ScriptedBackend;

namespace {

const std::string kFixtureDir =
    std::string(HALO_SOURCE_DIR) + "/fixtures/article_basic";

PipelineConfig fixture_config() {
  PipelineConfig config;
  config.num_sentences = 3;
  config.concept_method = ConceptMethod::model_instruction;
  config.policy.threshold = 0.5;
  config.retrieval.mode = RetrievalMode::local_corpus;
  config.retrieval.top_k = 1;
  return config;
}

Retriever fixture_retriever() {
  Retriever retriever;
  retriever.set_corpus(LocalCorpus::from_path(kFixtureDir + "/corpus.jsonl"));
  return retriever;
}

const std::string kInstr =
    "Identify all the important keyphrases from the above sentence and "
    "return a comma separated list";
const std::string kRepairInstr =
    "The above sentence has information that can not be verified from the "
    "provided evidence, repair that incorrect information and create a new "
    "sentence based on the provided evidence.";

}  // namespace

TEST_CASE("a seeded false fact is detected, repaired, and course-corrected") {
  ScriptedBackend scripted =
      ScriptedBackend::from_file(kFixtureDir + "/script.json");
  halo::testing::RecordingBackend backend(scripted);
  Retriever retriever = fixture_retriever();

  GenerationReport report =
      run_article(backend, retriever, "John Russell Reynolds",
                  fixture_config());

  REQUIRE(report.traces.size() == 3);

  SECTION("sentence one and three pass clean") {
    for (int i : {0, 2}) {
      const auto& trace = report.traces[static_cast<std::size_t>(i)];
      CHECK_FALSE(trace.validation.hallucination_detected);
      CHECK_FALSE(trace.repair.has_value());
      CHECK(trace.accepted_sentence == trace.raw_sentence);
      CHECK(trace.validation.per_concept.empty());  // nothing was uncertain
    }
  }

  SECTION("the seeded sentence is flagged on its uncertain concept") {
    const auto& trace = report.traces[1];
    CHECK(trace.raw_sentence == "He was born in London in 1820.");
    CHECK(trace.validation.hallucination_detected);
    REQUIRE(trace.validation.failing_concept.has_value());
    CHECK(trace.validation.failing_concept->text == "London");

    REQUIRE(trace.concepts.size() == 2);
    CHECK(trace.concepts[0].concept_span.text == "London");
    CHECK(*trace.concepts[0].score == Catch::Approx(0.2));
    CHECK(trace.concepts[1].concept_span.text == "1820");
    CHECK(*trace.concepts[1].score == Catch::Approx(0.9));

    // only London fell below the threshold, so only it was validated
    REQUIRE(trace.validation.per_concept.size() == 1);
    const auto& cv = trace.validation.per_concept[0];
    CHECK(cv.question.question == "Was John Russell Reynolds born in London?");
    REQUIRE(cv.evidence.size() == 1);
    CHECK(cv.evidence[0].locator == "reynolds-bio");
    CHECK(cv.verdict.answer == halo::VerdictAnswer::no);

    REQUIRE(trace.repair.has_value());
    CHECK(trace.repair->changed);
    CHECK(trace.accepted_sentence ==
          "He was born in Romsey, England in 1828.");
    CHECK(trace.repair->evidence_used[0].text == cv.evidence[0].text);
  }

  SECTION("the repaired sentence feeds the next generation prompt") {
    std::vector<std::string> prompts = backend.prompts();
    // hand-assembled expectation for the third generation call
    const std::string expected =
        "Write an article about John Russell Reynolds\n"
        "John Russell Reynolds was an English physician. "
        "He was born in Romsey, England in 1828.";
    CHECK(std::find(prompts.begin(), prompts.end(), expected) != prompts.end());

    // the raw hallucinated sentence may appear in extraction, question,
    // and repair prompts, but never in a generation prompt
    for (const std::string& p : prompts) {
      if (p.find("born in London in 1820") == std::string::npos) continue;
      bool extraction = p.find(kInstr) != std::string::npos;
      bool questioning =
          p.find("generate a yes/no question") != std::string::npos;
      bool repairing =
          p.find("repair that incorrect information") != std::string::npos;
      CHECK((extraction || questioning || repairing));
    }
  }

  SECTION("final text joins accepted sentences with single spaces") {
    CHECK(report.final_text ==
          "John Russell Reynolds was an English physician. "
          "He was born in Romsey, England in 1828. "
          "He studied medicine at the University of London.");
  }

  SECTION("every backend call belongs to exactly one trace") {
    // 3 generations + 3 extractions + 1 question + 1 answer + 1 repair
    CHECK(backend.prompts().size() == 9);
    std::size_t validations = 0, repairs = 0, detections = 0;
    for (const auto& trace : report.traces) {
      validations += trace.validation.per_concept.size();
      repairs += trace.repair.has_value() ? 1 : 0;
      detections += trace.validation.hallucination_detected ? 1 : 0;
    }
    CHECK(validations == 1);
    CHECK(repairs == 1);
    CHECK(detections == 1);
    CHECK(repairs <= detections);
    CHECK(detections <= 3);
  }
}

TEST_CASE("identical scripts and config replay byte-identically") {
  auto run_once = [&]() {
    ScriptedBackend backend =
        ScriptedBackend::from_file(kFixtureDir + "/script.json");
    Retriever retriever = fixture_retriever();
    GenerationReport report = run_article(
        backend, retriever, "John Russell Reynolds", fixture_config());
    return halo::to_json(report).dump(2);
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("detection is recorded but not applied when mitigation is off") {
  ScriptedBackend backend;
  backend.add_entry(
      "Write an article about T",
      halo::testing::entry_with_tokens(
          "Paris is in Germany.", {{"Paris", 0.9},
                                   {" is", 0.9},
                                   {" in", 0.9},
                                   {" Germany", 0.1},
                                   {".", 0.99}}));
  backend.add_reply("Write an article about T\nParis is in Germany.\n" + kInstr,
                    "Paris, Germany");
  backend.add_reply(
      "Paris is in Germany.\nFor the above sentence about T, generate a "
      "yes/no question that tests the correctness of Germany.",
      "Is Paris in Germany?");
  backend.add_reply(
      "Paris is in France. Answer the below question about T in Yes or No "
      "based on the above context. Is Paris in Germany?",
      "No, Paris is in France.");

  LocalCorpus corpus;
  corpus.add_document("geo", "Paris is in France.");
  Retriever retriever;
  retriever.set_corpus(std::move(corpus));

  PipelineConfig config = fixture_config();
  config.num_sentences = 1;
  config.mitigation_enabled = false;

  GenerationReport report = run_article(backend, retriever, "T", config);
  REQUIRE(report.traces.size() == 1);
  CHECK(report.traces[0].validation.hallucination_detected);
  CHECK_FALSE(report.traces[0].repair.has_value());
  CHECK(report.traces[0].accepted_sentence == "Paris is in Germany.");
  CHECK(report.final_text == "Paris is in Germany.");
}

TEST_CASE("optional revalidation round runs on the repaired sentence") {
  ScriptedBackend backend;
  backend.add_entry(
      "Write an article about T",
      halo::testing::entry_with_tokens(
          "Paris is in Germany.", {{"Paris", 0.9},
                                   {" is", 0.9},
                                   {" in", 0.9},
                                   {" Germany", 0.1},
                                   {".", 0.99}}));
  backend.add_reply("Write an article about T\nParis is in Germany.\n" + kInstr,
                    "Paris, Germany");
  backend.add_reply(
      "Paris is in Germany.\nFor the above sentence about T, generate a "
      "yes/no question that tests the correctness of Germany.",
      "Is Paris in Germany?");
  backend.add_reply(
      "Paris is in France. Answer the below question about T in Yes or No "
      "based on the above context. Is Paris in Germany?",
      "No, Paris is in France.");
  backend.add_reply("Paris is in France.\nParis is in Germany.\n" +
                        kRepairInstr,
                    "Paris is in France.");
  backend.add_reply("Write an article about T\nParis is in France.\n" + kInstr,
                    "");

  LocalCorpus corpus;
  corpus.add_document("geo", "Paris is in France.");
  Retriever retriever;
  retriever.set_corpus(std::move(corpus));

  PipelineConfig config = fixture_config();
  config.num_sentences = 1;
  config.revalidate_after_repair = true;

  GenerationReport report = run_article(backend, retriever, "T", config);
  REQUIRE(report.traces.size() == 1);
  CHECK(report.traces[0].accepted_sentence == "Paris is in France.");
  REQUIRE(report.traces[0].revalidation.has_value());
  CHECK_FALSE(report.traces[0].revalidation->hallucination_detected);
}

TEST_CASE("a blank repair falls back to the original sentence") {
  ScriptedBackend backend;
  backend.add_entry(
      "Write an article about T",
      halo::testing::entry_with_tokens(
          "Paris is in Germany.", {{"Paris", 0.9},
                                   {" is", 0.9},
                                   {" in", 0.9},
                                   {" Germany", 0.1},
                                   {".", 0.99}}));
  backend.add_reply("Write an article about T\nParis is in Germany.\n" + kInstr,
                    "Paris, Germany");
  backend.add_reply(
      "Paris is in Germany.\nFor the above sentence about T, generate a "
      "yes/no question that tests the correctness of Germany.",
      "Is Paris in Germany?");
  backend.add_reply(
      "Paris is in France. Answer the below question about T in Yes or No "
      "based on the above context. Is Paris in Germany?",
      "No, Paris is in France.");
  backend.add_entry("Paris is in France.\nParis is in Germany.\n" +
                        kRepairInstr,
                    halo::testing::entry_with_tokens("  ", {{"  ", 1.0}}));

  LocalCorpus corpus;
  corpus.add_document("geo", "Paris is in France.");
  Retriever retriever;
  retriever.set_corpus(std::move(corpus));

  PipelineConfig config = fixture_config();
  config.num_sentences = 1;

  std::vector<std::string> warnings;
  auto previous = halo::warning_handler();
  halo::warning_handler() = [&](const std::string& msg) {
    warnings.push_back(msg);
  };
  GenerationReport report = run_article(backend, retriever, "T", config);
  halo::warning_handler() = previous;

  REQUIRE(report.traces.size() == 1);
  CHECK(report.traces[0].validation.hallucination_detected);
  CHECK_FALSE(report.traces[0].repair.has_value());
  CHECK(report.traces[0].accepted_sentence == "Paris is in Germany.");
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("clean runs pass sentences through untouched") {
  ScriptedBackend backend;
  backend.add_entry("Write an article about T2",
                    halo::testing::entry_with_tokens(
                        "Rome is in Italy. It",
                        halo::testing::tokens_with_probability(
                            "Rome is in Italy. It", 0.9)));
  backend.add_reply("Write an article about T2\nRome is in Italy.\n" + kInstr,
                    "Rome, Italy");
  backend.add_entry("Write an article about T2\nRome is in Italy.",
                    halo::testing::entry_with_tokens(
                        " It is old.", halo::testing::tokens_with_probability(
                                           " It is old.", 0.9)));
  backend.add_reply(
      "Write an article about T2\nRome is in Italy.\nIt is old.\n" + kInstr,
      "");

  Retriever retriever;
  PipelineConfig config = fixture_config();
  config.num_sentences = 2;

  GenerationReport report = run_article(backend, retriever, "T2", config);
  REQUIRE(report.traces.size() == 2);
  for (const auto& trace : report.traces) {
    CHECK_FALSE(trace.validation.hallucination_detected);
    CHECK_FALSE(trace.repair.has_value());
    CHECK(trace.accepted_sentence == trace.raw_sentence);
  }
  CHECK(report.final_text == "Rome is in Italy. It is old.");
}

TEST_CASE("a fragment without a boundary stops the run and is not accepted") {
  ScriptedBackend backend;
  backend.add_entry("Write an article about T3",
                    halo::testing::entry_with_tokens(
                        "John Russell Reynolds was",
                        halo::testing::tokens_with_probability(
                            "John Russell Reynolds was", 0.9)));
  Retriever retriever;
  PipelineConfig config = fixture_config();

  GenerationReport report = run_article(backend, retriever, "T3", config);
  REQUIRE(report.traces.size() == 1);
  CHECK_FALSE(report.traces[0].segmentation_complete);
  CHECK(report.traces[0].raw_sentence == "John Russell Reynolds was");
  CHECK(report.traces[0].accepted_sentence.empty());
  CHECK(report.final_text.empty());
}

TEST_CASE("an empty completion means the backend stopped") {
  ScriptedBackend backend;
  backend.add_entry("Write an article about T4",
                    halo::testing::entry_with_tokens("", {}));
  Retriever retriever;
  GenerationReport report =
      run_article(backend, retriever, "T4", fixture_config());
  CHECK(report.traces.empty());
  CHECK(report.final_text.empty());
}

TEST_CASE("backend errors carry the partial report") {
  ScriptedBackend backend;
  backend.add_entry("Write an article about T5",
                    halo::testing::entry_with_tokens(
                        "A fact is here.", halo::testing::tokens_with_probability(
                                               "A fact is here.", 0.9)));
  backend.add_reply("Write an article about T5\nA fact is here.\n" + kInstr,
                    "");
  // no script entry for the second generation call

  Retriever retriever;
  PipelineConfig config = fixture_config();
  config.num_sentences = 2;

  try {
    run_article(backend, retriever, "T5", config);
    FAIL("expected PipelineRunError");
  } catch (const halo::PipelineRunError& e) {
    CHECK(e.partial.traces.size() == 1);
    CHECK(e.partial.final_text == "A fact is here.");
    // the original failure is preserved underneath
    bool nested_script_exhausted = false;
    try {
      std::rethrow_if_nested(e);
    } catch (const halo::ScriptExhausted&) {
      nested_script_exhausted = true;
    } catch (...) {
    }
    CHECK(nested_script_exhausted);
  }
}
