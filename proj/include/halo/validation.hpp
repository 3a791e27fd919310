#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "halo/backend.hpp"
#include "halo/prompts.hpp"
#include "halo/retrieval.hpp"
#include "halo/scoring.hpp"
#include "halo/text.hpp"

namespace halo {

enum class QuestionType { yes_no, wh };

inline std::string_view to_string(QuestionType q) {
  return q == QuestionType::yes_no ? "yes_no" : "wh";
}

struct ValidationQuestion {
  Concept concept_span;
  std::string question;
  QuestionType qtype = QuestionType::yes_no;
};

enum class VerdictAnswer { yes, no, unparseable };

inline std::string_view to_string(VerdictAnswer v) {
  switch (v) {
    case VerdictAnswer::yes: return "yes";
    case VerdictAnswer::no: return "no";
    case VerdictAnswer::unparseable: return "unparseable";
  }
  return "unparseable";
}

struct Verdict {
  VerdictAnswer answer = VerdictAnswer::unparseable;
  std::string raw_reply;
};

// Total mapping from a free-form reply to a verdict: the first alphabetic
// token decides, anything else is unparseable.
inline Verdict parse_verdict(std::string_view reply) {
  Verdict v;
  v.raw_reply = std::string(reply);
  std::size_t i = 0;
  while (i < reply.size() && !std::isalpha(static_cast<unsigned char>(reply[i])))
    ++i;
  std::size_t j = i;
  while (j < reply.size() && std::isalpha(static_cast<unsigned char>(reply[j])))
    ++j;
  std::string_view token = reply.substr(i, j - i);
  if (text::iequals(token, "yes"))
    v.answer = VerdictAnswer::yes;
  else if (text::iequals(token, "no"))
    v.answer = VerdictAnswer::no;
  return v;
}

struct ConceptValidation {
  ValidationQuestion question;
  std::vector<Evidence> evidence;
  Verdict verdict;
  // Generated only when Wh mode is on; recorded, never verified.
  std::optional<std::string> wh_question;
};

struct ValidationOutcome {
  std::vector<ConceptValidation> per_concept;
  bool hallucination_detected = false;
  std::optional<Concept> failing_concept;
};

// Ask the backend for a question testing the concept. The reply's first line
// becomes the question; a blank reply raises EmptyQuestion.
inline ValidationQuestion make_validation_question(
    const CompletionBackend& backend, std::string_view sentence,
    std::string_view topic, const Concept& concept_span,
    QuestionType qtype = QuestionType::yes_no,
    const GenerationParams& params = {}) {
  GenerationParams p = params;
  p.logprobs_requested = false;
  Completion reply = backend.complete(
      prompts::validation_question_prompt(sentence, topic, concept_span.text,
                                          qtype == QuestionType::wh),
      p);
  std::string question = text::first_line(reply.text);
  if (question.empty())
    throw EmptyQuestion("backend returned a blank validation question for '" +
                        concept_span.text + "'");
  return {concept_span, std::move(question), qtype};
}

// Answer a Yes/No validation question against the evidence block.
inline Verdict answer_validation(const CompletionBackend& backend,
                                 const ValidationQuestion& q,
                                 const std::vector<Evidence>& evidence,
                                 std::string_view topic,
                                 const GenerationParams& params = {}) {
  std::vector<std::string> snippets;
  snippets.reserve(evidence.size());
  for (const Evidence& e : evidence) snippets.push_back(e.text);
  GenerationParams p = params;
  p.logprobs_requested = false;
  Completion reply = backend.complete(
      prompts::answer_validation_prompt(prompts::evidence_block(snippets),
                                        topic, q.question),
      p);
  return parse_verdict(reply.text);
}

namespace detail {

inline bool verdict_fails(const Verdict& v, const DetectionPolicy& policy) {
  if (v.answer == VerdictAnswer::no) return true;
  return v.answer == VerdictAnswer::unparseable && policy.strict;
}

}  // namespace detail

// Sequential greedy validation: walk the concepts in the given order
// (ascending uncertainty, from select_uncertain), question each, retrieve
// evidence, and answer. The walk stops at the first failing concept; its
// evidence is what the mitigation stage will see. Under a strict policy an
// empty retrieval also fails the concept — an unverifiable claim is treated
// as a potential hallucination — and no answer call is made for it.
inline ValidationOutcome validate_sentence(
    const CompletionBackend& backend, const Retriever& retriever,
    std::string_view sentence, std::string_view topic,
    const std::vector<ConceptScore>& ordered_concepts,
    const RetrievalConfig& retrieval, const DetectionPolicy& policy,
    const GenerationParams& params = {}, bool generate_wh_questions = false) {
  ValidationOutcome outcome;
  for (const ConceptScore& cs : ordered_concepts) {
    ConceptValidation cv;
    cv.question = make_validation_question(backend, sentence, topic,
                                           cs.concept_span,
                                           QuestionType::yes_no, params);
    if (generate_wh_questions) {
      cv.wh_question = make_validation_question(backend, sentence, topic,
                                                cs.concept_span,
                                                QuestionType::wh, params)
                           .question;
    }
    cv.evidence = retriever.retrieve(cv.question.question, retrieval);

    bool failed;
    if (cv.evidence.empty() && policy.strict) {
      cv.verdict = Verdict{VerdictAnswer::unparseable, ""};
      failed = true;
    } else {
      cv.verdict = answer_validation(backend, cv.question, cv.evidence, topic,
                                     params);
      failed = detail::verdict_fails(cv.verdict, policy);
    }
    outcome.per_concept.push_back(std::move(cv));
    if (failed) {
      outcome.hallucination_detected = true;
      outcome.failing_concept = cs.concept_span;
      break;
    }
  }
  return outcome;
}

}  // namespace halo
