#pragma once

#include <json.hpp>

#include "halo/evaluation.hpp"
#include "halo/pipeline.hpp"
#include "halo/tasks.hpp"

// JSON views of reports and metrics. nlohmann::json keeps object keys
// sorted, so identical inputs serialize to identical bytes.

namespace halo {

inline nlohmann::json to_json(const Span& s) {
  return nlohmann::json::array({s.begin, s.end});
}

inline nlohmann::json to_json(const Concept& c) {
  nlohmann::json out = {{"text", c.text},
                        {"char_range", to_json(c.char_range)},
                        {"source", std::string(to_string(c.source))}};
  out["token_range"] =
      c.token_range ? to_json(*c.token_range) : nlohmann::json(nullptr);
  return out;
}

inline nlohmann::json to_json(const ConceptScore& cs) {
  nlohmann::json out = {{"concept", to_json(cs.concept_span)},
                        {"token_probs", cs.token_probs},
                        {"method", std::string(to_string(cs.method))}};
  out["score"] = cs.score ? nlohmann::json(*cs.score) : nlohmann::json(nullptr);
  return out;
}

inline nlohmann::json to_json(const Evidence& e) {
  return {{"text", e.text},
          {"source", std::string(to_string(e.source))},
          {"locator", e.locator}};
}

inline nlohmann::json to_json(const std::vector<Evidence>& evidence) {
  nlohmann::json out = nlohmann::json::array();
  for (const Evidence& e : evidence) out.push_back(to_json(e));
  return out;
}

inline nlohmann::json to_json(const Verdict& v) {
  return {{"answer", std::string(to_string(v.answer))},
          {"raw_reply", v.raw_reply}};
}

inline nlohmann::json to_json(const ValidationOutcome& outcome) {
  nlohmann::json per_concept = nlohmann::json::array();
  for (const ConceptValidation& cv : outcome.per_concept) {
    nlohmann::json item = {{"concept", cv.question.concept_span.text},
                           {"question", cv.question.question},
                           {"qtype", std::string(to_string(cv.question.qtype))},
                           {"evidence", to_json(cv.evidence)},
                           {"verdict", to_json(cv.verdict)}};
    item["wh_question"] = cv.wh_question ? nlohmann::json(*cv.wh_question)
                                         : nlohmann::json(nullptr);
    per_concept.push_back(std::move(item));
  }
  nlohmann::json out = {{"hallucination_detected", outcome.hallucination_detected},
                        {"per_concept", std::move(per_concept)}};
  out["failing_concept"] = outcome.failing_concept
                               ? nlohmann::json(outcome.failing_concept->text)
                               : nlohmann::json(nullptr);
  return out;
}

inline nlohmann::json to_json(const RepairResult& r) {
  return {{"original", r.original},
          {"repaired", r.repaired},
          {"evidence_used", to_json(r.evidence_used)},
          {"changed", r.changed}};
}

inline nlohmann::json to_json(const SentenceTrace& t) {
  nlohmann::json concepts = nlohmann::json::array();
  for (const ConceptScore& cs : t.concepts) concepts.push_back(to_json(cs));
  nlohmann::json out = {{"index", t.index},
                        {"raw_sentence", t.raw_sentence},
                        {"segmentation_complete", t.segmentation_complete},
                        {"concepts", std::move(concepts)},
                        {"validation", to_json(t.validation)},
                        {"accepted_sentence", t.accepted_sentence}};
  out["repair"] = t.repair ? to_json(*t.repair) : nlohmann::json(nullptr);
  out["revalidation"] =
      t.revalidation ? to_json(*t.revalidation) : nlohmann::json(nullptr);
  return out;
}

inline nlohmann::json to_json(const GenerationReport& r) {
  nlohmann::json traces = nlohmann::json::array();
  for (const SentenceTrace& t : r.traces) traces.push_back(to_json(t));
  return {{"schema", "halo-report/1"},
          {"topic", r.topic},
          {"traces", std::move(traces)},
          {"final_text", r.final_text}};
}

inline nlohmann::json to_json(const MultiHopResult& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const SentenceTrace& t : r.steps) steps.push_back(to_json(t));
  nlohmann::json out = {{"schema", "halo-multihop/1"},
                        {"question", r.question},
                        {"steps", std::move(steps)}};
  out["final_answer"] =
      r.final_answer ? nlohmann::json(*r.final_answer) : nlohmann::json(nullptr);
  return out;
}

inline nlohmann::json to_json(const PremiseReport& r) {
  nlohmann::json out = {{"question", r.question},
                        {"evidence", to_json(r.evidence)},
                        {"premise_reply", r.premise_reply},
                        {"premise_ok", r.premise_ok},
                        {"rectified_changed", r.rectified_changed},
                        {"rectification_failed", r.rectification_failed}};
  out["rectified_question"] = r.rectified_question
                                  ? nlohmann::json(*r.rectified_question)
                                  : nlohmann::json(nullptr);
  return out;
}

inline nlohmann::json to_json(const FalsePremiseResult& r) {
  return {{"schema", "halo-premise/1"},
          {"report", to_json(r.report)},
          {"answer", r.answer}};
}

inline nlohmann::json to_json(const DetectionMetrics& m) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"counts",
           {{"true_positives", m.true_positives},
            {"false_positives", m.false_positives},
            {"true_negatives", m.true_negatives},
            {"false_negatives", m.false_negatives}}},
          {"accuracy", m.accuracy},
          {"precision_hallucinated", opt(m.precision_hallucinated)},
          {"recall_hallucinated", opt(m.recall_hallucinated)},
          {"precision_not", opt(m.precision_not)},
          {"recall_not", opt(m.recall_not)}};
}

inline nlohmann::json to_json(const ContingencyCounts& c) {
  return {{"prior_and_current", c.prior_and_current},
          {"prior_only", c.prior_only},
          {"current_only", c.current_only},
          {"neither", c.neither}};
}

inline nlohmann::json to_json(const ContingencyResult& r) {
  nlohmann::json per_index = nlohmann::json::object();
  for (const auto& [index, counts] : r.per_index)
    per_index[std::to_string(index)] = to_json(counts);
  return {{"per_index", std::move(per_index)},
          {"aggregate", to_json(r.aggregate)}};
}

inline nlohmann::json to_json(const MitigationOutcome& o) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"tp_fixed", o.tp_fixed},
          {"tp_unfixed", o.tp_unfixed},
          {"fp_preserved", o.fp_preserved},
          {"fp_broken", o.fp_broken},
          {"success_rate", opt(o.success_rate)},
          {"deterioration_rate", opt(o.deterioration_rate)}};
}

inline std::string pr_curve_csv(const std::vector<PrPoint>& curve) {
  std::string out = "threshold,precision,recall\n";
  char buf[128];
  for (const PrPoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold,
                  p.precision, p.recall);
    out += buf;
  }
  return out;
}

}  // namespace halo
