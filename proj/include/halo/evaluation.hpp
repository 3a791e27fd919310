#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "halo/errors.hpp"
#include "halo/scoring.hpp"
#include "halo/text.hpp"

namespace halo {

inline constexpr std::string_view kAnnotationSchema = "halo-annotations/1";

enum class Label { hallucinated, not_hallucinated };

inline std::string_view to_string(Label l) {
  return l == Label::hallucinated ? "hallucinated" : "not_hallucinated";
}

inline Label label_from_string(std::string_view s) {
  if (s == "hallucinated") return Label::hallucinated;
  if (s == "not_hallucinated") return Label::not_hallucinated;
  throw ConfigError("unknown label: " + std::string(s));
}

struct ConceptAnnotation {
  std::string text;
  Label label = Label::not_hallucinated;
  std::optional<std::vector<double>> token_probs;
};

// Gold sentence-level and concept-level correctness labels for one generated
// sentence of one topic.
struct AnnotationRecord {
  std::string topic;
  int sentence_index = 0;
  std::string sentence;
  Label sentence_label = Label::not_hallucinated;
  std::vector<ConceptAnnotation> concept_labels;
};

// ---------------------------------------------------------------------------
// Annotation JSONL I/O
// ---------------------------------------------------------------------------

inline AnnotationRecord annotation_from_json(const nlohmann::json& doc) {
  if (doc.value("schema", std::string()) != kAnnotationSchema)
    throw ConfigError("annotation record missing schema " +
                      std::string(kAnnotationSchema));
  AnnotationRecord rec;
  rec.topic = doc.at("topic").get<std::string>();
  rec.sentence_index = doc.at("sentence_index").get<int>();
  rec.sentence = doc.value("sentence", std::string());
  rec.sentence_label =
      label_from_string(doc.at("sentence_label").get<std::string>());
  for (const auto& c : doc.value("concepts", nlohmann::json::array())) {
    ConceptAnnotation ca;
    ca.text = c.at("text").get<std::string>();
    ca.label = label_from_string(c.at("label").get<std::string>());
    if (c.contains("token_probs") && !c["token_probs"].is_null()) {
      std::vector<double> probs = c["token_probs"].get<std::vector<double>>();
      for (double p : probs)
        if (p < 0.0 || p > 1.0)
          throw ConfigError("token probability outside [0,1]");
      ca.token_probs = std::move(probs);
    }
    rec.concept_labels.push_back(std::move(ca));
  }
  return rec;
}

inline nlohmann::json annotation_to_json(const AnnotationRecord& rec) {
  nlohmann::json concepts = nlohmann::json::array();
  for (const ConceptAnnotation& c : rec.concept_labels) {
    nlohmann::json item = {{"text", c.text},
                           {"label", std::string(to_string(c.label))}};
    if (c.token_probs) item["token_probs"] = *c.token_probs;
    concepts.push_back(std::move(item));
  }
  return {{"schema", std::string(kAnnotationSchema)},
          {"topic", rec.topic},
          {"sentence_index", rec.sentence_index},
          {"sentence", rec.sentence},
          {"sentence_label", std::string(to_string(rec.sentence_label))},
          {"concepts", std::move(concepts)}};
}

inline std::vector<AnnotationRecord> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open annotations: " + path);
  std::vector<AnnotationRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    records.push_back(annotation_from_json(nlohmann::json::parse(line)));
  }
  return records;
}

inline void save_annotations(const std::string& path,
                             const std::vector<AnnotationRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write annotations: " + path);
  for (const AnnotationRecord& rec : records)
    out << annotation_to_json(rec).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Detection metrics
// ---------------------------------------------------------------------------

// Confusion-matrix metrics with "hallucinated" as the positive class.
// Precision/recall of a class with no predictions (or no members) is absent
// rather than forced to a number.
struct DetectionMetrics {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t true_negatives = 0;
  std::size_t false_negatives = 0;
  double accuracy = 0.0;
  std::optional<double> precision_hallucinated;
  std::optional<double> recall_hallucinated;
  std::optional<double> precision_not;
  std::optional<double> recall_not;
};

inline DetectionMetrics detection_metrics(const std::vector<bool>& predictions,
                                          const std::vector<bool>& golds) {
  if (predictions.size() != golds.size())
    throw LengthMismatch("predictions and golds differ in length");
  if (predictions.empty()) throw EmptyInput("no instances to evaluate");

  DetectionMetrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] && golds[i]) ++m.true_positives;
    else if (predictions[i] && !golds[i]) ++m.false_positives;
    else if (!predictions[i] && golds[i]) ++m.false_negatives;
    else ++m.true_negatives;
  }
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = static_cast<double>(m.true_positives + m.true_negatives) /
               static_cast<double>(predictions.size());
  m.precision_hallucinated =
      ratio(m.true_positives, m.true_positives + m.false_positives);
  m.recall_hallucinated =
      ratio(m.true_positives, m.true_positives + m.false_negatives);
  m.precision_not =
      ratio(m.true_negatives, m.true_negatives + m.false_negatives);
  m.recall_not = ratio(m.true_negatives, m.true_negatives + m.false_positives);
  return m;
}

// ---------------------------------------------------------------------------
// Precision-recall curves
// ---------------------------------------------------------------------------

struct PrPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
};

// Curve for the rule "score < threshold predicts hallucinated". One point per
// distinct score plus a closing point just above the maximum so every
// instance ends up predicted. Precision with no predictions is 1.0 by
// endpoint convention. With no gold positives the curve is empty (recall is
// undefined everywhere).
inline std::vector<PrPoint> pr_curve(const std::vector<double>& scores,
                                     const std::vector<bool>& gold_hallucinated) {
  if (scores.size() != gold_hallucinated.size())
    throw LengthMismatch("scores and golds differ in length");

  std::size_t positives = 0;
  for (bool g : gold_hallucinated)
    if (g) ++positives;
  if (positives == 0) return {};

  std::set<double> distinct(scores.begin(), scores.end());
  std::vector<double> thresholds(distinct.begin(), distinct.end());
  if (!thresholds.empty())
    thresholds.push_back(std::nextafter(thresholds.back(), 2.0));

  std::vector<PrPoint> curve;
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < t) {
        if (gold_hallucinated[i]) ++tp;
        else ++fp;
      }
    }
    PrPoint p;
    p.threshold = t;
    p.precision = (tp + fp) == 0
                      ? 1.0
                      : static_cast<double>(tp) / static_cast<double>(tp + fp);
    p.recall = static_cast<double>(tp) / static_cast<double>(positives);
    curve.push_back(p);
  }
  return curve;
}

// Trapezoidal area under precision as a function of recall.
inline double auc(std::vector<PrPoint> curve) {
  if (curve.empty()) throw EmptyCurve("cannot integrate an empty curve");
  std::stable_sort(curve.begin(), curve.end(),
                   [](const PrPoint& a, const PrPoint& b) {
                     return a.recall < b.recall;
                   });
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].recall - curve[i - 1].recall) *
            (curve[i].precision + curve[i - 1].precision) / 2.0;
  }
  return area;
}

// ---------------------------------------------------------------------------
// Propagation contingency
// ---------------------------------------------------------------------------

// Counts over sentences with index >= 1, split by whether any earlier
// sentence of the topic was hallucinated and whether the current one is.
struct ContingencyCounts {
  std::size_t prior_and_current = 0;  // earlier hallucination, current too
  std::size_t prior_only = 0;         // earlier hallucination, current clean
  std::size_t current_only = 0;       // clean history, current hallucinated
  std::size_t neither = 0;            // clean history, current clean

  std::size_t total() const {
    return prior_and_current + prior_only + current_only + neither;
  }
};

struct ContingencyResult {
  std::map<int, ContingencyCounts> per_index;
  ContingencyCounts aggregate;
};

inline ContingencyResult contingency(
    const std::vector<AnnotationRecord>& records) {
  std::map<std::string, std::map<int, Label>> topics;
  for (const AnnotationRecord& rec : records) {
    auto [it, inserted] =
        topics[rec.topic].emplace(rec.sentence_index, rec.sentence_label);
    if (!inserted)
      throw MissingIndex("duplicate sentence index " +
                         std::to_string(rec.sentence_index) + " for topic " +
                         rec.topic);
  }

  ContingencyResult result;
  for (const auto& [topic, sentences] : topics) {
    int expected = 0;
    bool prior_hallucination = false;
    for (const auto& [index, label] : sentences) {
      if (index != expected)
        throw MissingIndex("topic " + topic +
                           " has non-contiguous sentence indices");
      ++expected;
      bool current = label == Label::hallucinated;
      if (index >= 1) {
        ContingencyCounts& bucket = result.per_index[index];
        if (prior_hallucination && current) {
          ++bucket.prior_and_current;
          ++result.aggregate.prior_and_current;
        } else if (prior_hallucination) {
          ++bucket.prior_only;
          ++result.aggregate.prior_only;
        } else if (current) {
          ++bucket.current_only;
          ++result.aggregate.current_only;
        } else {
          ++bucket.neither;
          ++result.aggregate.neither;
        }
      }
      prior_hallucination = prior_hallucination || current;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Mitigation outcomes
// ---------------------------------------------------------------------------

// Before/after labels of the sentences the detector flagged. Success is the
// share of real hallucinations the repair fixed; deterioration is the share
// of false positives the repair broke.
struct MitigationOutcome {
  std::size_t tp_fixed = 0;      // hallucinated -> not
  std::size_t tp_unfixed = 0;    // hallucinated -> hallucinated
  std::size_t fp_preserved = 0;  // not -> not
  std::size_t fp_broken = 0;     // not -> hallucinated
  std::optional<double> success_rate;
  std::optional<double> deterioration_rate;
};

inline MitigationOutcome mitigation_outcome(const std::vector<Label>& before,
                                            const std::vector<Label>& after) {
  if (before.size() != after.size())
    throw LengthMismatch("before and after differ in length");

  MitigationOutcome out;
  for (std::size_t i = 0; i < before.size(); ++i) {
    bool was = before[i] == Label::hallucinated;
    bool is = after[i] == Label::hallucinated;
    if (was && !is) ++out.tp_fixed;
    else if (was && is) ++out.tp_unfixed;
    else if (!was && !is) ++out.fp_preserved;
    else ++out.fp_broken;
  }
  if (out.tp_fixed + out.tp_unfixed > 0)
    out.success_rate = static_cast<double>(out.tp_fixed) /
                       static_cast<double>(out.tp_fixed + out.tp_unfixed);
  if (out.fp_preserved + out.fp_broken > 0)
    out.deterioration_rate =
        static_cast<double>(out.fp_broken) /
        static_cast<double>(out.fp_preserved + out.fp_broken);
  return out;
}

// ---------------------------------------------------------------------------
// Score-vs-hallucination trend
// ---------------------------------------------------------------------------

struct ScoreBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t total = 0;
  std::size_t hallucinated = 0;
  std::optional<double> fraction;  // absent for empty bins
};

struct ProbabilityBins {
  std::vector<ScoreBin> concept_bins;
  std::vector<ScoreBin> sentence_bins;
};

// Bucket concepts (and sentences, via the min across their concepts' tokens)
// into equal-width score bins and report the hallucinated fraction per bin.
inline ProbabilityBins probability_bins(
    const std::vector<AnnotationRecord>& records, ScoreMethod method,
    int bins) {
  if (bins < 1) throw ConfigError("bins must be >= 1");

  auto make_bins = [bins]() {
    std::vector<ScoreBin> out(static_cast<std::size_t>(bins));
    for (int i = 0; i < bins; ++i) {
      out[static_cast<std::size_t>(i)].lo = static_cast<double>(i) / bins;
      out[static_cast<std::size_t>(i)].hi = static_cast<double>(i + 1) / bins;
    }
    return out;
  };
  auto bucket = [bins](double score) {
    int idx = static_cast<int>(score * bins);
    return static_cast<std::size_t>(std::clamp(idx, 0, bins - 1));
  };

  ProbabilityBins result;
  result.concept_bins = make_bins();
  result.sentence_bins = make_bins();

  std::size_t scored_concepts = 0;
  for (const AnnotationRecord& rec : records) {
    std::optional<double> sentence_min;
    for (const ConceptAnnotation& c : rec.concept_labels) {
      if (!c.token_probs || c.token_probs->empty()) continue;
      ++scored_concepts;
      double score = score_concept(*c.token_probs, method);
      ScoreBin& bin = result.concept_bins[bucket(score)];
      ++bin.total;
      if (c.label == Label::hallucinated) ++bin.hallucinated;
      for (double p : *c.token_probs)
        if (!sentence_min || p < *sentence_min) sentence_min = p;
    }
    if (sentence_min) {
      ScoreBin& bin = result.sentence_bins[bucket(*sentence_min)];
      ++bin.total;
      if (rec.sentence_label == Label::hallucinated) ++bin.hallucinated;
    }
  }
  if (scored_concepts == 0)
    throw NoScoredConcepts("no concept carries token probabilities");

  for (auto* side : {&result.concept_bins, &result.sentence_bins})
    for (ScoreBin& bin : *side)
      if (bin.total > 0)
        bin.fraction = static_cast<double>(bin.hallucinated) /
                       static_cast<double>(bin.total);
  return result;
}

}  // namespace halo
