#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string_view>
#include <vector>

#include "halo/concepts.hpp"
#include "halo/errors.hpp"

namespace halo {

enum class ScoreMethod { minimum, average, normalized_product };

inline std::string_view to_string(ScoreMethod m) {
  switch (m) {
    case ScoreMethod::minimum: return "min";
    case ScoreMethod::average: return "avg";
    case ScoreMethod::normalized_product: return "norm_prod";
  }
  return "min";
}

inline std::optional<ScoreMethod> score_method_from_string(std::string_view s) {
  if (s == "min" || s == "minimum") return ScoreMethod::minimum;
  if (s == "avg" || s == "average") return ScoreMethod::average;
  if (s == "norm_prod" || s == "normalized_product")
    return ScoreMethod::normalized_product;
  return std::nullopt;
}

// Aggregate a concept's token probabilities into a single uncertainty score.
// minimum            -> MIN(p_1..p_n)
// average            -> AVG(p_1..p_n)
// normalized_product -> (p_1 * ... * p_n)^(1/n), computed in log space; a
//                       zero probability short-circuits to 0.
inline double score_concept(const std::vector<double>& probs,
                            ScoreMethod method) {
  if (probs.empty()) throw EmptyTokenList("cannot score an empty token list");
  switch (method) {
    case ScoreMethod::minimum:
      return *std::min_element(probs.begin(), probs.end());
    case ScoreMethod::average:
      return std::accumulate(probs.begin(), probs.end(), 0.0) /
             static_cast<double>(probs.size());
    case ScoreMethod::normalized_product: {
      double log_sum = 0.0;
      for (double p : probs) {
        if (p <= 0.0) return 0.0;
        log_sum += std::log(p);
      }
      return std::exp(log_sum / static_cast<double>(probs.size()));
    }
  }
  return 0.0;
}

// A concept plus its score. `token_probs` holds the probabilities of the
// aligned tokens; it is empty exactly when the concept could not be aligned,
// in which case `score` is absent.
struct ConceptScore {
  Concept concept_span;
  std::vector<double> token_probs;
  std::optional<double> score;
  ScoreMethod method = ScoreMethod::minimum;
};

inline ConceptScore make_concept_score(Concept aligned,
                                       const std::vector<TokenLogprob>& tokens,
                                       ScoreMethod method,
                                       std::size_t sentence_token_offset = 0) {
  ConceptScore cs;
  cs.method = method;
  if (aligned.token_range) {
    for (std::size_t i = aligned.token_range->begin;
         i < aligned.token_range->end; ++i) {
      cs.token_probs.push_back(tokens[i - sentence_token_offset].probability);
    }
  }
  cs.concept_span = std::move(aligned);
  if (!cs.token_probs.empty()) cs.score = score_concept(cs.token_probs, method);
  return cs;
}

// Sentence-level score: the minimum across the tokens of every scored
// concept. Absent when no concept carries a score.
inline std::optional<double> score_sentence(
    const std::vector<ConceptScore>& concept_scores) {
  std::optional<double> result;
  for (const ConceptScore& cs : concept_scores) {
    if (!cs.score) continue;
    for (double p : cs.token_probs) {
      if (!result || p < *result) result = p;
    }
  }
  return result;
}

// When to validate a concept and how strictly to read validation replies.
struct DetectionPolicy {
  double threshold = 0.5;        // validate concepts scoring strictly below
  bool validate_unscored = true; // unaligned concepts validated as fallback
  ScoreMethod method = ScoreMethod::minimum;
  bool strict = true;  // unparseable verdicts / empty evidence count as
                       // detections; false flips both to lenient
};

// Concepts scoring below the threshold, in ascending score order (ties keep
// input order). Unscored concepts are appended at the end when the policy's
// fallback is enabled, otherwise dropped.
inline std::vector<ConceptScore> select_uncertain(
    const std::vector<ConceptScore>& scores, const DetectionPolicy& policy) {
  std::vector<ConceptScore> scored;
  std::vector<ConceptScore> unscored;
  for (const ConceptScore& cs : scores) {
    if (cs.score) {
      if (*cs.score < policy.threshold) scored.push_back(cs);
    } else if (policy.validate_unscored) {
      unscored.push_back(cs);
    }
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ConceptScore& a, const ConceptScore& b) {
                     return *a.score < *b.score;
                   });
  scored.insert(scored.end(), unscored.begin(), unscored.end());
  return scored;
}

}  // namespace halo
