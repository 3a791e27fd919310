#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "halo/backend.hpp"
#include "halo/diag.hpp"
#include "halo/prompts.hpp"
#include "halo/retrieval.hpp"
#include "halo/text.hpp"

namespace halo {

struct RepairResult {
  std::string original;
  std::string repaired;
  std::vector<Evidence> evidence_used;
  bool changed = false;
};

// Rewrite a flagged sentence against the failing concept's evidence. The
// reply's first paragraph becomes the repaired sentence; a blank reply raises
// EmptyRepair and the caller keeps the original. Repairs can drift off-topic
// when the evidence is about something else, so a missing topic mention is
// logged as a warning but not blocked.
inline RepairResult repair_sentence(const CompletionBackend& backend,
                                    std::string_view sentence,
                                    std::string_view topic,
                                    const std::vector<Evidence>& evidence,
                                    const GenerationParams& params = {}) {
  if (evidence.empty())
    throw ConfigError("repair_sentence requires the failing concept's evidence");

  std::vector<std::string> snippets;
  snippets.reserve(evidence.size());
  for (const Evidence& e : evidence) snippets.push_back(e.text);

  GenerationParams p = params;
  p.logprobs_requested = false;
  Completion reply = backend.complete(
      prompts::repair_prompt(prompts::evidence_block(snippets), sentence), p);

  RepairResult result;
  result.original = std::string(sentence);
  result.repaired = text::first_paragraph(reply.text);
  result.evidence_used = evidence;
  if (result.repaired.empty())
    throw EmptyRepair("backend returned a blank repair for: " +
                      result.original);
  result.changed = text::normalize_whitespace(result.repaired) !=
                   text::normalize_whitespace(result.original);

  if (!topic.empty() &&
      text::ifind(result.repaired, topic) == std::string_view::npos &&
      text::ifind(result.original, topic) != std::string_view::npos) {
    warn("repaired sentence no longer mentions topic '" + std::string(topic) +
         "': " + result.repaired);
  }
  return result;
}

}  // namespace halo
