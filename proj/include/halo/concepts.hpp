#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "halo/backend.hpp"
#include "halo/prompts.hpp"
#include "halo/text.hpp"

namespace halo {

// Half-open index interval.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool overlaps(const Span& other) const {
    return begin < other.end && other.begin < end;
  }
  friend bool operator==(const Span&, const Span&) = default;
};

enum class ConceptSource { model_instruction, rule_based, external_tool };

inline std::string_view to_string(ConceptSource s) {
  switch (s) {
    case ConceptSource::model_instruction: return "model_instruction";
    case ConceptSource::rule_based: return "rule_based";
    case ConceptSource::external_tool: return "external_tool";
  }
  return "rule_based";
}

// A span of the sentence worth validating: surface text, its character range
// in the sentence, and (after alignment) the covering token range.
struct Concept {
  std::string text;
  Span char_range;
  std::optional<Span> token_range;
  ConceptSource source = ConceptSource::rule_based;
};

enum class ConceptMethod { model_instruction, rule_based, external_tool };

inline std::string_view to_string(ConceptMethod m) {
  switch (m) {
    case ConceptMethod::model_instruction: return "model_instruction";
    case ConceptMethod::rule_based: return "rule_based";
    case ConceptMethod::external_tool: return "external_tool";
  }
  return "model_instruction";
}

// Hook for plugging an external extraction tool (entity tagger, keyphrase
// model). None is bundled.
class ConceptTool {
 public:
  virtual ~ConceptTool() = default;
  virtual std::vector<std::string> extract(std::string_view sentence) = 0;
};

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '\'' ||
         c == '-';
}

struct Word {
  std::string_view token;
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline std::vector<Word> words_with_positions(std::string_view sentence) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < sentence.size()) {
    if (!is_word_char(sentence[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < sentence.size() && is_word_char(sentence[i])) ++i;
    words.push_back({sentence.substr(start, i - start), start, i});
  }
  return words;
}

// Function words never worth validating on their own.
inline bool is_stopword(std::string_view word) {
  static const std::unordered_set<std::string> stopwords = {
      "a",     "an",      "and",     "after",  "although", "are",   "as",
      "at",    "before",  "but",     "by",     "during",   "for",   "from",
      "he",    "her",     "here",    "his",    "however",  "i",     "if",
      "in",    "is",      "it",      "its",    "my",       "of",    "on",
      "or",    "our",     "she",     "since",  "that",     "the",   "their",
      "then",  "there",   "these",   "they",   "this",     "those", "thus",
      "to",    "until",   "was",     "we",     "were",     "when",  "while",
      "with",  "you",     "your",    "also",   "moreover", "furthermore"};
  return stopwords.count(text::to_lower(word)) > 0;
}

// Lowercase words allowed inside a capitalized span ("University of London").
inline bool is_connector(std::string_view word) {
  static const std::unordered_set<std::string> connectors = {
      "of", "the", "and", "de", "la", "von", "van", "der"};
  return connectors.count(text::to_lower(word)) > 0;
}

inline bool is_capitalized(std::string_view word) {
  return !word.empty() && std::isupper(static_cast<unsigned char>(word[0]));
}

inline bool is_all_digits(std::string_view word) {
  return !word.empty() &&
         std::all_of(word.begin(), word.end(), [](char c) {
           return std::isdigit(static_cast<unsigned char>(c)) != 0;
         });
}

}  // namespace detail

// Deterministic fallback extraction: capitalized spans (with lowercase
// connectors), four-digit years, other numeric quantities, and quoted titles.
// Overlapping candidates keep the earliest, longest span.
inline std::vector<Span> rule_based_concept_spans(std::string_view sentence) {
  using detail::Word;
  std::vector<Span> candidates;
  const std::vector<Word> words = detail::words_with_positions(sentence);

  // Capitalized spans.
  std::size_t i = 0;
  while (i < words.size()) {
    if (!detail::is_capitalized(words[i].token)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::size_t last_cap = i;
    while (j + 1 < words.size()) {
      const Word& next = words[j + 1];
      if (detail::is_capitalized(next.token)) {
        // Connectors may only bridge two capitalized words.
        j = j + 1;
        last_cap = j;
      } else if (detail::is_connector(next.token) && j + 2 < words.size() &&
                 detail::is_capitalized(words[j + 2].token)) {
        j = j + 2;
        last_cap = j;
      } else {
        break;
      }
    }
    j = last_cap;
    bool all_stop = true;
    for (std::size_t k = i; k <= j; ++k)
      if (!detail::is_stopword(words[k].token)) all_stop = false;
    bool single_trivial =
        i == j && (detail::is_stopword(words[i].token) ||
                   words[i].token.size() == 1 ||
                   detail::is_all_digits(words[i].token));
    if (!all_stop && !single_trivial)
      candidates.push_back({words[i].begin, words[j].end});
    i = j + 1;
  }

  // Numeric quantities (covers four-digit years).
  for (const Word& w : words) {
    bool numeric = std::isdigit(static_cast<unsigned char>(w.token[0])) != 0;
    if (!numeric) continue;
    std::size_t end = w.end;
    if (end < sentence.size() && sentence[end] == '%') ++end;
    candidates.push_back({w.begin, end});
  }

  // Quoted titles.
  for (std::size_t pos = 0; pos < sentence.size(); ++pos) {
    if (sentence[pos] != '"') continue;
    std::size_t close = sentence.find('"', pos + 1);
    if (close == std::string_view::npos) break;
    if (close > pos + 1) candidates.push_back({pos + 1, close});
    pos = close;
  }

  std::sort(candidates.begin(), candidates.end(), [](const Span& a, const Span& b) {
    if (a.begin != b.begin) return a.begin < b.begin;
    return a.size() > b.size();
  });
  std::vector<Span> kept;
  for (const Span& c : candidates) {
    bool clashes = std::any_of(kept.begin(), kept.end(), [&](const Span& k) {
      return k.overlaps(c);
    });
    if (!clashes) kept.push_back(c);
  }
  return kept;
}

// Splits a comma-separated model reply into normalized candidate phrases.
// Tolerates newlines as separators, stray spaces, and trailing periods.
inline std::vector<std::string> parse_concept_reply(std::string_view reply) {
  std::vector<std::string> items;
  std::string current;
  auto flush = [&]() {
    std::string item = text::trim_copy(current);
    while (!item.empty() && item.back() == '.') item.pop_back();
    item = text::trim_copy(item);
    if (!item.empty()) items.push_back(item);
    current.clear();
  };
  for (char c : reply) {
    if (c == ',' || c == '\n') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  return items;
}

// Locates candidate phrases in the sentence (case-insensitively), drops the
// unmatched ones, dedupes surface forms to their first occurrence, and
// returns concepts ordered by position.
inline std::vector<Concept> concepts_from_phrases(
    std::string_view sentence, const std::vector<std::string>& phrases,
    ConceptSource source) {
  std::vector<Concept> concepts;
  std::unordered_set<std::string> seen;
  for (const std::string& phrase : phrases) {
    std::string folded = text::to_lower(phrase);
    if (folded.empty() || seen.count(folded)) continue;
    std::size_t pos = text::ifind(sentence, phrase);
    if (pos == std::string_view::npos) continue;  // paraphrase, not a span
    seen.insert(folded);
    Span range{pos, pos + phrase.size()};
    concepts.push_back({std::string(sentence.substr(range.begin, range.size())),
                        range, std::nullopt, source});
  }
  std::sort(concepts.begin(), concepts.end(),
            [](const Concept& a, const Concept& b) {
              return a.char_range.begin < b.char_range.begin;
            });
  return concepts;
}

// Identify the concepts of `sentence` worth validating. `context` is the
// prompt the sentence was generated under (topic prompt plus accepted
// sentences in article mode); instructed extraction shows it above the
// sentence so the model sees what the sentence was asserting. An empty
// result means the sentence has no validation candidates; callers treat that
// as a pass-through.
inline std::vector<Concept> extract_concepts(
    const CompletionBackend& backend, std::string_view sentence,
    std::string_view context, ConceptMethod method,
    const GenerationParams& params = {}, ConceptTool* tool = nullptr) {
  if (text::trim(sentence).empty()) return {};

  switch (method) {
    case ConceptMethod::rule_based: {
      std::vector<Concept> concepts;
      std::unordered_set<std::string> seen;
      for (const Span& span : rule_based_concept_spans(sentence)) {
        std::string surface(sentence.substr(span.begin, span.size()));
        std::string folded = text::to_lower(surface);
        if (seen.count(folded)) continue;
        seen.insert(folded);
        concepts.push_back({std::move(surface), span, std::nullopt,
                            ConceptSource::rule_based});
      }
      return concepts;
    }
    case ConceptMethod::model_instruction: {
      GenerationParams p = params;
      p.logprobs_requested = false;
      Completion reply = backend.complete(
          prompts::concept_extraction_prompt(context, sentence), p);
      return concepts_from_phrases(sentence, parse_concept_reply(reply.text),
                                   ConceptSource::model_instruction);
    }
    case ConceptMethod::external_tool: {
      if (tool == nullptr)
        throw ConfigError("external_tool extraction requires a ConceptTool");
      return concepts_from_phrases(sentence, tool->extract(sentence),
                                   ConceptSource::external_tool);
    }
  }
  return {};
}

// Aligns a concept to the minimal contiguous token interval covering its
// character range. `tokens` are the sentence's tokens in order; the returned
// indices are shifted by `sentence_token_offset`. Tokenizer boundaries may
// not line up with the sentence (leading spaces, sub-token splits), so the
// mapping is anchored by locating the sentence (or failing that, the concept
// text) inside the concatenated token stream. A concept that cannot be
// located keeps an absent token_range.
inline Concept align_concept_tokens(Concept item,
                                    const std::vector<TokenLogprob>& tokens,
                                    std::string_view sentence,
                                    std::size_t sentence_token_offset = 0) {
  item.token_range.reset();
  if (tokens.empty() || item.text.empty()) return item;

  std::string concat;
  std::vector<std::size_t> starts;  // char offset of each token in concat
  starts.reserve(tokens.size());
  for (const auto& t : tokens) {
    starts.push_back(concat.size());
    concat += t.token_text;
  }

  std::size_t target_begin = std::string::npos;
  std::size_t base = concat.find(std::string(sentence));
  if (base != std::string::npos) {
    target_begin = base + item.char_range.begin;
  } else {
    target_begin = concat.find(item.text);
    if (target_begin == std::string::npos)
      target_begin = text::ifind(concat, item.text);
  }
  if (target_begin == std::string::npos ||
      target_begin + item.text.size() > concat.size())
    return item;
  std::size_t target_end = target_begin + item.text.size();

  // First token whose span intersects [target_begin, target_end).
  std::size_t first = tokens.size(), last = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::size_t tok_begin = starts[i];
    std::size_t tok_end = tok_begin + tokens[i].token_text.size();
    if (tok_begin < target_end && target_begin < tok_end) {
      first = std::min(first, i);
      last = std::max(last, i + 1);
    }
  }
  if (first >= last) return item;

  // Soundness check: the covering tokens must actually contain the text.
  std::string_view covered =
      std::string_view(concat).substr(starts[first],
                                      (last < starts.size()
                                           ? starts[last]
                                           : concat.size()) - starts[first]);
  if (text::ifind(covered, item.text) == std::string_view::npos)
    return item;

  item.token_range =
      Span{first + sentence_token_offset, last + sentence_token_offset};
  return item;
}

}  // namespace halo
