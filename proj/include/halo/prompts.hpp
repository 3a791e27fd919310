#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "halo/text.hpp"

// Prompt templates and the assembly rules that turn pipeline state into the
// exact strings sent to a backend. Every prompt the library issues is built
// here so that scripted fixtures can predict them byte for byte.

namespace halo::prompts {

inline constexpr std::string_view kArticleTemplatePrefix =
    "Write an article about ";

inline constexpr std::string_view kConceptInstruction =
    "Identify all the important keyphrases from the above sentence and "
    "return a comma separated list";

inline constexpr std::string_view kRepairInstruction =
    "The above sentence has information that can not be verified from the "
    "provided evidence, repair that incorrect information and create a new "
    "sentence based on the provided evidence.";

// Worked examples shown to the model before a multi-hop question. The last
// line is left open so the model continues after "Answer:".
inline constexpr std::string_view kMultihopFewshot =
    "Question: Which team does the player named 2015 Diamond Head "
    "Classic’s MVP play for?\n"
    "Answer: The 2015 Diamond Head Classic’s MVP was Buddy Hield. Buddy "
    "Hield plays for the Sacramento Kings of the NBA. So, the answer is "
    "Sacramento Kings.\n"
    "\n"
    "Question: The Dutch-Belgian television series that \"House of Anubis\" "
    "was based on first aired in what year?\n"
    "Answer: \"House of Anubis\" was based on is Het Huis Anubis. Het Huis "
    "Anubis was first aired in 2006. So, the answer is 2006.\n"
    "\n"
    "Question: What is the birth date of the coach of the 2014-15 Michigan "
    "Wolverines men's basketball team?\n"
    "Answer: The coach of the 2014-15 Michigan Wolverines men's basketball "
    "team was John Beilein. John Beilein's birth date is February 5, 1953.\n"
    "\n"
    "Question: {question}\n"
    "Answer:";

inline std::string article_topic_prompt(std::string_view topic) {
  return std::string(kArticleTemplatePrefix) + std::string(topic);
}

// Prompt for the k-th sentence: the topic line, then everything accepted so
// far joined with single spaces.
inline std::string article_generation_prompt(
    std::string_view topic, const std::vector<std::string>& accepted) {
  std::string prompt = article_topic_prompt(topic);
  if (!accepted.empty()) {
    prompt += '\n';
    prompt += text::join(accepted, " ");
  }
  return prompt;
}

// Concept identification sees the generation context (in article mode: the
// topic prompt and the accepted sentences), then the current sentence, then
// the instruction.
inline std::string concept_extraction_prompt(std::string_view context,
                                             std::string_view sentence) {
  std::string prompt(context);
  prompt += '\n';
  prompt += sentence;
  prompt += '\n';
  prompt += kConceptInstruction;
  return prompt;
}

inline std::string validation_question_prompt(std::string_view sentence,
                                              std::string_view topic,
                                              std::string_view concept_text,
                                              bool wh_question) {
  std::string prompt(sentence);
  prompt += "\nFor the above sentence about ";
  prompt += topic;
  prompt += wh_question ? ", generate a wh question that tests the correctness of "
                        : ", generate a yes/no question that tests the correctness of ";
  prompt += concept_text;
  prompt += '.';
  return prompt;
}

// Retrieved snippets are stacked with blank lines between them.
inline std::string evidence_block(const std::vector<std::string>& snippets) {
  return text::join(snippets, "\n\n");
}

inline std::string answer_validation_prompt(std::string_view evidence,
                                            std::string_view topic,
                                            std::string_view question) {
  std::string prompt(evidence);
  prompt += " Answer the below question about ";
  prompt += topic;
  prompt += " in Yes or No based on the above context. ";
  prompt += question;
  return prompt;
}

inline std::string repair_prompt(std::string_view evidence,
                                 std::string_view sentence) {
  std::string prompt(evidence);
  prompt += '\n';
  prompt += sentence;
  prompt += '\n';
  prompt += kRepairInstruction;
  return prompt;
}

inline std::string multihop_prompt(std::string_view question,
                                   const std::vector<std::string>& steps) {
  std::string prompt(kMultihopFewshot);
  const std::string placeholder = "{question}";
  std::size_t pos = prompt.find(placeholder);
  prompt.replace(pos, placeholder.size(), question);
  if (!steps.empty()) {
    prompt += ' ';
    prompt += text::join(steps, " ");
  }
  return prompt;
}

inline std::string premise_check_prompt(std::string_view evidence,
                                        std::string_view question) {
  std::string prompt = "Context: ";
  prompt += evidence;
  prompt += " Question: ";
  prompt += question;
  prompt += " Based on the above context, does the above question make "
            "factually correct assumptions?";
  return prompt;
}

inline std::string rectify_question_prompt(std::string_view premise_reply,
                                           std::string_view question) {
  std::string prompt = "Context: ";
  prompt += premise_reply;
  prompt += " Question: ";
  prompt += question;
  prompt += " Rectify the incorrect information in the given question based "
            "on the context.";
  return prompt;
}

// Plain answer prompt used once the premise check has settled on a question.
inline std::string answer_with_context_prompt(std::string_view evidence,
                                              std::string_view question) {
  std::string prompt = "Context: ";
  prompt += evidence;
  prompt += " Question: ";
  prompt += question;
  return prompt;
}

}  // namespace halo::prompts
