#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freshstack/sha256.hpp"

namespace freshstack::prompts {

// Versioned prompt templates. The hash of the template a stage actually used
// is recorded in that stage's outputs for provenance.
inline constexpr std::string_view kPromptVersion = "v1";

// Distinctive phrases, one per task; the deterministic mock backend keys its
// canned behavior off these.
inline constexpr std::string_view kNuggetizeSentinel = "grading-note nuggets";
inline constexpr std::string_view kSubQuestionsSentinel = "self-contained sub-questions";
inline constexpr std::string_view kClosedBookSentinel = "from your own knowledge";
inline constexpr std::string_view kJudgeSentinel = "one line per supported pair";
inline constexpr std::string_view kRagSentinel = "using the retrieved documents below";
inline constexpr std::string_view kAssignSentinel = "grade the answer against each nugget";

inline constexpr std::string_view kNuggetizeSystem =
    "You are an expert technical assessor. You extract the atomic facts a correct answer "
    "must contain, written in the style of grading notes.";

inline std::string nuggetize_user(std::string_view question_id, std::string_view title,
                                  std::string_view body, std::string_view answer,
                                  std::size_t max_nuggets) {
    std::string out;
    out += "Write up to " + std::to_string(max_nuggets) + " ";
    out += kNuggetizeSentinel;
    out +=
        " for the question and accepted answer below. Each nugget is one atomic, declarative "
        "fact essential to a correct response. Output a numbered list only, one nugget per "
        "line, no commentary.\n\n";
    out += "Question ID: ";
    out += question_id;
    out += "\n\n### Question\n";
    out += title;
    out += "\n\n";
    out += body;
    out += "\n\n### Accepted Answer\n";
    out += answer;
    out += "\n";
    return out;
}

inline constexpr std::string_view kSubQuestionsSystem =
    "You are an expert technical assistant. You decompose questions into focused "
    "sub-questions for document retrieval.";

inline std::string sub_questions_user(std::string_view title, std::string_view body) {
    std::string out;
    out += "Decompose the question below into ";
    out += kSubQuestionsSentinel;
    out += " that would each retrieve useful documents. Output a numbered list only.\n\n### Question\n";
    out += title;
    out += "\n\n";
    out += body;
    out += "\n";
    return out;
}

inline constexpr std::string_view kClosedBookSystem =
    "You are an expert technical assistant. You answer without any retrieved context.";

inline std::string closed_book_user(std::string_view title, std::string_view body) {
    std::string out;
    out += "Answer the question below concisely ";
    out += kClosedBookSentinel;
    out += ".\n\n### Question\n";
    out += title;
    out += "\n\n";
    out += body;
    out += "\n";
    return out;
}

inline constexpr std::string_view kJudgeSystem =
    "You are a rigorous relevance judge. For every nugget and document, decide whether the "
    "document supports (or contains) the information in the nugget. Reason step by step "
    "first, then output the verdict lines.";

inline std::string judge_user(std::string_view question_id, std::string_view title,
                              const std::vector<std::string>& nugget_texts,
                              const std::vector<std::pair<std::string, std::string>>& docs) {
    std::string out;
    out += "Question ";
    out += question_id;
    out += ": ";
    out += title;
    out += "\n\n### Nuggets\n";
    for (std::size_t i = 0; i < nugget_texts.size(); ++i) {
        out += std::to_string(i + 1);
        out += ". ";
        out += nugget_texts[i];
        out += '\n';
    }
    out += "\n### Documents\n";
    for (const auto& [doc_id, text] : docs) {
        out += "[doc] ";
        out += doc_id;
        out += '\n';
        out += text;
        out += "\n\n";
    }
    out += "After your reasoning, output ";
    out += kJudgeSentinel;
    out += " in the exact form `nugget_<i> <doc_id>: yes`, then the final line `others: no`.\n";
    return out;
}

inline constexpr std::string_view kRagSystem =
    "You are a helpful technical assistant. Ground your answer in the provided documents "
    "when they are relevant.";

inline std::string rag_user(std::string_view title, std::string_view body,
                            const std::vector<std::pair<std::string, std::string>>& context) {
    std::string out;
    out += "### Question\n";
    out += title;
    out += "\n\n";
    out += body;
    out += "\n";
    if (!context.empty()) {
        out += "\n### Documents\n";
        for (const auto& [doc_id, text] : context) {
            out += "[";
            out += doc_id;
            out += "]\n";
            out += text;
            out += "\n\n";
        }
        out += "Answer the question ";
        out += kRagSentinel;
        out += ".\n";
    } else {
        out += "\nAnswer the question.\n";
    }
    return out;
}

inline constexpr std::string_view kAssignSystem =
    "You are a rigorous answer grader. You label whether a generated answer supports each "
    "nugget.";

inline std::string assign_user(const std::vector<std::string>& nugget_texts,
                               std::string_view answer) {
    std::string out;
    out += "Please ";
    out += kAssignSentinel;
    out += ".\n\n### Nuggets\n";
    for (std::size_t i = 0; i < nugget_texts.size(); ++i) {
        out += std::to_string(i + 1);
        out += ". ";
        out += nugget_texts[i];
        out += '\n';
    }
    out += "\n### Answer\n";
    out += answer;
    out += "\n\nOutput one line per nugget in the exact form "
           "`nugget_<i>: support|partial_support|no_support`.\n";
    return out;
}

// Re-ask suffix appended when a response fails to parse.
inline constexpr std::string_view kReAskSuffix =
    "\n\nYour previous reply could not be parsed. Return only the requested lines, nothing else.";

inline std::string template_hash(std::string_view system_template) {
    Sha256 h;
    h.update(kPromptVersion);
    h.update("\n", 1);
    h.update(system_template);
    return h.finish_hex();
}

} // namespace freshstack::prompts
