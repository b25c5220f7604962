#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "freshstack/errors.hpp"
#include "freshstack/gateway.hpp"
#include "freshstack/nuggets.hpp"
#include "freshstack/prompts.hpp"
#include "freshstack/tokenizer.hpp"
#include "freshstack/warn.hpp"

namespace freshstack {

struct RagAnswer {
    std::string question_id;
    std::string generator_model_id;
    std::vector<std::string> context_doc_ids; // retrieval rank order, deduplicated
    std::string answer_text;
    std::string prompt_hash;
};

struct RagGenerateConfig {
    std::string generator_model_id = "mock-generator";
    double temperature = 0.1;
    int max_output_tokens = 2048;
    std::size_t max_context_docs = 20;
    std::size_t max_context_tokens = 100000; // docs dropped from the tail beyond this
};

// Naive RAG: the question plus up to 20 retrieved documents concatenated in
// rank order, each block prefixed by its doc_id. Empty context is the
// closed-book mode.
inline RagAnswer generate_rag_answer(const QuestionRecord& q,
                                     const std::vector<std::pair<std::string, std::string>>& context,
                                     Gateway& gateway, const RagGenerateConfig& cfg = {},
                                     const Tokenizer& tok = ApproxTokenizer{}) {
    if (context.size() > cfg.max_context_docs) {
        throw ContractError("context exceeds " + std::to_string(cfg.max_context_docs) + " docs");
    }
    std::vector<std::pair<std::string, std::string>> kept;
    std::set<std::string> seen;
    std::size_t token_budget_used = 0;
    std::size_t dropped = 0;
    for (const auto& [doc_id, text] : context) {
        if (!seen.insert(doc_id).second) continue; // dedup, keep first (highest rank)
        std::size_t cost = tok.count(text);
        if (token_budget_used + cost > cfg.max_context_tokens) {
            ++dropped; // lowest-ranked docs go first
            continue;
        }
        token_budget_used += cost;
        kept.emplace_back(doc_id, text);
    }
    if (dropped > 0) {
        warn("context overflow: dropped " + std::to_string(dropped) +
             " lowest-ranked docs for " + q.question_id);
    }

    ChatRequest req;
    req.model_id = cfg.generator_model_id;
    req.system_text = std::string(prompts::kRagSystem);
    req.user_text = prompts::rag_user(q.title, q.body, kept);
    req.temperature = cfg.temperature;
    req.max_output_tokens = cfg.max_output_tokens;

    RagAnswer answer;
    answer.question_id = q.question_id;
    answer.generator_model_id = cfg.generator_model_id;
    for (const auto& [doc_id, _] : kept) answer.context_doc_ids.push_back(doc_id);
    answer.answer_text = gateway.complete(req).text;
    answer.prompt_hash = prompts::template_hash(prompts::kRagSystem);
    return answer;
}

// ---------- nugget assignment ----------

enum class AssignLabel { support, partial_support, no_support };

inline std::string_view assign_label_name(AssignLabel label) {
    switch (label) {
        case AssignLabel::support: return "support";
        case AssignLabel::partial_support: return "partial_support";
        case AssignLabel::no_support: return "no_support";
    }
    return "no_support";
}

inline AssignLabel assign_label_from_name(std::string_view name) {
    if (name == "support") return AssignLabel::support;
    if (name == "partial_support") return AssignLabel::partial_support;
    if (name == "no_support") return AssignLabel::no_support;
    throw ParseError("unknown assignment label: " + std::string(name));
}

struct NuggetAssignment {
    std::string question_id;
    std::string nugget_id;
    AssignLabel label = AssignLabel::no_support;
    std::string judge_model_id;
};

struct AssignConfig {
    std::string model_id = "mock-judge";
    double temperature = 0.1;
    std::size_t max_nuggets_per_call = 20;
};

namespace detail {

// Per-line `nugget_<i>: support|partial_support|no_support`.
inline std::map<std::size_t, AssignLabel> parse_assign_response(std::string_view raw,
                                                                std::size_t nugget_count) {
    std::map<std::size_t, AssignLabel> labels;
    for (const auto& raw_line : split_lines(raw)) {
        std::string line = trim(raw_line);
        std::string lower = to_lower_ascii(line);
        if (lower.rfind("nugget", 0) != 0) continue;
        std::size_t pos = 6;
        if (pos < lower.size() && (lower[pos] == '_' || lower[pos] == ' ')) ++pos;
        std::size_t num_start = pos;
        while (pos < lower.size() && lower[pos] >= '0' && lower[pos] <= '9') ++pos;
        if (pos == num_start) continue;
        std::size_t ordinal = std::stoul(lower.substr(num_start, pos - num_start));
        if (ordinal < 1 || ordinal > nugget_count) continue;
        std::size_t colon = lower.find(':', pos);
        if (colon == std::string::npos) continue;
        std::string verdict = trim(std::string_view(lower).substr(colon + 1));
        if (verdict.rfind("partial_support", 0) == 0) {
            labels[ordinal] = AssignLabel::partial_support;
        } else if (verdict.rfind("no_support", 0) == 0) {
            labels[ordinal] = AssignLabel::no_support;
        } else if (verdict.rfind("support", 0) == 0) {
            labels[ordinal] = AssignLabel::support;
        }
    }
    return labels;
}

} // namespace detail

// Exactly one 3-way label per nugget from a single judge call (batched when
// over the per-call cap). Labels missing after one re-ask become no_support
// with a warning; twice-unparseable batches are assignment errors.
inline std::vector<NuggetAssignment> assign_nuggets(const RagAnswer& answer,
                                                    const std::vector<Nugget>& nuggets,
                                                    Gateway& gateway, const AssignConfig& cfg = {}) {
    if (nuggets.empty()) throw ContractError("assignment requires at least one nugget");
    std::vector<NuggetAssignment> out;
    for (std::size_t off = 0; off < nuggets.size(); off += cfg.max_nuggets_per_call) {
        std::size_t end = std::min(nuggets.size(), off + cfg.max_nuggets_per_call);
        std::vector<std::string> texts;
        for (std::size_t i = off; i < end; ++i) texts.push_back(nuggets[i].text);

        ChatRequest req;
        req.model_id = cfg.model_id;
        req.system_text = std::string(prompts::kAssignSystem);
        req.user_text = prompts::assign_user(texts, answer.answer_text);
        req.temperature = cfg.temperature;

        auto labels = detail::parse_assign_response(gateway.complete(req).text, texts.size());
        if (labels.size() < texts.size()) {
            ChatRequest retry = req;
            retry.user_text += prompts::kReAskSuffix;
            auto second = detail::parse_assign_response(gateway.complete(retry).text, texts.size());
            if (labels.empty() && second.empty()) {
                throw ParseError("assignment failed for question " + answer.question_id +
                                 ": unparseable twice");
            }
            for (const auto& [ord, label] : second) labels[ord] = label;
        }

        std::size_t defaulted = 0;
        for (std::size_t i = off; i < end; ++i) {
            NuggetAssignment a;
            a.question_id = answer.question_id;
            a.nugget_id = nuggets[i].nugget_id;
            a.judge_model_id = cfg.model_id;
            auto it = labels.find(i - off + 1);
            if (it != labels.end()) {
                a.label = it->second;
            } else {
                a.label = AssignLabel::no_support;
                ++defaulted;
            }
            out.push_back(std::move(a));
        }
        if (defaulted > 0) {
            warn(std::to_string(defaulted) + " assignment labels missing after re-ask; " +
                 "defaulted to no_support for " + answer.question_id);
        }
    }
    return out;
}

// ---------- A_strict ----------

struct RagScore {
    std::map<std::string, double> per_question; // question_id -> A_strict
    double run_mean = 0.0;

    json to_json() const {
        return json{{"a_strict", run_mean}, {"per_question", per_question}};
    }
};

// p_i = 1 iff assignment = support (partial_support counts 0);
// A_strict = sum(p_i) / |Nuggets| per question.
inline double a_strict_question(const std::vector<NuggetAssignment>& assignments) {
    if (assignments.empty()) throw ContractError("A_strict requires at least one nugget");
    double supported = 0;
    for (const auto& a : assignments) {
        if (a.label == AssignLabel::support) supported += 1.0;
    }
    return supported / static_cast<double>(assignments.size());
}

// Run score is the mean of per-question scores; zero-nugget questions are
// excluded with a warning.
inline RagScore a_strict(const std::map<std::string, std::vector<NuggetAssignment>>& by_question) {
    RagScore score;
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& [qid, assignments] : by_question) {
        if (assignments.empty()) {
            warn("question with zero nuggets excluded from A_strict: " + qid);
            continue;
        }
        double s = a_strict_question(assignments);
        score.per_question[qid] = s;
        sum += s;
        ++counted;
    }
    if (counted > 0) score.run_mean = sum / static_cast<double>(counted);
    return score;
}

// ---------- I/O ----------

inline json rag_answer_to_json(const RagAnswer& a) {
    return json{{"question_id", a.question_id},
                {"generator_model_id", a.generator_model_id},
                {"context_doc_ids", a.context_doc_ids},
                {"answer_text", a.answer_text},
                {"prompt_hash", a.prompt_hash}};
}

inline std::vector<RagAnswer> read_rag_answers(const fs::path& path) {
    std::vector<RagAnswer> out;
    for (const auto& j : read_jsonl(path)) {
        RagAnswer a;
        a.question_id = j.at("question_id").get<std::string>();
        a.generator_model_id = j.at("generator_model_id").get<std::string>();
        a.context_doc_ids = j.at("context_doc_ids").get<std::vector<std::string>>();
        a.answer_text = j.at("answer_text").get<std::string>();
        a.prompt_hash = j.value("prompt_hash", std::string{});
        out.push_back(std::move(a));
    }
    return out;
}

inline json assignment_to_json(const NuggetAssignment& a) {
    return json{{"question_id", a.question_id},
                {"nugget_id", a.nugget_id},
                {"label", std::string(assign_label_name(a.label))},
                {"judge_model_id", a.judge_model_id}};
}

inline std::vector<NuggetAssignment> read_assignments(const fs::path& path) {
    std::vector<NuggetAssignment> out;
    for (const auto& j : read_jsonl(path)) {
        NuggetAssignment a;
        a.question_id = j.at("question_id").get<std::string>();
        a.nugget_id = j.at("nugget_id").get<std::string>();
        a.label = assign_label_from_name(j.at("label").get<std::string>());
        a.judge_model_id = j.value("judge_model_id", std::string{});
        out.push_back(std::move(a));
    }
    return out;
}

} // namespace freshstack
