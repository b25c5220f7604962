#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "freshstack/errors.hpp"
#include "freshstack/gateway.hpp"
#include "freshstack/io.hpp"
#include "freshstack/prompts.hpp"
#include "freshstack/text.hpp"
#include "freshstack/warn.hpp"

namespace freshstack {

struct QuestionRecord {
    std::string question_id;
    std::string title;
    std::string body;
    std::string accepted_answer;
    std::string asked_at; // ISO date, provenance only
    std::string topic;
};

struct Nugget {
    std::string question_id;
    std::string nugget_id; // "{question_id}:{ordinal}"
    std::size_t ordinal = 0; // 1-based
    std::string text;
};

inline std::string make_nugget_id(std::string_view question_id, std::size_t ordinal) {
    return std::string(question_id) + ":" + std::to_string(ordinal);
}

// ---------- questions I/O ----------

inline QuestionRecord question_from_json(const json& j) {
    QuestionRecord q;
    q.question_id = j.at("question_id").get<std::string>();
    q.title = j.at("title").get<std::string>();
    q.body = j.at("body").get<std::string>();
    q.accepted_answer = j.at("accepted_answer").get<std::string>();
    q.asked_at = j.value("asked_at", std::string{});
    q.topic = j.value("topic", std::string{});
    return q;
}

inline json question_to_json(const QuestionRecord& q) {
    return json{{"question_id", q.question_id}, {"title", q.title},
                {"body", q.body},               {"accepted_answer", q.accepted_answer},
                {"asked_at", q.asked_at},       {"topic", q.topic}};
}

// Only questions with an accepted answer are admitted; ids must be unique.
inline std::vector<QuestionRecord> read_questions(const fs::path& path) {
    std::vector<QuestionRecord> out;
    std::set<std::string> seen;
    for (const auto& j : read_jsonl(path)) {
        QuestionRecord q = question_from_json(j);
        if (q.accepted_answer.empty()) {
            throw IntegrityError("question without accepted answer: " + q.question_id);
        }
        if (!seen.insert(q.question_id).second) {
            throw IntegrityError("duplicate question_id: " + q.question_id);
        }
        out.push_back(std::move(q));
    }
    return out;
}

// ---------- nugget parsing & generation ----------

// Accepts "1.", "1)" and "-" list markers; drops later case-insensitive
// duplicates; zero parsed items is a parse error.
inline std::vector<std::string> parse_nugget_response(std::string_view raw) {
    std::vector<std::string> items;
    std::set<std::string> seen;
    for (const auto& raw_line : split_lines(raw)) {
        std::string line = trim(raw_line);
        if (line.empty()) continue;
        std::string_view rest;
        if (line[0] == '-') {
            rest = std::string_view(line).substr(1);
        } else {
            std::size_t i = 0;
            while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
            if (i == 0 || i >= line.size() || (line[i] != '.' && line[i] != ')')) continue;
            rest = std::string_view(line).substr(i + 1);
        }
        std::string text = trim(rest);
        if (text.empty()) continue;
        if (!seen.insert(to_lower_ascii(text)).second) continue;
        items.push_back(std::move(text));
    }
    if (items.empty()) throw ParseError("no nuggets parsed from response");
    return items;
}

struct NuggetizeConfig {
    std::string model_id = "mock-chat";
    std::size_t max_nuggets = 10;
    double temperature = 0.1;
};

// One LLM call (plus one re-ask on parse failure); parsed list capped at
// max_nuggets.
inline std::vector<Nugget> generate_nuggets(const QuestionRecord& q, Gateway& gateway,
                                            const NuggetizeConfig& cfg = {}) {
    ChatRequest req;
    req.model_id = cfg.model_id;
    req.system_text = std::string(prompts::kNuggetizeSystem);
    req.user_text =
        prompts::nuggetize_user(q.question_id, q.title, q.body, q.accepted_answer, cfg.max_nuggets);
    req.temperature = cfg.temperature;

    std::vector<std::string> texts;
    try {
        texts = parse_nugget_response(gateway.complete(req).text);
    } catch (const ParseError&) {
        warn("nuggetize parse failure, re-asking: " + q.question_id);
        ChatRequest retry = req;
        retry.user_text += prompts::kReAskSuffix;
        try {
            texts = parse_nugget_response(gateway.complete(retry).text);
        } catch (const ParseError&) {
            throw ParseError("nuggetization failed for question " + q.question_id +
                             ": unparseable response after re-ask");
        }
    }
    if (texts.size() > cfg.max_nuggets) texts.resize(cfg.max_nuggets);

    std::vector<Nugget> nuggets;
    nuggets.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        Nugget n;
        n.question_id = q.question_id;
        n.ordinal = i + 1;
        n.nugget_id = make_nugget_id(q.question_id, n.ordinal);
        // single declarative statement: internal newlines never survive the
        // line-based parser, asserted here as the type invariant
        n.text = texts[i];
        nuggets.push_back(std::move(n));
    }
    return nuggets;
}

// ---------- nuggets I/O ----------

inline json nugget_to_json(const Nugget& n, std::string_view prompt_hash, std::string_view model_id) {
    return json{{"question_id", n.question_id}, {"nugget_id", n.nugget_id},
                {"ordinal", n.ordinal},         {"text", n.text},
                {"prompt_hash", prompt_hash},   {"model_id", model_id}};
}

inline std::vector<Nugget> read_nuggets(const fs::path& path) {
    std::vector<Nugget> out;
    for (const auto& j : read_jsonl(path)) {
        Nugget n;
        n.question_id = j.at("question_id").get<std::string>();
        n.nugget_id = j.at("nugget_id").get<std::string>();
        n.ordinal = j.at("ordinal").get<std::size_t>();
        n.text = j.at("text").get<std::string>();
        out.push_back(std::move(n));
    }
    return out;
}

inline std::map<std::string, std::vector<Nugget>> nuggets_by_question(std::vector<Nugget> nuggets) {
    std::map<std::string, std::vector<Nugget>> by_q;
    for (auto& n : nuggets) by_q[n.question_id].push_back(std::move(n));
    for (auto& [qid, list] : by_q) {
        std::sort(list.begin(), list.end(),
                  [](const Nugget& a, const Nugget& b) { return a.ordinal < b.ordinal; });
    }
    return by_q;
}

// ---------- quality metrics ----------

// Expert annotation of one question's nuggets: A = hallucinated,
// B = minor/redundant, C = additional nuggets needed to cover the answer.
struct NuggetQualityAnnotation {
    std::string question_id;
    std::vector<bool> a; // per nugget, ordinal order
    std::vector<bool> b;
    int c = 0;
};

struct QualityReport {
    double precision = 0.0;
    double recall = 0.0;
    double groundedness = 0.0;
    std::size_t question_count = 0;
};

// P = (|N|-ΣB)/|N|, R = (|N|-ΣB)/(|N|-ΣB+C), G = (|N|-ΣA)/|N|,
// macro-averaged over questions.
inline QualityReport nugget_quality(const std::vector<NuggetQualityAnnotation>& annotations) {
    QualityReport report;
    double p_sum = 0, r_sum = 0, g_sum = 0;
    for (const auto& ann : annotations) {
        if (ann.a.size() != ann.b.size()) {
            throw ContractError("A/B annotation length mismatch for " + ann.question_id);
        }
        if (ann.c < 0) throw ContractError("C must be >= 0 for " + ann.question_id);
        const double n = static_cast<double>(ann.a.size());
        if (n == 0) {
            warn("question with zero nuggets excluded from quality metrics: " + ann.question_id);
            continue;
        }
        double sum_a = 0, sum_b = 0;
        for (bool v : ann.a) sum_a += v ? 1 : 0;
        for (bool v : ann.b) sum_b += v ? 1 : 0;
        double kept = n - sum_b;
        p_sum += kept / n;
        double r_den = kept + static_cast<double>(ann.c);
        if (r_den == 0) {
            warn("all nuggets redundant and C=0; recall defined as 0 for " + ann.question_id);
        } else {
            r_sum += kept / r_den;
        }
        g_sum += (n - sum_a) / n;
        ++report.question_count;
    }
    if (report.question_count > 0) {
        const double q = static_cast<double>(report.question_count);
        report.precision = p_sum / q;
        report.recall = r_sum / q;
        report.groundedness = g_sum / q;
    }
    return report;
}

// Annotations CSV: question_id,nugget_id,A,B,C with a consistent per-question
// C repeated on each row.
inline std::vector<NuggetQualityAnnotation> read_annotations_csv(const fs::path& path) {
    std::string content = read_file(path);
    std::map<std::string, NuggetQualityAnnotation> by_q;
    std::vector<std::string> order;
    std::size_t lineno = 0;
    for (const auto& line : split_lines(content)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (lineno == 1 && t.rfind("question_id", 0) == 0) continue; // header
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (pos <= t.size()) {
            std::size_t comma = t.find(',', pos);
            if (comma == std::string::npos) comma = t.size();
            cols.push_back(trim(std::string_view(t).substr(pos, comma - pos)));
            pos = comma + 1;
        }
        if (cols.size() != 5) {
            throw ParseError("bad annotation row at " + path.string() + ":" + std::to_string(lineno));
        }
        auto& ann = by_q[cols[0]];
        if (ann.question_id.empty()) {
            ann.question_id = cols[0];
            ann.c = std::stoi(cols[4]);
            order.push_back(cols[0]);
        } else if (ann.c != std::stoi(cols[4])) {
            throw ParseError("inconsistent C for question " + cols[0]);
        }
        ann.a.push_back(cols[2] == "1");
        ann.b.push_back(cols[3] == "1");
    }
    std::vector<NuggetQualityAnnotation> out;
    out.reserve(order.size());
    for (const auto& qid : order) out.push_back(by_q[qid]);
    return out;
}

} // namespace freshstack
