#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "freshstack/dense.hpp"
#include "freshstack/errors.hpp"
#include "freshstack/fusion.hpp"
#include "freshstack/gateway.hpp"
#include "freshstack/lexical.hpp"
#include "freshstack/nuggets.hpp"
#include "freshstack/prompts.hpp"
#include "freshstack/warn.hpp"

namespace freshstack {

// ---------- query variants ----------

enum class VariantKind { raw_question, sub_questions, closed_book_answer, so_answer, so_nuggets };

inline const std::vector<VariantKind>& all_variant_kinds() {
    static const std::vector<VariantKind> kinds{
        VariantKind::raw_question, VariantKind::sub_questions, VariantKind::closed_book_answer,
        VariantKind::so_answer, VariantKind::so_nuggets};
    return kinds;
}

inline std::string_view variant_name(VariantKind kind) {
    switch (kind) {
        case VariantKind::raw_question: return "raw_question";
        case VariantKind::sub_questions: return "sub_questions";
        case VariantKind::closed_book_answer: return "closed_book_answer";
        case VariantKind::so_answer: return "so_answer";
        case VariantKind::so_nuggets: return "so_nuggets";
    }
    return "unknown";
}

inline VariantKind variant_from_name(std::string_view name) {
    for (auto kind : all_variant_kinds()) {
        if (variant_name(kind) == name) return kind;
    }
    throw ContractError("unknown variant kind: " + std::string(name));
}

// so_answer and so_nuggets rely on the gold answer (oracle setting).
inline bool variant_is_oracle(VariantKind kind) {
    return kind == VariantKind::so_answer || kind == VariantKind::so_nuggets;
}

struct QueryVariant {
    VariantKind kind = VariantKind::raw_question;
    std::string text;
    bool oracle = false;
    bool available = true;
    std::string error; // set when available == false
};

struct VariantConfig {
    std::string model_id = "mock-chat";
    double temperature = 0.1;
};

// Builds one retrieval string per kind; LLM-derived kinds degrade to
// unavailable on gateway failure so pooling can proceed with the rest.
inline QueryVariant make_variant(const QuestionRecord& q, VariantKind kind, Gateway& gateway,
                                 const std::vector<Nugget>& nuggets, const VariantConfig& cfg = {}) {
    QueryVariant v;
    v.kind = kind;
    v.oracle = variant_is_oracle(kind);
    try {
        switch (kind) {
            case VariantKind::raw_question:
                v.text = q.title + "\n\n" + q.body;
                break;
            case VariantKind::so_answer:
                v.text = q.accepted_answer;
                break;
            case VariantKind::so_nuggets: {
                if (nuggets.empty()) throw ContractError("so_nuggets requires generated nuggets");
                std::string joined;
                for (const auto& n : nuggets) {
                    joined += n.text;
                    joined += '\n';
                }
                joined.pop_back();
                v.text = std::move(joined);
                break;
            }
            case VariantKind::sub_questions: {
                ChatRequest req;
                req.model_id = cfg.model_id;
                req.system_text = std::string(prompts::kSubQuestionsSystem);
                req.user_text = prompts::sub_questions_user(q.title, q.body);
                req.temperature = cfg.temperature;
                auto items = parse_nugget_response(gateway.complete(req).text);
                std::string joined;
                for (const auto& item : items) {
                    joined += item;
                    joined += '\n';
                }
                joined.pop_back();
                v.text = std::move(joined);
                break;
            }
            case VariantKind::closed_book_answer: {
                ChatRequest req;
                req.model_id = cfg.model_id;
                req.system_text = std::string(prompts::kClosedBookSystem);
                req.user_text = prompts::closed_book_user(q.title, q.body);
                req.temperature = cfg.temperature;
                v.text = gateway.complete(req).text;
                break;
            }
        }
        if (trim(v.text).empty()) throw ContractError("variant text is empty");
    } catch (const Error& e) {
        v.available = false;
        v.error = e.what();
        warn("variant " + std::string(variant_name(kind)) + " unavailable for " + q.question_id +
             ": " + v.error);
    }
    return v;
}

// ---------- retrieval stack & pooling ----------

struct RetrievalStack {
    const InvertedIndex* lexical = nullptr;
    std::vector<const DenseIndex*> dense;
    Gateway* gateway = nullptr;
    FusionConfig fusion;
};

// Per-model top-`fusion.depth` lists, min-max normalized, summed; one list is
// passed through unchanged (single-model stacks fuse trivially).
inline std::vector<ScoredDoc> retrieve_fused(const RetrievalStack& stack,
                                             const std::string& query_text,
                                             std::size_t output_depth) {
    if (stack.lexical == nullptr && stack.dense.empty()) {
        throw ConfigError("retrieval stack has no models");
    }
    std::vector<std::vector<ScoredDoc>> lists;
    if (stack.lexical != nullptr) {
        lists.push_back(
            normalize_scores(stack.lexical->search(query_text, stack.fusion.depth), stack.fusion.depth));
    }
    for (const auto* index : stack.dense) {
        if (stack.gateway == nullptr) throw ConfigError("dense retrieval requires a gateway");
        auto qvec = stack.gateway->embed_one(query_text, index->model_id(), EmbedKind::query);
        lists.push_back(
            normalize_scores(index->search(qvec, stack.fusion.depth), stack.fusion.depth));
    }
    return fuse_lists(lists, output_depth);
}

struct JudgmentPool {
    std::string question_id;
    // doc_id → variant kinds that contributed it
    std::map<std::string, std::set<VariantKind>> entries;
};

// Union of each available variant's fusion top-k with provenance tags.
inline JudgmentPool assemble_pool(const QuestionRecord& q, const std::vector<QueryVariant>& variants,
                                  const RetrievalStack& stack, std::size_t per_variant_k = 20) {
    JudgmentPool pool;
    pool.question_id = q.question_id;
    bool any_available = false;
    for (const auto& variant : variants) {
        if (!variant.available) continue;
        any_available = true;
        auto fused = retrieve_fused(stack, variant.text, per_variant_k);
        for (const auto& d : fused) pool.entries[d.doc_id].insert(variant.kind);
    }
    if (!any_available) {
        throw PipelineError("no variants available for question " + q.question_id);
    }
    return pool;
}

// ---------- support judging ----------

struct SupportJudgment {
    std::string question_id;
    std::string nugget_id;
    std::string doc_id;
    bool supported = false;
    std::string judge_model_id;
    std::string batch_id;
};

struct JudgeConfig {
    std::string model_id = "mock-judge";
    double temperature = 0.1;
    std::size_t max_docs_per_call = 20;
};

namespace detail {

struct JudgeParse {
    // (nugget ordinal 1-based, doc_id) → supported
    std::map<std::pair<std::size_t, std::string>, bool> cells;
    bool others_no = false;
    bool any_content() const { return others_no || !cells.empty(); }
};

// Tolerates per-line `nugget_<i> <doc_id>: yes|no` plus the closing
// `others: no`; anything else is ignored as judge chatter.
inline JudgeParse parse_judge_response(std::string_view raw, std::size_t nugget_count,
                                       const std::set<std::string>& doc_ids) {
    JudgeParse parsed;
    for (const auto& raw_line : split_lines(raw)) {
        std::string line = trim(raw_line);
        if (line.empty()) continue;
        std::string lower = to_lower_ascii(line);
        if (lower.rfind("others", 0) == 0 && lower.find("no") != std::string::npos) {
            parsed.others_no = true;
            continue;
        }
        if (lower.rfind("nugget", 0) != 0) continue;
        std::size_t pos = 6;
        if (pos < line.size() && (line[pos] == '_' || line[pos] == ' ')) ++pos;
        std::size_t num_start = pos;
        while (pos < line.size() && line[pos] >= '0' && line[pos] <= '9') ++pos;
        if (pos == num_start) continue;
        std::size_t ordinal = std::stoul(line.substr(num_start, pos - num_start));
        if (ordinal < 1 || ordinal > nugget_count) continue;
        while (pos < line.size() && is_ascii_space(static_cast<unsigned char>(line[pos]))) ++pos;
        std::size_t colon = line.find(':', pos);
        if (colon == std::string::npos || colon <= pos) continue;
        std::string doc_id = trim(std::string_view(line).substr(pos, colon - pos));
        if (!doc_ids.count(doc_id)) continue;
        std::string verdict = to_lower_ascii(trim(std::string_view(line).substr(colon + 1)));
        if (verdict.rfind("yes", 0) == 0) {
            parsed.cells[{ordinal, doc_id}] = true;
        } else if (verdict.rfind("no", 0) == 0) {
            parsed.cells[{ordinal, doc_id}] = false;
        }
    }
    return parsed;
}

} // namespace detail

// One chain-of-thought judge call for <= 20 docs against all nuggets; returns
// exactly |nuggets| x |docs| binary judgments. Cells missing after one re-ask
// default to unsupported with a warning.
inline std::vector<SupportJudgment> judge_support_batch(
    const QuestionRecord& q, const std::vector<Nugget>& nuggets,
    const std::vector<std::pair<std::string, std::string>>& docs, Gateway& gateway,
    const JudgeConfig& cfg = {}, std::string_view batch_id = "b0") {
    if (docs.empty() || docs.size() > cfg.max_docs_per_call) {
        throw ContractError("judge batch must contain 1..=" +
                            std::to_string(cfg.max_docs_per_call) + " docs");
    }
    if (nuggets.empty()) throw ContractError("judge batch requires at least one nugget");

    std::vector<std::string> nugget_texts;
    nugget_texts.reserve(nuggets.size());
    for (const auto& n : nuggets) nugget_texts.push_back(n.text);
    std::set<std::string> doc_id_set;
    for (const auto& [id, _] : docs) doc_id_set.insert(id);

    ChatRequest req;
    req.model_id = cfg.model_id;
    req.system_text = std::string(prompts::kJudgeSystem);
    req.user_text = prompts::judge_user(q.question_id, q.title, nugget_texts, docs);
    req.temperature = cfg.temperature;

    auto parsed = detail::parse_judge_response(gateway.complete(req).text, nuggets.size(), doc_id_set);
    bool complete = parsed.others_no || parsed.cells.size() == nuggets.size() * docs.size();
    if (!complete) {
        if (!parsed.any_content()) {
            warn("judge response unparseable, re-asking: " + q.question_id + " " +
                 std::string(batch_id));
        }
        ChatRequest retry = req;
        retry.user_text += prompts::kReAskSuffix;
        auto second = detail::parse_judge_response(gateway.complete(retry).text, nuggets.size(),
                                                   doc_id_set);
        if (!parsed.any_content() && !second.any_content()) {
            throw ParseError("judging failed for question " + q.question_id + " batch " +
                             std::string(batch_id) + ": unparseable twice");
        }
        for (const auto& [cell, value] : second.cells) parsed.cells[cell] = value;
        parsed.others_no = parsed.others_no || second.others_no;
    }

    std::vector<SupportJudgment> out;
    out.reserve(nuggets.size() * docs.size());
    std::size_t defaulted = 0;
    for (std::size_t n = 0; n < nuggets.size(); ++n) {
        for (const auto& [doc_id, _] : docs) {
            SupportJudgment j;
            j.question_id = q.question_id;
            j.nugget_id = nuggets[n].nugget_id;
            j.doc_id = doc_id;
            j.judge_model_id = cfg.model_id;
            j.batch_id = std::string(batch_id);
            auto it = parsed.cells.find({n + 1, doc_id});
            if (it != parsed.cells.end()) {
                j.supported = it->second;
            } else {
                j.supported = false;
                if (!parsed.others_no) ++defaulted;
            }
            out.push_back(std::move(j));
        }
    }
    if (defaulted > 0) {
        warn(std::to_string(defaulted) + " judge cells missing after re-ask; defaulted to " +
             "unsupported for " + q.question_id + " batch " + std::string(batch_id));
    }
    return out;
}

// Splits a pool into ceil(n / max_docs_per_call) batches in ascending doc_id
// order and judges each.
inline std::vector<SupportJudgment> judge_question(
    const QuestionRecord& q, const std::vector<Nugget>& nuggets, const JudgmentPool& pool,
    const std::map<std::string, std::string>& doc_texts, Gateway& gateway,
    const JudgeConfig& cfg = {}) {
    std::vector<std::pair<std::string, std::string>> all_docs;
    for (const auto& [doc_id, _] : pool.entries) {
        auto it = doc_texts.find(doc_id);
        if (it == doc_texts.end()) {
            throw IntegrityError("pooled doc missing from corpus: " + doc_id);
        }
        all_docs.emplace_back(doc_id, it->second);
    }
    std::vector<SupportJudgment> out;
    std::size_t batch_index = 0;
    for (std::size_t off = 0; off < all_docs.size(); off += cfg.max_docs_per_call) {
        std::size_t end = std::min(all_docs.size(), off + cfg.max_docs_per_call);
        std::vector<std::pair<std::string, std::string>> batch(all_docs.begin() + off,
                                                               all_docs.begin() + end);
        std::string batch_id = q.question_id + "#" + std::to_string(batch_index++);
        auto judged = judge_support_batch(q, nuggets, batch, gateway, cfg, batch_id);
        out.insert(out.end(), judged.begin(), judged.end());
    }
    return out;
}

// ---------- qrels ----------

inline std::optional<std::size_t> nugget_ordinal_of(std::string_view nugget_id) {
    std::size_t colon = nugget_id.rfind(':');
    if (colon == std::string_view::npos || colon + 1 >= nugget_id.size()) return std::nullopt;
    std::size_t v = 0;
    for (std::size_t i = colon + 1; i < nugget_id.size(); ++i) {
        if (nugget_id[i] < '0' || nugget_id[i] > '9') return std::nullopt;
        v = v * 10 + static_cast<std::size_t>(nugget_id[i] - '0');
    }
    return v;
}

// Binary judgments keyed by (question, nugget, document), with the derived
// question-level view as the union over nuggets.
class NuggetQrels {
public:
    void add(const std::string& question_id, const std::string& nugget_id,
             const std::string& doc_id) {
        data_[question_id][nugget_id].insert(doc_id);
    }

    bool empty() const { return data_.empty(); }

    std::vector<std::string> questions() const {
        std::vector<std::string> out;
        out.reserve(data_.size());
        for (const auto& [qid, _] : data_) out.push_back(qid);
        return out;
    }

    bool has_question(const std::string& question_id) const { return data_.count(question_id) > 0; }

    const std::map<std::string, std::set<std::string>>& nuggets_of(
        const std::string& question_id) const {
        static const std::map<std::string, std::set<std::string>> empty_map;
        auto it = data_.find(question_id);
        return it == data_.end() ? empty_map : it->second;
    }

    // derived view: exact union over the question's nuggets
    std::set<std::string> relevant_docs(const std::string& question_id) const {
        std::set<std::string> docs;
        for (const auto& [_, ds] : nuggets_of(question_id)) docs.insert(ds.begin(), ds.end());
        return docs;
    }

    std::set<std::string> docs_for_nugget(const std::string& question_id,
                                          const std::string& nugget_id) const {
        auto& nm = nuggets_of(question_id);
        auto it = nm.find(nugget_id);
        return it == nm.end() ? std::set<std::string>{} : it->second;
    }

    std::size_t row_count() const {
        std::size_t n = 0;
        for (const auto& [_, nm] : data_) {
            for (const auto& [__, ds] : nm) n += ds.size();
        }
        return n;
    }

    void erase_question(const std::string& question_id) { data_.erase(question_id); }

    // TSV rows `question_id<TAB>nugget_id<TAB>doc_id<TAB>1`, ordered by
    // (question, nugget ordinal, doc).
    std::string to_tsv() const {
        std::string out;
        for (const auto& [qid, nm] : data_) {
            std::vector<std::string> nugget_ids;
            nugget_ids.reserve(nm.size());
            for (const auto& [nid, _] : nm) nugget_ids.push_back(nid);
            std::sort(nugget_ids.begin(), nugget_ids.end(),
                      [](const std::string& a, const std::string& b) {
                          auto oa = nugget_ordinal_of(a);
                          auto ob = nugget_ordinal_of(b);
                          if (oa && ob && *oa != *ob) return *oa < *ob;
                          return a < b;
                      });
            for (const auto& nid : nugget_ids) {
                for (const auto& doc : nm.at(nid)) {
                    out += qid;
                    out += '\t';
                    out += nid;
                    out += '\t';
                    out += doc;
                    out += "\t1\n";
                }
            }
        }
        return out;
    }

    void save(const fs::path& path) const { atomic_write_file(path, to_tsv()); }

    static NuggetQrels load(const fs::path& path) {
        NuggetQrels qrels;
        std::string content = read_file(path);
        std::size_t lineno = 0;
        for (const auto& line : split_lines(content)) {
            ++lineno;
            if (line.empty()) continue;
            std::vector<std::string> cols;
            std::size_t pos = 0;
            while (pos <= line.size()) {
                std::size_t tab = line.find('\t', pos);
                if (tab == std::string::npos) tab = line.size();
                cols.push_back(line.substr(pos, tab - pos));
                pos = tab + 1;
            }
            if (cols.size() != 4 || cols[3] != "1") {
                throw ParseError("bad qrels row at " + path.string() + ":" + std::to_string(lineno));
            }
            qrels.add(cols[0], cols[1], cols[2]);
        }
        return qrels;
    }

private:
    std::map<std::string, std::map<std::string, std::set<std::string>>> data_;
};

// supported=true rows become relevance 1; duplicate (q,n,d) keys resolve by
// logical OR with a warning. Doc ids are checked against the corpus when one
// is provided.
inline NuggetQrels build_qrels(const std::vector<SupportJudgment>& judgments,
                               const std::set<std::string>* corpus_doc_ids = nullptr) {
    NuggetQrels qrels;
    std::map<std::tuple<std::string, std::string, std::string>, bool> seen;
    for (const auto& j : judgments) {
        if (corpus_doc_ids != nullptr && !corpus_doc_ids->count(j.doc_id)) {
            throw IntegrityError("judged doc absent from corpus: " + j.doc_id);
        }
        auto key = std::make_tuple(j.question_id, j.nugget_id, j.doc_id);
        auto it = seen.find(key);
        if (it != seen.end()) {
            if (it->second != j.supported) {
                warn("conflicting duplicate judgment resolved by OR: " + j.question_id + " " +
                     j.nugget_id + " " + j.doc_id);
            }
            it->second = it->second || j.supported;
        } else {
            seen.emplace(key, j.supported);
        }
    }
    for (const auto& [key, supported] : seen) {
        if (supported) qrels.add(std::get<0>(key), std::get<1>(key), std::get<2>(key));
    }
    return qrels;
}

// ---------- dataset filtering ----------

struct FilterReport {
    std::size_t initial_questions = 0;
    std::size_t removed_unsupported_questions = 0; // step 1
    std::size_t removed_unsupported_nuggets = 0;   // step 2
    std::size_t final_questions = 0;
    double step1_fraction = 0.0;
    double step2_fraction = 0.0;

    json to_json() const {
        return json{{"initial_questions", initial_questions},
                    {"removed_step1_unsupported_questions", removed_unsupported_questions},
                    {"removed_step2_unsupported_nuggets", removed_unsupported_nuggets},
                    {"final_questions", final_questions},
                    {"step1_fraction", step1_fraction},
                    {"step2_fraction", step2_fraction}};
    }
};

struct FilterResult {
    std::vector<QuestionRecord> questions;
    std::vector<Nugget> nuggets;
    NuggetQrels qrels;
    FilterReport report;
};

// Step 1 drops questions with no relevant document at all; step 2 drops
// questions with at least one unsupported nugget. Afterwards every surviving
// (question, nugget) pair has a supporting document.
inline FilterResult filter_dataset(const std::vector<QuestionRecord>& questions,
                                   const std::vector<Nugget>& nuggets, const NuggetQrels& qrels) {
    FilterResult result;
    result.report.initial_questions = questions.size();

    std::map<std::string, std::vector<const Nugget*>> nuggets_by_q;
    for (const auto& n : nuggets) nuggets_by_q[n.question_id].push_back(&n);

    std::set<std::string> survivors;
    for (const auto& q : questions) {
        if (qrels.relevant_docs(q.question_id).empty()) {
            ++result.report.removed_unsupported_questions;
            continue;
        }
        survivors.insert(q.question_id);
    }
    for (const auto& q : questions) {
        if (!survivors.count(q.question_id)) continue;
        bool all_supported = true;
        auto it = nuggets_by_q.find(q.question_id);
        if (it == nuggets_by_q.end()) {
            all_supported = false; // no nuggets at all cannot satisfy the postcondition
        } else {
            for (const auto* n : it->second) {
                if (qrels.docs_for_nugget(q.question_id, n->nugget_id).empty()) {
                    all_supported = false;
                    break;
                }
            }
        }
        if (!all_supported) {
            survivors.erase(q.question_id);
            ++result.report.removed_unsupported_nuggets;
        }
    }

    for (const auto& q : questions) {
        if (survivors.count(q.question_id)) result.questions.push_back(q);
    }
    for (const auto& n : nuggets) {
        if (survivors.count(n.question_id)) result.nuggets.push_back(n);
    }
    result.qrels = qrels;
    for (const auto& qid : qrels.questions()) {
        if (!survivors.count(qid)) result.qrels.erase_question(qid);
    }

    result.report.final_questions = result.questions.size();
    if (result.report.initial_questions > 0) {
        result.report.step1_fraction =
            static_cast<double>(result.report.removed_unsupported_questions) /
            static_cast<double>(result.report.initial_questions);
        result.report.step2_fraction =
            static_cast<double>(result.report.removed_unsupported_nuggets) /
            static_cast<double>(result.report.initial_questions);
    }
    if (result.questions.empty()) {
        warn("filtering removed every question");
    }
    return result;
}

// ---------- judgments I/O ----------

inline json judgment_to_json(const SupportJudgment& j) {
    return json{{"question_id", j.question_id}, {"nugget_id", j.nugget_id},
                {"doc_id", j.doc_id},           {"supported", j.supported},
                {"judge_model_id", j.judge_model_id}, {"batch_id", j.batch_id}};
}

inline std::vector<SupportJudgment> read_judgments(const fs::path& path) {
    std::vector<SupportJudgment> out;
    for (const auto& j : read_jsonl(path)) {
        SupportJudgment sj;
        sj.question_id = j.at("question_id").get<std::string>();
        sj.nugget_id = j.at("nugget_id").get<std::string>();
        sj.doc_id = j.at("doc_id").get<std::string>();
        sj.supported = j.at("supported").get<bool>();
        sj.judge_model_id = j.value("judge_model_id", std::string{});
        sj.batch_id = j.value("batch_id", std::string{});
        out.push_back(std::move(sj));
    }
    return out;
}

} // namespace freshstack
