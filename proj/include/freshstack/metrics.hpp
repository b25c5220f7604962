#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "freshstack/errors.hpp"
#include "freshstack/pooling.hpp"
#include "freshstack/run_file.hpp"
#include "freshstack/warn.hpp"

namespace freshstack {

// One question's binary relevance matrix J[nugget][doc], stored sparsely as
// doc -> set of supported nugget indexes. Docs outside the qrels are all-zero.
struct RelevanceMatrix {
    std::size_t nugget_count = 0;
    std::map<std::string, std::vector<std::size_t>> doc_nuggets; // sorted nugget indexes

    static RelevanceMatrix from_qrels(const NuggetQrels& qrels, const std::string& question_id) {
        RelevanceMatrix m;
        const auto& nugget_map = qrels.nuggets_of(question_id);
        std::vector<std::string> nugget_ids;
        nugget_ids.reserve(nugget_map.size());
        for (const auto& [nid, _] : nugget_map) nugget_ids.push_back(nid);
        std::sort(nugget_ids.begin(), nugget_ids.end(),
                  [](const std::string& a, const std::string& b) {
                      auto oa = nugget_ordinal_of(a);
                      auto ob = nugget_ordinal_of(b);
                      if (oa && ob && *oa != *ob) return *oa < *ob;
                      return a < b;
                  });
        m.nugget_count = nugget_ids.size();
        for (std::size_t n = 0; n < nugget_ids.size(); ++n) {
            for (const auto& doc : nugget_map.at(nugget_ids[n])) {
                m.doc_nuggets[doc].push_back(n);
            }
        }
        for (auto& [_, idxs] : m.doc_nuggets) std::sort(idxs.begin(), idxs.end());
        return m;
    }

    std::set<std::string> relevant_docs() const {
        std::set<std::string> out;
        for (const auto& [doc, _] : doc_nuggets) out.insert(doc);
        return out;
    }
};

namespace detail {

inline void check_no_duplicates(const std::vector<std::string>& ranking) {
    std::set<std::string> seen;
    for (const auto& d : ranking) {
        if (!seen.insert(d).second) throw ContractError("duplicate doc_id in ranking: " + d);
    }
}

inline double log2_discount(std::size_t rank_1based) {
    return std::log2(static_cast<double>(rank_1based) + 1.0);
}

} // namespace detail

// Gain of a doc at rank i: sum over its nuggets of (1-alpha)^(count of
// earlier docs already covering that nugget); DCG discount log2(i+1); ideal
// gain by greedy residual-gain selection with ties by ascending doc_id.
inline double alpha_ndcg_at_k(const std::vector<std::string>& ranking, const RelevanceMatrix& j,
                              std::size_t k, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw ContractError("alpha must be in [0, 1]");
    if (k < 1) throw ContractError("k must be >= 1");
    detail::check_no_duplicates(ranking);

    std::vector<std::size_t> covered(j.nugget_count, 0);
    double dcg = 0.0;
    const std::size_t depth = std::min(k, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
        auto it = j.doc_nuggets.find(ranking[i]);
        if (it == j.doc_nuggets.end()) continue;
        double gain = 0.0;
        for (std::size_t n : it->second) {
            gain += std::pow(1.0 - alpha, static_cast<double>(covered[n]));
        }
        for (std::size_t n : it->second) ++covered[n];
        dcg += gain / detail::log2_discount(i + 1);
    }

    // ideal ranking over the judged pool
    std::fill(covered.begin(), covered.end(), 0);
    std::set<std::string> pool;
    for (const auto& [doc, _] : j.doc_nuggets) pool.insert(doc);
    double idcg = 0.0;
    for (std::size_t i = 0; i < k && !pool.empty(); ++i) {
        std::string best;
        double best_gain = -1.0;
        for (const auto& doc : pool) { // ascending doc_id -> first max wins ties
            double gain = 0.0;
            for (std::size_t n : j.doc_nuggets.at(doc)) {
                gain += std::pow(1.0 - alpha, static_cast<double>(covered[n]));
            }
            if (gain > best_gain) {
                best_gain = gain;
                best = doc;
            }
        }
        for (std::size_t n : j.doc_nuggets.at(best)) ++covered[n];
        idcg += best_gain / detail::log2_discount(i + 1);
        pool.erase(best);
    }

    if (idcg == 0.0) return 0.0;
    return dcg / idcg;
}

// Fraction of the question's nuggets supported by at least one top-k doc.
inline double coverage_at_k(const std::vector<std::string>& ranking, const RelevanceMatrix& j,
                            std::size_t k) {
    if (j.nugget_count == 0) throw ContractError("coverage requires at least one nugget");
    detail::check_no_duplicates(ranking);
    std::set<std::size_t> covered;
    const std::size_t depth = std::min(k, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
        auto it = j.doc_nuggets.find(ranking[i]);
        if (it == j.doc_nuggets.end()) continue;
        covered.insert(it->second.begin(), it->second.end());
    }
    return static_cast<double>(covered.size()) / static_cast<double>(j.nugget_count);
}

// |relevant ∩ top-k| / |relevant| where relevant docs support >= 1 nugget.
inline double recall_at_k(const std::vector<std::string>& ranking, const RelevanceMatrix& j,
                          std::size_t k) {
    if (j.doc_nuggets.empty()) throw ContractError("recall requires at least one relevant doc");
    detail::check_no_duplicates(ranking);
    std::size_t hit = 0;
    const std::size_t depth = std::min(k, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (j.doc_nuggets.count(ranking[i])) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(j.doc_nuggets.size());
}

// ---------- run-level evaluation ----------

struct EvalConfig {
    double alpha = 0.5;
    std::size_t k_alpha_ndcg = 10;
    std::size_t k_coverage = 20;
    std::size_t k_recall = 50;
};

struct EvalResult {
    std::string run_tag;
    EvalConfig config;
    // question_id -> metric name -> value
    std::map<std::string, std::map<std::string, double>> per_question;
    std::map<std::string, double> macro;
    std::vector<std::string> skipped_run_questions; // present in run, absent from qrels

    json to_json() const {
        json per_q = json::object();
        for (const auto& [qid, metrics] : per_question) per_q[qid] = metrics;
        return json{{"run_tag", run_tag},
                    {"alpha", config.alpha},
                    {"k", {{"alpha_ndcg", config.k_alpha_ndcg},
                           {"coverage", config.k_coverage},
                           {"recall", config.k_recall}}},
                    {"macro", macro},
                    {"per_question", per_q},
                    {"skipped_run_questions", skipped_run_questions}};
    }
};

inline std::string metric_key(const std::string& name, std::size_t k) {
    return name + "@" + std::to_string(k);
}

// Scores a run against the qrels: alpha-nDCG@10, Coverage@20, Recall@50 by
// default. Every qrels question is evaluated (missing from the run = empty
// ranking); run questions without qrels are listed and skipped with warning.
inline EvalResult evaluate_run(const RetrievalRun& run, const NuggetQrels& qrels,
                               const EvalConfig& cfg = {}) {
    EvalResult result;
    result.run_tag = run.run_tag;
    result.config = cfg;

    for (const auto& [qid, _] : run.by_question) {
        if (!qrels.has_question(qid)) {
            result.skipped_run_questions.push_back(qid);
            warn("run question missing from qrels, skipped: " + qid);
        }
    }

    const std::string k_a = metric_key("alpha_ndcg", cfg.k_alpha_ndcg);
    const std::string k_c = metric_key("coverage", cfg.k_coverage);
    const std::string k_r = metric_key("recall", cfg.k_recall);
    double sum_a = 0, sum_c = 0, sum_r = 0;
    std::size_t evaluated = 0;
    for (const auto& qid : qrels.questions()) {
        auto j = RelevanceMatrix::from_qrels(qrels, qid);
        if (j.nugget_count == 0 || j.doc_nuggets.empty()) {
            warn("question without nuggets or relevant docs excluded: " + qid);
            continue;
        }
        std::vector<std::string> ranking;
        auto rit = run.by_question.find(qid);
        if (rit != run.by_question.end()) {
            ranking.reserve(rit->second.size());
            for (const auto& d : rit->second) ranking.push_back(d.doc_id);
        }
        double a = alpha_ndcg_at_k(ranking, j, cfg.k_alpha_ndcg, cfg.alpha);
        double c = coverage_at_k(ranking, j, cfg.k_coverage);
        double r = recall_at_k(ranking, j, cfg.k_recall);
        result.per_question[qid] = {{k_a, a}, {k_c, c}, {k_r, r}};
        sum_a += a;
        sum_c += c;
        sum_r += r;
        ++evaluated;
    }
    if (evaluated > 0) {
        const double n = static_cast<double>(evaluated);
        result.macro = {{k_a, sum_a / n}, {k_c, sum_c / n}, {k_r, sum_r / n}};
    } else {
        result.macro = {{k_a, 0.0}, {k_c, 0.0}, {k_r, 0.0}};
    }
    return result;
}

// Aligned text table, one row per run: alpha-N@10, C@20, R@50 columns.
inline std::string eval_table(const std::vector<EvalResult>& results) {
    std::size_t tag_width = 8;
    for (const auto& r : results) tag_width = std::max(tag_width, r.run_tag.size());
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-*s  %12s  %8s  %8s\n", static_cast<int>(tag_width), "run",
                  "alpha-N@10", "C@20", "R@50");
    out += buf;
    out += std::string(tag_width + 36, '-') + "\n";
    for (const auto& r : results) {
        const auto& m = r.macro;
        std::snprintf(buf, sizeof(buf), "%-*s  %12.3f  %8.3f  %8.3f\n",
                      static_cast<int>(tag_width), r.run_tag.c_str(),
                      m.at(metric_key("alpha_ndcg", r.config.k_alpha_ndcg)),
                      m.at(metric_key("coverage", r.config.k_coverage)),
                      m.at(metric_key("recall", r.config.k_recall)));
        out += buf;
    }
    return out;
}

} // namespace freshstack
