#pragma once

#include <algorithm>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "freshstack/errors.hpp"
#include "freshstack/run_file.hpp"

namespace freshstack {

enum class Normalization { min_max };

struct FusionConfig {
    std::size_t depth = 100; // entries retained per model before normalizing
    Normalization normalization = Normalization::min_max;
    std::size_t output_depth = 100;
};

// Per-question min-max over the retained top-`depth` entries. A constant
// list maps to all 1.0 so a unanimous retriever stays influential. Ordering
// is unchanged.
inline std::vector<ScoredDoc> normalize_scores(std::vector<ScoredDoc> docs, std::size_t depth) {
    if (docs.size() > depth) docs.resize(depth);
    if (docs.empty()) return docs;
    double lo = docs.front().score;
    double hi = docs.front().score;
    for (const auto& d : docs) {
        lo = std::min(lo, d.score);
        hi = std::max(hi, d.score);
    }
    if (hi == lo) {
        for (auto& d : docs) d.score = 1.0;
    } else {
        for (auto& d : docs) d.score = (d.score - lo) / (hi - lo);
    }
    assign_ranks(docs);
    return docs;
}

inline RetrievalRun normalize_run(const RetrievalRun& run, std::size_t depth) {
    RetrievalRun out;
    out.run_tag = run.run_tag;
    for (const auto& [qid, docs] : run.by_question) {
        out.by_question[qid] = normalize_scores(docs, depth);
    }
    return out;
}

// Sum of normalized scores; a document absent from a model's retained list
// contributes 0. Top output_depth by fused score, ties by ascending doc_id.
inline std::vector<ScoredDoc> fuse_lists(const std::vector<std::vector<ScoredDoc>>& lists,
                                         std::size_t output_depth) {
    std::map<std::string, double> sums;
    for (const auto& list : lists) {
        for (const auto& d : list) sums[d.doc_id] += d.score;
    }
    std::vector<ScoredDoc> fused;
    fused.reserve(sums.size());
    for (const auto& [doc_id, score] : sums) fused.push_back({doc_id, score, 0});
    return top_k(std::move(fused), output_depth);
}

inline std::string fusion_tag(const std::vector<std::string>& tags) {
    std::string tag = "fusion(";
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (i > 0) tag += '+';
        tag += tags[i];
    }
    tag += ')';
    return tag;
}

// Fuses already-normalized runs over the same question set.
inline RetrievalRun fuse(const std::vector<RetrievalRun>& runs, std::size_t output_depth) {
    if (runs.size() < 2) throw ContractError("fusion requires at least two runs");
    std::set<std::string> questions;
    for (const auto& [qid, _] : runs.front().by_question) questions.insert(qid);
    for (const auto& run : runs) {
        std::set<std::string> qs;
        for (const auto& [qid, _] : run.by_question) qs.insert(qid);
        if (qs != questions) {
            std::vector<std::string> diff;
            std::set_symmetric_difference(questions.begin(), questions.end(), qs.begin(), qs.end(),
                                          std::back_inserter(diff));
            std::string msg = "question sets differ between fused runs:";
            for (const auto& q : diff) msg += ' ' + q;
            throw ContractError(msg);
        }
    }
    RetrievalRun out;
    std::vector<std::string> tags;
    tags.reserve(runs.size());
    for (const auto& r : runs) tags.push_back(r.run_tag);
    out.run_tag = fusion_tag(tags);
    for (const auto& qid : questions) {
        std::vector<std::vector<ScoredDoc>> lists;
        lists.reserve(runs.size());
        for (const auto& r : runs) lists.push_back(r.by_question.at(qid));
        out.by_question[qid] = fuse_lists(lists, output_depth);
    }
    return out;
}

} // namespace freshstack
