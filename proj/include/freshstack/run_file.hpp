#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "freshstack/errors.hpp"
#include "freshstack/io.hpp"

namespace freshstack {

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
    std::uint32_t rank = 0; // 1-based
};

// Per-question ranked lists plus the run tag; serialized in TREC run format.
struct RetrievalRun {
    std::string run_tag;
    std::map<std::string, std::vector<ScoredDoc>> by_question;
};

// Scores non-increasing, ranks consecutive from 1, doc ids unique.
inline void validate_ranked_list(const std::vector<ScoredDoc>& docs) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (docs[i].rank != i + 1) throw ContractError("ranks must be consecutive from 1");
        if (i > 0 && docs[i].score > docs[i - 1].score + 1e-12) {
            throw ContractError("scores must be non-increasing");
        }
        if (!seen.insert(docs[i].doc_id).second) {
            throw ContractError("duplicate doc_id in ranked list: " + docs[i].doc_id);
        }
    }
}

inline void assign_ranks(std::vector<ScoredDoc>& docs) {
    for (std::size_t i = 0; i < docs.size(); ++i) docs[i].rank = static_cast<std::uint32_t>(i + 1);
}

// Sorts by (score desc, doc_id asc), truncates to k, assigns 1-based ranks.
inline std::vector<ScoredDoc> top_k(std::vector<ScoredDoc> docs, std::size_t k) {
    std::sort(docs.begin(), docs.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (docs.size() > k) docs.resize(k);
    assign_ranks(docs);
    return docs;
}

inline std::string format_score(double score) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", score);
    return buf;
}

// One line per entry: `qid Q0 doc_id rank score run_tag`.
inline std::string to_trec(const RetrievalRun& run) {
    std::string out;
    for (const auto& [qid, docs] : run.by_question) {
        for (const auto& d : docs) {
            out += qid;
            out += " Q0 ";
            out += d.doc_id;
            out += ' ';
            out += std::to_string(d.rank);
            out += ' ';
            out += format_score(d.score);
            out += ' ';
            out += run.run_tag;
            out += '\n';
        }
    }
    return out;
}

inline void write_trec(const RetrievalRun& run, const fs::path& path) {
    atomic_write_file(path, to_trec(run));
}

inline RetrievalRun read_trec(const fs::path& path) {
    RetrievalRun run;
    std::string content = read_file(path);
    std::size_t pos = 0;
    std::size_t lineno = 0;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        std::string_view line(content.data() + pos,
                              (nl == std::string::npos ? content.size() : nl) - pos);
        pos = (nl == std::string::npos) ? content.size() : nl + 1;
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t fpos = 0;
        while (fpos < line.size()) {
            std::size_t sp = line.find(' ', fpos);
            if (sp == std::string_view::npos) sp = line.size();
            if (sp > fpos) fields.emplace_back(line.substr(fpos, sp - fpos));
            fpos = sp + 1;
        }
        if (fields.size() != 6 || fields[1] != "Q0") {
            throw ParseError("bad TREC run line at " + path.string() + ":" + std::to_string(lineno));
        }
        ScoredDoc d;
        d.doc_id = fields[2];
        d.rank = static_cast<std::uint32_t>(std::stoul(fields[3]));
        d.score = std::stod(fields[4]);
        run.by_question[fields[0]].push_back(std::move(d));
        run.run_tag = fields[5];
    }
    for (auto& [qid, docs] : run.by_question) {
        std::sort(docs.begin(), docs.end(),
                  [](const ScoredDoc& a, const ScoredDoc& b) { return a.rank < b.rank; });
        validate_ranked_list(docs);
    }
    return run;
}

} // namespace freshstack
