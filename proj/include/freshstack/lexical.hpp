#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "freshstack/corpus.hpp"
#include "freshstack/errors.hpp"
#include "freshstack/io.hpp"
#include "freshstack/run_file.hpp"
#include "freshstack/text.hpp"

namespace freshstack {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
};

// Immutable after build; safe for concurrent readers.
class InvertedIndex {
public:
    static InvertedIndex build(const std::vector<DocumentChunk>& corpus, Bm25Params params = {}) {
        if (corpus.empty()) throw ConfigError("cannot index an empty corpus");
        InvertedIndex idx;
        idx.params_ = params;
        idx.doc_ids_.reserve(corpus.size());
        idx.doc_lengths_.reserve(corpus.size());
        std::uint64_t total_len = 0;
        for (std::uint32_t ord = 0; ord < corpus.size(); ++ord) {
            idx.doc_ids_.push_back(corpus[ord].doc_id);
            std::map<std::string, std::uint32_t> tf;
            auto terms = analyze(corpus[ord].text);
            for (auto& t : terms) ++tf[t];
            idx.doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
            total_len += terms.size();
            for (auto& [term, freq] : tf) {
                idx.postings_[term].push_back({ord, freq});
            }
        }
        idx.avg_doc_len_ = static_cast<double>(total_len) / static_cast<double>(corpus.size());
        return idx;
    }

    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_len() const { return avg_doc_len_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const Bm25Params& params() const { return params_; }

    std::uint32_t doc_length(std::uint32_t ordinal) const { return doc_lengths_.at(ordinal); }

    std::size_t df(std::string_view term) const {
        auto it = postings_.find(std::string(term));
        return it == postings_.end() ? 0 : it->second.size();
    }

    // ln(1 + (N - df + 0.5) / (df + 0.5)): always positive.
    double idf(std::string_view term) const {
        double dfv = static_cast<double>(df(term));
        double n = static_cast<double>(doc_count());
        return std::log(1.0 + (n - dfv + 0.5) / (dfv + 0.5));
    }

    // BM25 of the given document for the analyzed query terms (duplicates
    // collapse to one clause per unique term).
    double bm25_score(const std::vector<std::string>& query_terms, std::uint32_t ordinal) const {
        if (ordinal >= doc_count()) throw ContractError("doc ordinal out of range");
        double score = 0.0;
        for (const auto& term : unique_terms(query_terms)) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            const auto& list = it->second;
            auto pit = std::lower_bound(list.begin(), list.end(), ordinal,
                                        [](const Posting& p, std::uint32_t o) { return p.doc < o; });
            if (pit == list.end() || pit->doc != ordinal) continue;
            score += term_contribution(term, pit->tf, doc_lengths_[ordinal]);
        }
        return score;
    }

    // Top-k by score, ties broken by ascending doc_id; only docs with a
    // positive score are returned.
    std::vector<ScoredDoc> search(std::string_view query, std::size_t k) const {
        if (k < 1) throw ContractError("k must be >= 1");
        auto terms = unique_terms(analyze(query));
        if (terms.empty()) return {};
        // Term-at-a-time accumulation in first-occurrence term order keeps
        // floating-point summation order identical to a per-doc oracle that
        // adds terms in the same order.
        std::vector<double> acc(doc_count(), 0.0);
        for (const auto& term : terms) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            for (const auto& p : it->second) {
                acc[p.doc] += term_contribution(term, p.tf, doc_lengths_[p.doc]);
            }
        }
        std::vector<ScoredDoc> hits;
        for (std::uint32_t ord = 0; ord < acc.size(); ++ord) {
            if (acc[ord] > 0.0) hits.push_back({doc_ids_[ord], acc[ord], 0});
        }
        return top_k(std::move(hits), k);
    }

    // ---------- serialization ----------

    void save(const fs::path& dir) const {
        fs::create_directories(dir);
        json meta{{"format", "freshstack-lexical-v1"},
                  {"doc_count", doc_count()},
                  {"avg_doc_len", avg_doc_len_},
                  {"k1", params_.k1},
                  {"b", params_.b}};
        atomic_write_file(dir / "meta.json", meta.dump(2) + "\n");

        std::string docs_body;
        for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
            docs_body += doc_ids_[i];
            docs_body += '\t';
            docs_body += std::to_string(doc_lengths_[i]);
            docs_body += '\n';
        }
        atomic_write_file(dir / "docs.tsv", docs_body);

        std::string postings_body;
        for (const auto& [term, list] : postings_) {
            postings_body += term;
            for (const auto& p : list) {
                postings_body += ' ';
                postings_body += std::to_string(p.doc);
                postings_body += ':';
                postings_body += std::to_string(p.tf);
            }
            postings_body += '\n';
        }
        atomic_write_file(dir / "postings.txt", postings_body);
    }

    static InvertedIndex load(const fs::path& dir) {
        InvertedIndex idx;
        json meta = json::parse(read_file(dir / "meta.json"));
        if (meta.value("format", std::string{}) != "freshstack-lexical-v1") {
            throw ConfigError("unrecognized lexical index format in " + dir.string());
        }
        idx.avg_doc_len_ = meta.at("avg_doc_len").get<double>();
        idx.params_.k1 = meta.at("k1").get<double>();
        idx.params_.b = meta.at("b").get<double>();

        for (const auto& line : split_lines(read_file(dir / "docs.tsv"))) {
            if (line.empty()) continue;
            std::size_t tab = line.find('\t');
            if (tab == std::string::npos) throw ParseError("bad docs.tsv line");
            idx.doc_ids_.push_back(line.substr(0, tab));
            idx.doc_lengths_.push_back(static_cast<std::uint32_t>(std::stoul(line.substr(tab + 1))));
        }
        if (idx.doc_ids_.size() != meta.at("doc_count").get<std::size_t>()) {
            throw IntegrityError("lexical index doc count mismatch");
        }

        for (const auto& line : split_lines(read_file(dir / "postings.txt"))) {
            if (line.empty()) continue;
            std::size_t sp = line.find(' ');
            if (sp == std::string::npos) throw ParseError("bad postings line");
            std::string term = line.substr(0, sp);
            auto& list = idx.postings_[term];
            std::size_t pos = sp + 1;
            while (pos < line.size()) {
                std::size_t next = line.find(' ', pos);
                if (next == std::string::npos) next = line.size();
                std::size_t colon = line.find(':', pos);
                if (colon == std::string::npos || colon >= next) throw ParseError("bad posting entry");
                Posting p;
                p.doc = static_cast<std::uint32_t>(std::stoul(line.substr(pos, colon - pos)));
                p.tf = static_cast<std::uint32_t>(std::stoul(line.substr(colon + 1, next - colon - 1)));
                list.push_back(p);
                pos = next + 1;
            }
        }
        return idx;
    }

private:
    static std::vector<std::string> unique_terms(const std::vector<std::string>& terms) {
        std::vector<std::string> out;
        for (const auto& t : terms) {
            if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
        }
        return out;
    }

    double term_contribution(const std::string& term, std::uint32_t tf, std::uint32_t doc_len) const {
        double tfd = static_cast<double>(tf);
        double len_norm = params_.k1 * (1.0 - params_.b +
                                        params_.b * static_cast<double>(doc_len) / avg_doc_len_);
        return idf(term) * (tfd * (params_.k1 + 1.0)) / (tfd + len_norm);
    }

    std::map<std::string, std::vector<Posting>> postings_;
    std::vector<std::uint32_t> doc_lengths_;
    std::vector<std::string> doc_ids_;
    double avg_doc_len_ = 0.0;
    Bm25Params params_;
};

} // namespace freshstack
