#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "freshstack/lexical.hpp"

using namespace freshstack;

namespace {

std::vector<DocumentChunk> tiny_corpus(const std::vector<std::string>& texts) {
    std::vector<DocumentChunk> corpus;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        DocumentChunk c;
        c.doc_id = "r/d" + std::to_string(i) + ".txt_0_" + std::to_string(texts[i].size() + 1);
        c.text = texts[i];
        corpus.push_back(c);
    }
    return corpus;
}

// Independent evaluation of the BM25 formula from raw texts, one doc at a
// time, adding query terms in first-occurrence order (same FP summation
// order as the index scorer).
double bm25_oracle(const std::vector<std::string>& texts, const std::string& query,
                   std::size_t doc, Bm25Params params = {}) {
    std::vector<std::vector<std::string>> docs_terms;
    double total_len = 0;
    for (const auto& t : texts) {
        docs_terms.push_back(analyze(t));
        total_len += static_cast<double>(docs_terms.back().size());
    }
    double avg_len = total_len / static_cast<double>(texts.size());
    double n = static_cast<double>(texts.size());

    std::vector<std::string> qterms;
    for (const auto& t : analyze(query)) {
        if (std::find(qterms.begin(), qterms.end(), t) == qterms.end()) qterms.push_back(t);
    }
    double score = 0.0;
    for (const auto& term : qterms) {
        double tf = 0;
        for (const auto& w : docs_terms[doc]) {
            if (w == term) ++tf;
        }
        if (tf == 0) continue;
        double df = 0;
        for (const auto& dt : docs_terms) {
            if (std::find(dt.begin(), dt.end(), term) != dt.end()) ++df;
        }
        double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        double len = static_cast<double>(docs_terms[doc].size());
        score += idf * (tf * (params.k1 + 1.0)) /
                 (tf + params.k1 * (1.0 - params.b + params.b * len / avg_len));
    }
    return score;
}

} // namespace

TEST_CASE("index statistics are hand-countable") {
    auto corpus = tiny_corpus({"a b", "b c"});
    auto idx = InvertedIndex::build(corpus);
    CHECK(idx.doc_count() == 2);
    CHECK(idx.df("b") == 2);
    CHECK(idx.df("a") == 1);
    CHECK(idx.df("zzz") == 0);

    auto idx2 = InvertedIndex::build(tiny_corpus({"a b", "b c b"}));
    CHECK(idx2.avg_doc_len() == Catch::Approx(2.5));

    CHECK_THROWS_AS(InvertedIndex::build({}), ConfigError);
}

TEST_CASE("bm25 single-doc closed form") {
    // one doc "x": tf=1, df=1, N=1, len=avglen -> score = IDF = ln(1+0.5/1.5)
    auto idx = InvertedIndex::build(tiny_corpus({"x"}));
    double idf = std::log(1.0 + 0.5 / 1.5);
    CHECK(idx.bm25_score({"x"}, 0) == Catch::Approx(idf).epsilon(1e-12));
    // absent query term contributes 0
    CHECK(idx.bm25_score({"nope"}, 0) == 0.0);
}

TEST_CASE("rare terms outscore common terms at equal tf") {
    auto texts = std::vector<std::string>{"rare common", "common", "common filler"};
    auto idx = InvertedIndex::build(tiny_corpus(texts));
    double rare = idx.bm25_score({"rare"}, 0);
    double common = idx.bm25_score({"common"}, 0);
    CHECK(rare > common);
}

TEST_CASE("extra occurrence of a query term never lowers the score") {
    // same corpus shape, doc 0 gains one extra "q" (length recomputed)
    auto low = InvertedIndex::build(tiny_corpus({"q a b", "c d"}));
    auto high = InvertedIndex::build(tiny_corpus({"q q a b", "c d"}));
    CHECK(high.bm25_score({"q"}, 0) >= low.bm25_score({"q"}, 0));
}

TEST_CASE("search ties break by ascending doc_id and k truncates") {
    auto idx = InvertedIndex::build(tiny_corpus({"t other", "t other"}));
    auto hits = idx.search("t", 10);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].doc_id < hits[1].doc_id);
    CHECK(hits[0].score == Catch::Approx(hits[1].score));
    CHECK(hits[0].rank == 1);
    CHECK(hits[1].rank == 2);

    CHECK(idx.search("t", 1).size() == 1);
    CHECK(idx.search("", 5).empty());
    CHECK(idx.search("absent", 5).empty());
}

TEST_CASE("search equals exhaustive score-and-sort oracle on random corpora") {
    std::mt19937 rng(123);
    const char* vocab[] = {"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"};
    for (int trial = 0; trial < 120; ++trial) {
        std::size_t n_docs = 2 + rng() % 19;
        std::vector<std::string> texts;
        for (std::size_t d = 0; d < n_docs; ++d) {
            std::string t;
            std::size_t words = 1 + rng() % 8;
            for (std::size_t w = 0; w < words; ++w) {
                t += vocab[rng() % 8];
                t += ' ';
            }
            texts.push_back(t);
        }
        std::string query;
        std::size_t q_words = 1 + rng() % 3;
        for (std::size_t w = 0; w < q_words; ++w) {
            query += vocab[rng() % 8];
            query += ' ';
        }

        auto corpus = tiny_corpus(texts);
        auto idx = InvertedIndex::build(corpus);
        std::size_t k = 1 + rng() % n_docs;
        auto got = idx.search(query, k);

        // brute force: score every document, keep positives, sort, truncate
        std::vector<ScoredDoc> all;
        for (std::size_t d = 0; d < n_docs; ++d) {
            double s = bm25_oracle(texts, query, d);
            if (s > 0.0) all.push_back({corpus[d].doc_id, s, 0});
        }
        auto expected = top_k(std::move(all), k);

        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].doc_id == expected[i].doc_id);
            CHECK(got[i].score == Catch::Approx(expected[i].score).margin(1e-12));
        }
    }
}

TEST_CASE("save/load round-trip preserves statistics and rankings") {
    auto corpus = tiny_corpus({"a b c", "b c d", "c d e f"});
    auto idx = InvertedIndex::build(corpus);
    auto dir = std::filesystem::temp_directory_path() / "freshstack_test_lexidx";
    std::filesystem::remove_all(dir);
    idx.save(dir);
    auto loaded = InvertedIndex::load(dir);
    CHECK(loaded.doc_count() == idx.doc_count());
    CHECK(loaded.avg_doc_len() == idx.avg_doc_len());
    auto a = idx.search("b c", 3);
    auto b = loaded.search("b c", 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].doc_id == b[i].doc_id);
        CHECK(a[i].score == b[i].score);
    }

    // rebuilding the same corpus yields identical serialized bytes
    auto dir2 = std::filesystem::temp_directory_path() / "freshstack_test_lexidx2";
    std::filesystem::remove_all(dir2);
    InvertedIndex::build(corpus).save(dir2);
    CHECK(file_sha256(dir / "postings.txt") == file_sha256(dir2 / "postings.txt"));
    CHECK(file_sha256(dir / "docs.tsv") == file_sha256(dir2 / "docs.tsv"));
}
