#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "freshstack/metrics.hpp"

using namespace freshstack;

namespace {

// Random instance: <= 8 docs, <= 5 nuggets, random binary J.
RelevanceMatrix random_matrix(std::mt19937& rng, std::vector<std::string>& docs_out) {
    RelevanceMatrix m;
    m.nugget_count = 1 + rng() % 5;
    std::size_t n_docs = 1 + rng() % 8;
    docs_out.clear();
    for (std::size_t d = 0; d < n_docs; ++d) docs_out.push_back("d" + std::to_string(d));
    for (std::size_t d = 0; d < n_docs; ++d) {
        std::vector<std::size_t> supported;
        for (std::size_t n = 0; n < m.nugget_count; ++n) {
            if (rng() % 2 == 0) supported.push_back(n);
        }
        if (!supported.empty()) m.doc_nuggets[docs_out[d]] = supported;
    }
    return m;
}

std::vector<std::string> shuffled(std::vector<std::string> docs, std::mt19937& rng) {
    std::shuffle(docs.begin(), docs.end(), rng);
    return docs;
}

} // namespace

TEST_CASE("alpha-nDCG analytic cases") {
    SECTION("single nugget, single relevant doc at rank 1 scores 1.0") {
        RelevanceMatrix j;
        j.nugget_count = 1;
        j.doc_nuggets["d1"] = {0};
        CHECK(alpha_ndcg_at_k({"d1", "d2", "d3"}, j, 10, 0.5) == 1.0);
    }

    SECTION("two docs supporting the same sole nugget, ranked 1-2, alpha=0.5") {
        RelevanceMatrix j;
        j.nugget_count = 1;
        j.doc_nuggets["a"] = {0};
        j.doc_nuggets["b"] = {0};
        // DCG = 1 + 0.5/log2(3); ideal ranking is the same multiset -> 1.0
        double score = alpha_ndcg_at_k({"a", "b"}, j, 10, 0.5);
        CHECK(score == Catch::Approx(1.0).margin(1e-12));
        double dcg = 1.0 + 0.5 / std::log2(3.0);
        double idcg = dcg;
        CHECK(score == Catch::Approx(dcg / idcg).margin(1e-12));
    }

    SECTION("no relevant docs gives IDCG=0 and score 0") {
        RelevanceMatrix j;
        j.nugget_count = 2;
        CHECK(alpha_ndcg_at_k({"d1", "d2"}, j, 10, 0.5) == 0.0);
    }

    SECTION("duplicate doc ids are a contract error") {
        RelevanceMatrix j;
        j.nugget_count = 1;
        j.doc_nuggets["d1"] = {0};
        CHECK_THROWS_AS(alpha_ndcg_at_k({"d1", "d1"}, j, 10, 0.5), ContractError);
    }

    SECTION("redundant doc is penalized by (1-alpha)") {
        RelevanceMatrix j;
        j.nugget_count = 2;
        j.doc_nuggets["fresh"] = {1};
        j.doc_nuggets["first"] = {0};
        j.doc_nuggets["dup"] = {0};
        // ranking [first, dup] vs [first, fresh]: fresh covers a new nugget
        double with_dup = alpha_ndcg_at_k({"first", "dup"}, j, 10, 0.5);
        double with_fresh = alpha_ndcg_at_k({"first", "fresh"}, j, 10, 0.5);
        CHECK(with_fresh > with_dup);
    }
}

TEST_CASE("alpha=0 reduces to plain nDCG with nugget-count gains") {
    std::mt19937 rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> docs;
        auto j = random_matrix(rng, docs);
        auto ranking = shuffled(docs, rng);
        std::size_t k = 1 + rng() % 10;
        double got = alpha_ndcg_at_k(ranking, j, k, 0.0);

        // independent plain-nDCG oracle: gain(d) = number of supported nuggets
        auto gain = [&](const std::string& d) {
            auto it = j.doc_nuggets.find(d);
            return it == j.doc_nuggets.end() ? 0.0 : static_cast<double>(it->second.size());
        };
        double dcg = 0;
        for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
            dcg += gain(ranking[i]) / std::log2(static_cast<double>(i) + 2.0);
        }
        std::vector<double> gains;
        for (const auto& [d, _] : j.doc_nuggets) gains.push_back(gain(d));
        std::sort(gains.rbegin(), gains.rend());
        double idcg = 0;
        for (std::size_t i = 0; i < std::min(k, gains.size()); ++i) {
            idcg += gains[i] / std::log2(static_cast<double>(i) + 2.0);
        }
        double expected = idcg == 0 ? 0.0 : dcg / idcg;
        CHECK(got == Catch::Approx(expected).margin(1e-9));
    }
}

TEST_CASE("coverage analytic and oracle cases") {
    RelevanceMatrix j;
    j.nugget_count = 3;
    j.doc_nuggets["d1"] = {0, 1};
    j.doc_nuggets["d2"] = {2};
    j.doc_nuggets["d3"] = {0};

    SECTION("top-k covering all nuggets scores 1.0") {
        CHECK(coverage_at_k({"d1", "d2"}, j, 2) == 1.0);
    }
    SECTION("no relevant docs in top-k scores 0.0") {
        CHECK(coverage_at_k({"x", "y"}, j, 2) == 0.0);
    }
    SECTION("partial coverage") {
        CHECK(coverage_at_k({"d1", "x"}, j, 2) == Catch::Approx(2.0 / 3.0));
    }
    SECTION("brute-force union oracle on random instances") {
        std::mt19937 rng(66);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<std::string> docs;
            auto m = random_matrix(rng, docs);
            auto ranking = shuffled(docs, rng);
            std::size_t k = 1 + rng() % 10;
            std::set<std::size_t> covered;
            for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
                auto it = m.doc_nuggets.find(ranking[i]);
                if (it != m.doc_nuggets.end()) covered.insert(it->second.begin(), it->second.end());
            }
            double expected =
                static_cast<double>(covered.size()) / static_cast<double>(m.nugget_count);
            CHECK(coverage_at_k(ranking, m, k) == Catch::Approx(expected).margin(1e-12));
        }
    }
}

TEST_CASE("recall analytic and oracle cases") {
    RelevanceMatrix j;
    j.nugget_count = 2;
    j.doc_nuggets["d1"] = {0};
    j.doc_nuggets["d2"] = {1};

    SECTION("all relevant docs within top-k scores 1.0") {
        CHECK(recall_at_k({"d1", "d2", "x"}, j, 3) == 1.0);
    }
    SECTION("k=1 with one of two relevant found scores 0.5") {
        CHECK(recall_at_k({"d1", "d2"}, j, 1) == 0.5);
    }
    SECTION("zero relevant docs is a contract violation") {
        RelevanceMatrix empty;
        empty.nugget_count = 1;
        CHECK_THROWS_AS(recall_at_k({"d1"}, empty, 1), ContractError);
    }
    SECTION("brute-force intersection oracle") {
        std::mt19937 rng(67);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<std::string> docs;
            auto m = random_matrix(rng, docs);
            if (m.doc_nuggets.empty()) continue;
            auto ranking = shuffled(docs, rng);
            std::size_t k = 1 + rng() % 10;
            std::size_t hit = 0;
            for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
                if (m.doc_nuggets.count(ranking[i])) ++hit;
            }
            double expected = static_cast<double>(hit) / static_cast<double>(m.doc_nuggets.size());
            CHECK(recall_at_k(ranking, m, k) == Catch::Approx(expected).margin(1e-12));
        }
    }
}

TEST_CASE("metric invariants") {
    std::mt19937 rng(68);

    SECTION("coverage and recall are non-decreasing in k") {
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<std::string> docs;
            auto m = random_matrix(rng, docs);
            if (m.doc_nuggets.empty()) continue;
            auto ranking = shuffled(docs, rng);
            double prev_c = 0, prev_r = 0;
            for (std::size_t k = 1; k <= ranking.size() + 2; ++k) {
                double c = coverage_at_k(ranking, m, k);
                double r = recall_at_k(ranking, m, k);
                CHECK(c >= prev_c - 1e-12);
                CHECK(r >= prev_r - 1e-12);
                prev_c = c;
                prev_r = r;
            }
        }
    }

    SECTION("permuting docs below rank k leaves all @k metrics unchanged") {
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<std::string> docs;
            auto m = random_matrix(rng, docs);
            for (int extra = 0; extra < 6; ++extra) docs.push_back("pad" + std::to_string(extra));
            auto ranking = shuffled(docs, rng);
            std::size_t k = 1 + rng() % (ranking.size() - 1);
            auto permuted = ranking;
            std::shuffle(permuted.begin() + static_cast<long>(k), permuted.end(), rng);
            if (!m.doc_nuggets.empty()) {
                CHECK(alpha_ndcg_at_k(ranking, m, k, 0.5) ==
                      Catch::Approx(alpha_ndcg_at_k(permuted, m, k, 0.5)).margin(1e-12));
                CHECK(recall_at_k(ranking, m, k) == recall_at_k(permuted, m, k));
            }
            CHECK(coverage_at_k(ranking, m, k) == coverage_at_k(permuted, m, k));
        }
    }

    SECTION("all metrics stay within [0, 1]") {
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<std::string> docs;
            auto m = random_matrix(rng, docs);
            auto ranking = shuffled(docs, rng);
            std::size_t k = 1 + rng() % 12;
            double a = alpha_ndcg_at_k(ranking, m, k, static_cast<double>(rng() % 101) / 100.0);
            CHECK(a >= 0.0);
            CHECK(a <= 1.0 + 1e-12);
            double c = coverage_at_k(ranking, m, k);
            CHECK(c >= 0.0);
            CHECK(c <= 1.0);
            if (!m.doc_nuggets.empty()) {
                double r = recall_at_k(ranking, m, k);
                CHECK(r >= 0.0);
                CHECK(r <= 1.0);
            }
        }
    }
}

TEST_CASE("evaluate_run end-to-end semantics") {
    NuggetQrels qrels;
    qrels.add("q1", "q1:1", "d1");
    qrels.add("q1", "q1:2", "d2");
    qrels.add("q2", "q2:1", "d9");

    RetrievalRun run;
    run.run_tag = "test-run";
    run.by_question["q1"] = {{"d1", 2.0, 1}, {"d2", 1.0, 2}};
    run.by_question["q2"] = {{"x", 1.0, 1}};
    run.by_question["q3"] = {{"d1", 1.0, 1}}; // not in qrels

    WarnCapture warnings;
    auto result = evaluate_run(run, qrels);
    CHECK(result.run_tag == "test-run");
    CHECK(result.skipped_run_questions == std::vector<std::string>{"q3"});
    CHECK(warnings.contains("q3"));
    REQUIRE(result.per_question.count("q1"));
    CHECK(result.per_question.at("q1").at("alpha_ndcg@10") == 1.0);
    CHECK(result.per_question.at("q1").at("coverage@20") == 1.0);
    CHECK(result.per_question.at("q1").at("recall@50") == 1.0);
    CHECK(result.per_question.at("q2").at("recall@50") == 0.0);
    CHECK(result.macro.at("recall@50") == Catch::Approx(0.5));

    SECTION("empty run scores all zeros over qrels questions") {
        RetrievalRun empty;
        empty.run_tag = "empty";
        auto r = evaluate_run(empty, qrels);
        CHECK(r.macro.at("alpha_ndcg@10") == 0.0);
        CHECK(r.macro.at("coverage@20") == 0.0);
        CHECK(r.macro.at("recall@50") == 0.0);
        CHECK(r.per_question.size() == 2);
    }

    SECTION("macro-average equals recomputation without a removed question") {
        auto full = evaluate_run(run, qrels);
        NuggetQrels only_q1;
        only_q1.add("q1", "q1:1", "d1");
        only_q1.add("q1", "q1:2", "d2");
        RetrievalRun run1;
        run1.run_tag = run.run_tag;
        run1.by_question["q1"] = run.by_question["q1"];
        auto partial = evaluate_run(run1, only_q1);
        double mean_q1 = partial.macro.at("recall@50");
        double reconstructed =
            (mean_q1 + full.per_question.at("q2").at("recall@50")) / 2.0;
        CHECK(full.macro.at("recall@50") == Catch::Approx(reconstructed).margin(1e-12));
    }
}

TEST_CASE("eval table renders one aligned row per run") {
    NuggetQrels qrels;
    qrels.add("q1", "q1:1", "d1");
    RetrievalRun run;
    run.run_tag = "bm25";
    run.by_question["q1"] = {{"d1", 1.0, 1}};
    auto result = evaluate_run(run, qrels);
    auto table = eval_table({result});
    CHECK(table.find("bm25") != std::string::npos);
    CHECK(table.find("alpha-N@10") != std::string::npos);
    CHECK(table.find("1.000") != std::string::npos);
}
