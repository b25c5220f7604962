#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>

#include "freshstack/fusion.hpp"

using namespace freshstack;

namespace {

std::vector<ScoredDoc> list_of(std::initializer_list<std::pair<const char*, double>> entries) {
    std::vector<ScoredDoc> docs;
    std::uint32_t rank = 1;
    for (auto& [id, score] : entries) docs.push_back({id, score, rank++});
    return docs;
}

std::vector<ScoredDoc> random_list(std::mt19937& rng, std::size_t max_docs) {
    std::vector<ScoredDoc> docs;
    std::size_t n = rng() % (max_docs + 1);
    std::vector<int> pool(30);
    for (int i = 0; i < 30; ++i) pool[i] = i;
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
        docs.push_back({"d" + std::to_string(pool[i]),
                        static_cast<double>(rng() % 1000) / 10.0, 0});
    }
    std::sort(docs.begin(), docs.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    assign_ranks(docs);
    return docs;
}

} // namespace

TEST_CASE("min-max normalization endpoints") {
    auto out = normalize_scores(list_of({{"a", 10.0}, {"b", 5.0}, {"c", 0.0}}), 100);
    REQUIRE(out.size() == 3);
    CHECK(out[0].score == 1.0);
    CHECK(out[1].score == 0.5);
    CHECK(out[2].score == 0.0);
}

TEST_CASE("constant scores normalize to 1.0") {
    auto out = normalize_scores(list_of({{"a", 3.0}, {"b", 3.0}}), 100);
    REQUIRE(out.size() == 2);
    CHECK(out[0].score == 1.0);
    CHECK(out[1].score == 1.0);
}

TEST_CASE("normalization preserves ordering and tie structure") {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        auto docs = random_list(rng, 20);
        auto out = normalize_scores(docs, 15);
        REQUIRE(out.size() == std::min<std::size_t>(docs.size(), 15));
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i].doc_id == docs[i].doc_id);
            if (i > 0) {
                CHECK(out[i].score <= out[i - 1].score);
                // tie structure preserved
                CHECK((docs[i].score == docs[i - 1].score) == (out[i].score == out[i - 1].score));
            }
            CHECK(out[i].score >= 0.0);
            CHECK(out[i].score <= 1.0);
        }
    }
    CHECK(normalize_scores({}, 10).empty());
}

TEST_CASE("fusing two identical runs doubles scores and keeps order") {
    RetrievalRun a;
    a.run_tag = "a";
    a.by_question["q1"] = normalize_scores(list_of({{"x", 9.0}, {"y", 4.0}, {"z", 1.0}}), 100);
    RetrievalRun b = a;
    b.run_tag = "b";
    auto fused = fuse({a, b}, 100);
    CHECK(fused.run_tag == "fusion(a+b)");
    const auto& docs = fused.by_question.at("q1");
    REQUIRE(docs.size() == 3);
    CHECK(docs[0].doc_id == "x");
    CHECK(docs[0].score == 2.0);
    CHECK(docs[1].doc_id == "y");
    CHECK(docs[1].score == Catch::Approx(2.0 * 3.0 / 8.0));
    CHECK(docs[2].doc_id == "z");
}

TEST_CASE("doc at 1.0 in all four runs fuses to 4.0 at rank 1") {
    std::vector<RetrievalRun> runs(4);
    for (int m = 0; m < 4; ++m) {
        runs[m].run_tag = "m" + std::to_string(m);
        runs[m].by_question["q"] = list_of({{"top", 1.0}, {"other" , 0.2}});
    }
    auto fused = fuse(runs, 10);
    const auto& docs = fused.by_question.at("q");
    CHECK(docs[0].doc_id == "top");
    CHECK(docs[0].score == 4.0);
    CHECK(docs[0].rank == 1);
}

TEST_CASE("question-set mismatch is a contract error naming the difference") {
    RetrievalRun a;
    a.run_tag = "a";
    a.by_question["q1"] = {};
    RetrievalRun b;
    b.run_tag = "b";
    b.by_question["q2"] = {};
    try {
        fuse({a, b}, 10);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        std::string msg = e.what();
        CHECK(msg.find("q1") != std::string::npos);
        CHECK(msg.find("q2") != std::string::npos);
    }
}

TEST_CASE("fusion equals a dictionary-sum oracle on randomized instances") {
    std::mt19937 rng(77);
    for (int trial = 0; trial < 220; ++trial) {
        std::size_t n_runs = 2 + rng() % 3;
        std::vector<std::vector<ScoredDoc>> lists;
        for (std::size_t m = 0; m < n_runs; ++m) {
            lists.push_back(normalize_scores(random_list(rng, 12), 10));
        }
        std::size_t out_depth = 1 + rng() % 15;
        auto fused = fuse_lists(lists, out_depth);

        // oracle: dictionary sum then sort
        std::map<std::string, double> sums;
        for (auto& list : lists) {
            for (auto& d : list) sums[d.doc_id] += d.score;
        }
        std::vector<ScoredDoc> expected;
        for (auto& [id, s] : sums) expected.push_back({id, s, 0});
        std::sort(expected.begin(), expected.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.doc_id < b.doc_id;
        });
        if (expected.size() > out_depth) expected.resize(out_depth);

        REQUIRE(fused.size() == expected.size());
        for (std::size_t i = 0; i < fused.size(); ++i) {
            CHECK(fused[i].doc_id == expected[i].doc_id);
            CHECK(fused[i].score == expected[i].score);
            // bounds: [0, m]
            CHECK(fused[i].score >= 0.0);
            CHECK(fused[i].score <= static_cast<double>(n_runs) + 1e-12);
        }
    }
}

TEST_CASE("fusing a single run preserves its ordering") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        auto docs = normalize_scores(random_list(rng, 15), 10);
        auto fused = fuse_lists({docs}, docs.size() + 5);
        REQUIRE(fused.size() == docs.size());
        for (std::size_t i = 0; i < docs.size(); ++i) {
            CHECK(fused[i].doc_id == docs[i].doc_id);
            CHECK(fused[i].score == docs[i].score);
        }
    }
}

TEST_CASE("strictly increasing transforms leave normalized ranking unchanged") {
    std::mt19937 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        auto docs = random_list(rng, 15);
        // rank case: monotone transform exp(x/50)
        auto transformed = docs;
        for (auto& d : transformed) d.score = std::exp(d.score / 50.0);
        std::sort(transformed.begin(), transformed.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.doc_id < b.doc_id;
        });
        assign_ranks(transformed);
        auto na = normalize_scores(docs, 100);
        auto nb = normalize_scores(transformed, 100);
        REQUIRE(na.size() == nb.size());
        for (std::size_t i = 0; i < na.size(); ++i) CHECK(na[i].doc_id == nb[i].doc_id);
    }

    // affine case: values themselves are invariant
    auto docs = list_of({{"a", 7.0}, {"b", 3.0}, {"c", 1.0}});
    auto affine = docs;
    for (auto& d : affine) d.score = 4.0 * d.score + 11.0;
    auto na = normalize_scores(docs, 100);
    auto nb = normalize_scores(affine, 100);
    for (std::size_t i = 0; i < na.size(); ++i) {
        CHECK(na[i].score == Catch::Approx(nb[i].score).margin(1e-12));
    }
}
