#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "freshstack/mock_backend.hpp"
#include "freshstack/rag.hpp"
#include "freshstack/warn.hpp"

using namespace freshstack;

namespace {

struct GatewayFixture {
    std::shared_ptr<MockBackend> backend = std::make_shared<MockBackend>();
    Gateway gateway{[] {
                        GatewayConfig cfg;
                        cfg.retry.backoff_ms = {0, 0, 0};
                        return cfg;
                    }(),
                    backend};
};

QuestionRecord sample_question() {
    QuestionRecord q;
    q.question_id = "q7";
    q.title = "How do I fix the embedding interface error?";
    q.body = "The call fails after upgrading.";
    q.accepted_answer = "Switch to the new embeddings class.";
    return q;
}

std::vector<Nugget> make_nuggets(std::initializer_list<const char*> texts) {
    std::vector<Nugget> out;
    std::size_t ord = 1;
    for (const char* t : texts) {
        Nugget n;
        n.question_id = "q7";
        n.ordinal = ord;
        n.nugget_id = make_nugget_id("q7", ord);
        n.text = t;
        ++ord;
        out.push_back(std::move(n));
    }
    return out;
}

} // namespace

TEST_CASE("closed-book generation has no document block") {
    GatewayFixture fx;
    auto q = sample_question();
    auto answer = generate_rag_answer(q, {}, fx.gateway);
    CHECK(answer.context_doc_ids.empty());
    CHECK(!answer.answer_text.empty());
    CHECK(answer.question_id == "q7");
    // the mock echoes the question path, not a документ reference
    CHECK(answer.answer_text.find("Reference") == std::string::npos);
}

TEST_CASE("context docs appear as delimited blocks in rank order") {
    GatewayFixture fx;
    auto q = sample_question();
    std::vector<std::pair<std::string, std::string>> context;
    for (int i = 0; i < 20; ++i) {
        context.emplace_back("repo/f" + std::to_string(i) + ".py_0_10",
                             "document body " + std::to_string(i));
    }
    auto answer = generate_rag_answer(q, context, fx.gateway);
    REQUIRE(answer.context_doc_ids.size() == 20);
    CHECK(answer.context_doc_ids.front() == "repo/f0.py_0_10");
    // mock cites every context doc in order
    std::size_t prev = 0;
    for (const auto& id : answer.context_doc_ids) {
        auto pos = answer.answer_text.find("Reference " + id + ".");
        REQUIRE(pos != std::string::npos);
        CHECK(pos >= prev);
        prev = pos;
    }

    SECTION("more than 20 docs is a contract error") {
        context.emplace_back("repo/f20.py_0_10", "x");
        CHECK_THROWS_AS(generate_rag_answer(q, context, fx.gateway), ContractError);
    }
}

TEST_CASE("context overflow drops lowest-ranked docs with a warning") {
    GatewayFixture fx;
    auto q = sample_question();
    std::vector<std::pair<std::string, std::string>> context{
        {"repo/a_0_1", "one two three four five"},
        {"repo/b_0_1", "six seven eight nine ten"},
        {"repo/c_0_1", "eleven twelve thirteen fourteen fifteen"},
    };
    RagGenerateConfig cfg;
    cfg.max_context_tokens = 10; // fits exactly two 5-token docs
    WarnCapture warnings;
    auto answer = generate_rag_answer(q, context, fx.gateway, cfg);
    CHECK(answer.context_doc_ids == std::vector<std::string>{"repo/a_0_1", "repo/b_0_1"});
    CHECK(warnings.contains("context overflow"));
}

TEST_CASE("assign_nuggets parses three-way labels") {
    GatewayFixture fx;
    auto q = sample_question();
    auto nuggets = make_nuggets({"alpha", "beta", "gamma"});
    RagAnswer answer;
    answer.question_id = "q7";
    answer.answer_text = "answer text";

    SECTION("mixed labels parse exactly") {
        fx.backend->add_rule({"mixed", {prompts::kAssignSentinel.data()},
                              "nugget_1: support\nnugget_2: partial_support\nnugget_3: no_support\n"});
        auto labels = assign_nuggets(answer, nuggets, fx.gateway);
        REQUIRE(labels.size() == 3);
        CHECK(labels[0].label == AssignLabel::support);
        CHECK(labels[1].label == AssignLabel::partial_support);
        CHECK(labels[2].label == AssignLabel::no_support);
        CHECK(labels[0].nugget_id == "q7:1");
    }

    SECTION("missing labels default to no_support with a warning") {
        fx.backend->add_rule({"partial", {prompts::kAssignSentinel.data()}, "nugget_1: support\n"});
        WarnCapture warnings;
        auto labels = assign_nuggets(answer, nuggets, fx.gateway);
        REQUIRE(labels.size() == 3);
        CHECK(labels[0].label == AssignLabel::support);
        CHECK(labels[1].label == AssignLabel::no_support);
        CHECK(labels[2].label == AssignLabel::no_support);
        CHECK(warnings.contains("defaulted to no_support"));
    }

    SECTION("wholly unparseable twice is an assignment error") {
        fx.backend->add_rule({"broken", {prompts::kAssignSentinel.data()}, "nothing useful"});
        CHECK_THROWS_AS(assign_nuggets(answer, nuggets, fx.gateway), ParseError);
    }
}

TEST_CASE("mock grader supports verbatim answers and rejects empty ones") {
    GatewayFixture fx;
    auto nuggets = make_nuggets({"Switch to the HuggingFaceEmbeddings class immediately.",
                                 "Initialize embeddings using the documented model identifier."});
    RagAnswer full;
    full.question_id = "q7";
    full.answer_text =
        "Switch to the HuggingFaceEmbeddings class immediately. "
        "Initialize embeddings using the documented model identifier.";
    auto labels = assign_nuggets(full, nuggets, fx.gateway);
    for (const auto& a : labels) CHECK(a.label == AssignLabel::support);

    RagAnswer empty;
    empty.question_id = "q7";
    empty.answer_text = "(no answer)";
    auto labels2 = assign_nuggets(empty, nuggets, fx.gateway);
    for (const auto& a : labels2) CHECK(a.label == AssignLabel::no_support);
}

TEST_CASE("a_strict formula cases") {
    auto assignment = [](AssignLabel label) {
        NuggetAssignment a;
        a.question_id = "q";
        a.label = label;
        return a;
    };

    SECTION("{support, support, partial_support} -> 2/3") {
        std::vector<NuggetAssignment> as{assignment(AssignLabel::support),
                                         assignment(AssignLabel::support),
                                         assignment(AssignLabel::partial_support)};
        CHECK(a_strict_question(as) == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    }

    SECTION("all support -> 1.0; all no_support -> 0.0") {
        CHECK(a_strict_question({assignment(AssignLabel::support)}) == 1.0);
        CHECK(a_strict_question({assignment(AssignLabel::no_support)}) == 0.0);
    }

    SECTION("randomized counting oracle") {
        std::mt19937 rng(9);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<NuggetAssignment> as;
            std::size_t n = 1 + rng() % 8;
            std::size_t support = 0;
            for (std::size_t i = 0; i < n; ++i) {
                int r = static_cast<int>(rng() % 3);
                auto label = r == 0   ? AssignLabel::support
                             : r == 1 ? AssignLabel::partial_support
                                      : AssignLabel::no_support;
                if (label == AssignLabel::support) ++support;
                as.push_back(assignment(label));
            }
            double expected = static_cast<double>(support) / static_cast<double>(n);
            CHECK(a_strict_question(as) == Catch::Approx(expected).margin(1e-12));
        }
    }

    SECTION("strictness: partial_support and no_support are interchangeable") {
        std::mt19937 rng(10);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<NuggetAssignment> as;
            std::size_t n = 1 + rng() % 8;
            for (std::size_t i = 0; i < n; ++i) {
                int r = static_cast<int>(rng() % 3);
                as.push_back(assignment(r == 0   ? AssignLabel::support
                                        : r == 1 ? AssignLabel::partial_support
                                                 : AssignLabel::no_support));
            }
            auto strict = as;
            for (auto& a : strict) {
                if (a.label == AssignLabel::partial_support) a.label = AssignLabel::no_support;
            }
            CHECK(a_strict_question(as) == a_strict_question(strict));
        }
    }

    SECTION("monotone: upgrading any label toward support never lowers the score") {
        std::vector<NuggetAssignment> as{assignment(AssignLabel::no_support),
                                         assignment(AssignLabel::partial_support),
                                         assignment(AssignLabel::support)};
        double base = a_strict_question(as);
        for (std::size_t i = 0; i < as.size(); ++i) {
            auto upgraded = as;
            upgraded[i].label = AssignLabel::support;
            CHECK(a_strict_question(upgraded) >= base);
        }
    }

    SECTION("run mean over questions; zero-nugget questions excluded") {
        std::map<std::string, std::vector<NuggetAssignment>> by_q;
        by_q["q1"] = {assignment(AssignLabel::support)};
        by_q["q2"] = {assignment(AssignLabel::no_support)};
        by_q["empty"] = {};
        WarnCapture warnings;
        auto score = a_strict(by_q);
        CHECK(score.run_mean == Catch::Approx(0.5));
        CHECK(score.per_question.size() == 2);
        CHECK(warnings.contains("zero nuggets"));
    }
}
