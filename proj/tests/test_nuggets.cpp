#include <catch2/catch_amalgamated.hpp>

#include "freshstack/mock_backend.hpp"
#include "freshstack/nuggets.hpp"
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
    q.question_id = "q42";
    q.title = "Chromadb from_documents function giving error";
    q.body = "The following function was working until recently.";
    q.accepted_answer = "Use HuggingFaceEmbeddings instead.\nInitialize it with the model name.\n";
    q.topic = "langchain";
    return q;
}

} // namespace

TEST_CASE("parse_nugget_response accepts the three marker styles") {
    CHECK(parse_nugget_response("1. a\n2. b") == std::vector<std::string>{"a", "b"});
    CHECK(parse_nugget_response("1) alpha\n2) beta") == std::vector<std::string>{"alpha", "beta"});
    CHECK(parse_nugget_response("- a\n- b") == std::vector<std::string>{"a", "b"});
    CHECK(parse_nugget_response("intro chatter\n1. fact\ntrailing") ==
          std::vector<std::string>{"fact"});
}

TEST_CASE("parse_nugget_response drops later duplicates case-insensitively") {
    CHECK(parse_nugget_response("- a\n- a") == std::vector<std::string>{"a"});
    CHECK(parse_nugget_response("1. Fact\n2. fact\n3. other") ==
          std::vector<std::string>{"Fact", "other"});
}

TEST_CASE("parse_nugget_response with zero items is a parse error") {
    CHECK_THROWS_AS(parse_nugget_response(""), ParseError);
    CHECK_THROWS_AS(parse_nugget_response("no list markers here"), ParseError);
}

TEST_CASE("mixed marker fixture matches the hand-parsed oracle") {
    std::string fixture =
        "Here are the nuggets:\n"
        "1. First fact.\n"
        "2) Second fact.\n"
        "- Third fact.\n"
        "\n"
        "10. Tenth fact.\n";
    std::vector<std::string> oracle{"First fact.", "Second fact.", "Third fact.", "Tenth fact."};
    CHECK(parse_nugget_response(fixture) == oracle);
}

TEST_CASE("format-then-parse round-trip is identity") {
    std::vector<std::string> facts{"Use the new interface.", "Pin the version.", "Check the docs."};
    std::string formatted;
    for (std::size_t i = 0; i < facts.size(); ++i) {
        formatted += std::to_string(i + 1) + ". " + facts[i] + "\n";
    }
    CHECK(parse_nugget_response(formatted) == facts);
}

TEST_CASE("generate_nuggets via the mock backend") {
    GatewayFixture fx;
    auto q = sample_question();
    auto nuggets = generate_nuggets(q, fx.gateway);
    REQUIRE(nuggets.size() == 2);
    CHECK(nuggets[0].question_id == "q42");
    CHECK(nuggets[0].nugget_id == "q42:1");
    CHECK(nuggets[0].ordinal == 1);
    CHECK(nuggets[0].text == "Use HuggingFaceEmbeddings instead.");
    CHECK(nuggets[1].nugget_id == "q42:2");

    SECTION("deterministic across calls") {
        auto again = generate_nuggets(q, fx.gateway);
        REQUIRE(again.size() == nuggets.size());
        for (std::size_t i = 0; i < nuggets.size(); ++i) CHECK(again[i].text == nuggets[i].text);
    }
}

TEST_CASE("generate_nuggets caps the list at max_nuggets") {
    GatewayFixture fx;
    std::string big_list;
    for (int i = 1; i <= 15; ++i) big_list += std::to_string(i) + ". fact " + std::to_string(i) + "\n";
    fx.backend->add_rule({"big", {"q-big"}, big_list});
    auto q = sample_question();
    q.question_id = "q-big";
    NuggetizeConfig cfg;
    cfg.max_nuggets = 10;
    auto nuggets = generate_nuggets(q, fx.gateway, cfg);
    CHECK(nuggets.size() == 10);
}

TEST_CASE("generate_nuggets re-asks once then errors on garbage") {
    GatewayFixture fx;
    fx.backend->add_rule({"garbage", {"q-bad"}, "no parseable content"});
    auto q = sample_question();
    q.question_id = "q-bad";
    WarnCapture warnings;
    CHECK_THROWS_AS(generate_nuggets(q, fx.gateway), ParseError);
    CHECK(warnings.contains("re-asking"));
    // one original + one re-ask
    CHECK(fx.gateway.request_log().size() == 2);
}

TEST_CASE("question reader enforces accepted answers and unique ids") {
    auto dir = fs::temp_directory_path() / "freshstack_test_questions";
    fs::create_directories(dir);
    {
        std::vector<json> rows{question_to_json(sample_question())};
        write_jsonl(dir / "ok.jsonl", rows);
        auto qs = read_questions(dir / "ok.jsonl");
        REQUIRE(qs.size() == 1);
        CHECK(qs[0].question_id == "q42");
    }
    {
        auto q = sample_question();
        q.accepted_answer = "";
        write_jsonl(dir / "noanswer.jsonl", {question_to_json(q)});
        CHECK_THROWS_AS(read_questions(dir / "noanswer.jsonl"), IntegrityError);
    }
    {
        auto q = sample_question();
        write_jsonl(dir / "dup.jsonl", {question_to_json(q), question_to_json(q)});
        CHECK_THROWS_AS(read_questions(dir / "dup.jsonl"), IntegrityError);
    }
}

TEST_CASE("nugget quality formula cases") {
    SECTION("|N|=5, sum(B)=1, sum(A)=0, C=0 gives P=0.8, R=1.0, G=1.0") {
        NuggetQualityAnnotation ann;
        ann.question_id = "q";
        ann.a = {false, false, false, false, false};
        ann.b = {true, false, false, false, false};
        ann.c = 0;
        auto report = nugget_quality({ann});
        CHECK(report.precision == Catch::Approx(0.8).epsilon(1e-12));
        CHECK(report.recall == Catch::Approx(1.0).epsilon(1e-12));
        CHECK(report.groundedness == Catch::Approx(1.0).epsilon(1e-12));
    }

    SECTION("|N|=4, sum(B)=0, C=4 gives R=0.5") {
        NuggetQualityAnnotation ann;
        ann.question_id = "q";
        ann.a = {false, false, false, false};
        ann.b = {false, false, false, false};
        ann.c = 4;
        auto report = nugget_quality({ann});
        CHECK(report.recall == Catch::Approx(0.5).epsilon(1e-12));
        CHECK(report.precision == 1.0);
    }

    SECTION("all-redundant with C=0 defines recall as 0 with a warning") {
        NuggetQualityAnnotation ann;
        ann.question_id = "q";
        ann.a = {false, false};
        ann.b = {true, true};
        ann.c = 0;
        WarnCapture warnings;
        auto report = nugget_quality({ann});
        CHECK(report.recall == 0.0);
        CHECK(report.precision == 0.0);
        CHECK(warnings.contains("recall defined as 0"));
    }

    SECTION("zero-nugget questions are excluded with a warning") {
        NuggetQualityAnnotation empty;
        empty.question_id = "empty";
        NuggetQualityAnnotation ok;
        ok.question_id = "ok";
        ok.a = {false};
        ok.b = {false};
        WarnCapture warnings;
        auto report = nugget_quality({empty, ok});
        CHECK(report.question_count == 1);
        CHECK(report.precision == 1.0);
        CHECK(warnings.contains("zero nuggets"));
    }

    SECTION("invariant: sum(B)=0 and C=0 imply P=R=1; sum(A)=0 implies G=1") {
        std::mt19937 rng(3);
        for (int trial = 0; trial < 30; ++trial) {
            NuggetQualityAnnotation ann;
            ann.question_id = "q";
            std::size_t n = 1 + rng() % 6;
            for (std::size_t i = 0; i < n; ++i) {
                ann.a.push_back(false);
                ann.b.push_back(false);
            }
            ann.c = 0;
            auto report = nugget_quality({ann});
            CHECK(report.precision == 1.0);
            CHECK(report.recall == 1.0);
            CHECK(report.groundedness == 1.0);
        }
    }
}

TEST_CASE("annotation CSV round-trip") {
    auto dir = fs::temp_directory_path() / "freshstack_test_ann";
    fs::create_directories(dir);
    std::string csv =
        "question_id,nugget_id,A,B,C\n"
        "q1,q1:1,0,1,0\n"
        "q1,q1:2,0,0,0\n"
        "q2,q2:1,1,0,2\n";
    atomic_write_file(dir / "ann.csv", csv);
    auto anns = read_annotations_csv(dir / "ann.csv");
    REQUIRE(anns.size() == 2);
    CHECK(anns[0].question_id == "q1");
    CHECK(anns[0].b == std::vector<bool>{true, false});
    CHECK(anns[0].c == 0);
    CHECK(anns[1].c == 2);
    CHECK(anns[1].a == std::vector<bool>{true});

    // LangChain-style report fixture: shapes the macro-averaged percentages
    auto report = nugget_quality(anns);
    CHECK(report.question_count == 2);
    CHECK(report.precision == Catch::Approx((0.5 + 1.0) / 2.0));
}
