#pragma once

#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "freshstack/config.hpp"
#include "freshstack/corpus.hpp"
#include "freshstack/dense.hpp"
#include "freshstack/fusion.hpp"
#include "freshstack/gateway.hpp"
#include "freshstack/http_backend.hpp"
#include "freshstack/lexical.hpp"
#include "freshstack/metrics.hpp"
#include "freshstack/mock_backend.hpp"
#include "freshstack/nuggets.hpp"
#include "freshstack/pooling.hpp"
#include "freshstack/rag.hpp"
#include "freshstack/run_file.hpp"

namespace freshstack {

enum class Stage {
    ingest,
    index,
    embed,
    nuggetize,
    variants,
    pool,
    judge,
    filter,
    evaluate,
    rag_generate,
    rag_score,
    report,
};

inline const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages{Stage::ingest,   Stage::index,    Stage::embed,
                                           Stage::nuggetize, Stage::variants, Stage::pool,
                                           Stage::judge,    Stage::filter,   Stage::evaluate,
                                           Stage::rag_generate, Stage::rag_score, Stage::report};
    return stages;
}

inline std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::index: return "index";
        case Stage::embed: return "embed";
        case Stage::nuggetize: return "nuggetize";
        case Stage::variants: return "variants";
        case Stage::pool: return "pool";
        case Stage::judge: return "judge";
        case Stage::filter: return "filter";
        case Stage::evaluate: return "evaluate";
        case Stage::rag_generate: return "rag-generate";
        case Stage::rag_score: return "rag-score";
        case Stage::report: return "report";
    }
    return "unknown";
}

inline Stage stage_from_name(std::string_view name) {
    for (auto s : all_stages()) {
        if (stage_name(s) == name) return s;
    }
    throw ConfigError("unknown stage: " + std::string(name));
}

// Direct dependencies; validation walks these transitively.
inline const std::vector<Stage>& stage_deps(Stage s) {
    static const std::map<Stage, std::vector<Stage>> deps{
        {Stage::ingest, {}},
        {Stage::index, {Stage::ingest}},
        {Stage::embed, {Stage::ingest}},
        {Stage::nuggetize, {}},
        {Stage::variants, {Stage::nuggetize}},
        {Stage::pool, {Stage::ingest, Stage::index, Stage::embed, Stage::variants}},
        {Stage::judge, {Stage::ingest, Stage::nuggetize, Stage::pool}},
        {Stage::filter, {Stage::nuggetize, Stage::judge}},
        {Stage::evaluate, {Stage::ingest, Stage::index, Stage::embed, Stage::filter}},
        {Stage::rag_generate, {Stage::ingest, Stage::filter, Stage::evaluate}},
        {Stage::rag_score, {Stage::filter, Stage::rag_generate}},
        {Stage::report, {Stage::ingest, Stage::filter}},
    };
    return deps.at(s);
}

// ---------- pipeline state ----------

struct StageRecord {
    std::string fingerprint;
    std::map<std::string, std::string> outputs; // rel path -> sha256
};

class PipelineState {
public:
    static PipelineState load(const fs::path& out_dir) {
        PipelineState state;
        state.path_ = out_dir / "state.json";
        std::error_code ec;
        if (fs::exists(state.path_, ec)) {
            json j = json::parse(read_file(state.path_));
            for (const auto& [name, rec] : j.at("stages").items()) {
                StageRecord r;
                r.fingerprint = rec.at("fingerprint").get<std::string>();
                for (const auto& [p, sha] : rec.at("outputs").items()) {
                    r.outputs[p] = sha.get<std::string>();
                }
                state.records_[name] = std::move(r);
            }
        }
        return state;
    }

    const StageRecord* find(Stage s) const {
        auto it = records_.find(std::string(stage_name(s)));
        return it == records_.end() ? nullptr : &it->second;
    }

    void put(Stage s, StageRecord record) {
        records_[std::string(stage_name(s))] = std::move(record);
        save();
    }

private:
    void save() const {
        json stages = json::object();
        for (const auto& [name, rec] : records_) {
            stages[name] = json{{"fingerprint", rec.fingerprint}, {"outputs", rec.outputs}};
        }
        atomic_write_file(path_, json{{"stages", stages}}.dump(2) + "\n");
    }

    fs::path path_;
    std::map<std::string, StageRecord> records_;
};

// ---------- the pipeline runner ----------

struct TopicReport {
    std::size_t question_count = 0;
    std::size_t doc_count = 0;
    std::size_t repo_count = 0;
    double avg_nuggets_per_question = 0.0;
    double avg_query_tokens = 0.0;
    double avg_answer_tokens = 0.0;
    double query_code_fraction = 0.0;
    double answer_code_fraction = 0.0;
    double rel_docs_per_nugget = 0.0;
    double rel_docs_per_question = 0.0;

    json to_json() const {
        return json{{"questions", question_count},
                    {"docs", doc_count},
                    {"repos", repo_count},
                    {"avg_nuggets_per_question", avg_nuggets_per_question},
                    {"avg_query_tokens", avg_query_tokens},
                    {"avg_answer_tokens", avg_answer_tokens},
                    {"query_code_fraction", query_code_fraction},
                    {"answer_code_fraction", answer_code_fraction},
                    {"rel_docs_per_nugget", rel_docs_per_nugget},
                    {"rel_docs_per_question", rel_docs_per_question}};
    }
};

// Table 1-shaped dataset statistics over a (questions, nuggets, qrels) triple.
inline TopicReport build_topic_report(const std::vector<QuestionRecord>& questions,
                                      const std::vector<Nugget>& nuggets, const NuggetQrels& qrels,
                                      std::size_t doc_count, std::size_t repo_count,
                                      const Tokenizer& tok) {
    TopicReport r;
    r.question_count = questions.size();
    r.doc_count = doc_count;
    r.repo_count = repo_count;

    auto by_q = nuggets_by_question(nuggets);
    if (!questions.empty()) {
        double nugget_sum = 0, q_tokens = 0, a_tokens = 0, q_code = 0, a_code = 0, rel_q = 0;
        for (const auto& q : questions) {
            auto it = by_q.find(q.question_id);
            nugget_sum += it == by_q.end() ? 0.0 : static_cast<double>(it->second.size());
            std::string query_text = q.title + "\n" + q.body;
            q_tokens += static_cast<double>(tok.count(query_text));
            a_tokens += static_cast<double>(tok.count(q.accepted_answer));
            q_code += contains_code_block(query_text) ? 1 : 0;
            a_code += contains_code_block(q.accepted_answer) ? 1 : 0;
            rel_q += static_cast<double>(qrels.relevant_docs(q.question_id).size());
        }
        const double n = static_cast<double>(questions.size());
        r.avg_nuggets_per_question = nugget_sum / n;
        r.avg_query_tokens = q_tokens / n;
        r.avg_answer_tokens = a_tokens / n;
        r.query_code_fraction = q_code / n;
        r.answer_code_fraction = a_code / n;
        r.rel_docs_per_question = rel_q / n;
    }
    std::size_t nugget_rows = 0;
    double rel_n = 0;
    for (const auto& q : questions) {
        for (const auto& [nid, docs] : qrels.nuggets_of(q.question_id)) {
            rel_n += static_cast<double>(docs.size());
            ++nugget_rows;
        }
    }
    if (nugget_rows > 0) r.rel_docs_per_nugget = rel_n / static_cast<double>(nugget_rows);
    return r;
}

inline std::string topic_report_text(const std::string& topic, const TopicReport& r) {
    char buf[512];
    std::string out;
    out += "topic: " + topic + "\n";
    std::snprintf(buf, sizeof(buf),
                  "%-6s %-8s %-5s %-8s %-11s %-12s %-10s %-11s %-12s %-12s\n", "#Q", "#Docs",
                  "#GH", "Avg.N/Q", "Query(tok)", "Answer(tok)", "Query(%c)", "Answer(%c)",
                  "RelDocs/N", "RelDocs/Q");
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "%-6zu %-8zu %-5zu %-8.1f %-11.1f %-12.1f %-10.1f %-11.1f %-12.1f %-12.1f\n",
                  r.question_count, r.doc_count, r.repo_count, r.avg_nuggets_per_question,
                  r.avg_query_tokens, r.avg_answer_tokens, 100.0 * r.query_code_fraction,
                  100.0 * r.answer_code_fraction, r.rel_docs_per_nugget, r.rel_docs_per_question);
    out += buf;
    return out;
}

// Executes stages with content-hash fingerprints: completed stages with
// unchanged inputs are no-ops, and a stage whose upstream artifacts are
// missing or modified fails with "rerun required: <stage>".
class PipelineRunner {
public:
    PipelineRunner(PipelineConfig config, fs::path out_dir)
        : cfg_(std::move(config)), out_(std::move(out_dir)) {
        fs::create_directories(out_);
        state_ = std::make_unique<PipelineState>(PipelineState::load(out_));
        tokenizer_ = default_tokenizer();
        auto backend = make_backend(cfg_.gateway);
        if (cfg_.gateway.backend == BackendKind::mock && !cfg_.mock_rules_path.empty()) {
            static_cast<MockBackend&>(*backend).load_rules(cfg_.mock_rules_path);
        }
        gateway_ = std::make_unique<Gateway>(cfg_.gateway, backend);
        write_provenance();
    }

    const fs::path& out_dir() const { return out_; }
    Gateway& gateway() { return *gateway_; }

    // Returns true if the stage executed, false for a no-op.
    bool run_stage(Stage stage) {
        validate_upstream(stage);
        std::string fingerprint = stage_fingerprint(stage);
        if (const StageRecord* rec = state_->find(stage); rec != nullptr) {
            if (rec->fingerprint == fingerprint && outputs_intact(*rec)) return false;
        }
        std::vector<std::string> outputs = execute(stage);
        StageRecord record;
        record.fingerprint = fingerprint;
        for (const auto& rel : outputs) record.outputs[rel] = file_sha256(out_ / rel);
        state_->put(stage, record);
        return true;
    }

    void run_all() {
        for (auto s : all_stages()) run_stage(s);
    }

private:
    // ---------- state machinery ----------

    void write_provenance() {
        json prompts_json{
            {"nuggetize", prompts::template_hash(prompts::kNuggetizeSystem)},
            {"sub_questions", prompts::template_hash(prompts::kSubQuestionsSystem)},
            {"closed_book", prompts::template_hash(prompts::kClosedBookSystem)},
            {"judge", prompts::template_hash(prompts::kJudgeSystem)},
            {"rag", prompts::template_hash(prompts::kRagSystem)},
            {"assign", prompts::template_hash(prompts::kAssignSystem)}};
        json j{{"topic", cfg_.topic},
               {"config_sha256", cfg_.config_sha256},
               {"seed", cfg_.seed},
               {"prompt_version", std::string(prompts::kPromptVersion)},
               {"prompt_hashes", prompts_json},
               {"tokenizer_id", tokenizer_->id()}};
        atomic_write_file(out_ / "provenance.json", j.dump(2) + "\n");
    }

    void collect_deps(Stage stage, std::set<Stage>& seen) const {
        for (Stage d : stage_deps(stage)) {
            if (seen.insert(d).second) collect_deps(d, seen);
        }
    }

    void validate_upstream(Stage stage) const {
        std::set<Stage> deps;
        collect_deps(stage, deps);
        for (Stage d : all_stages()) {
            if (!deps.count(d)) continue;
            const StageRecord* rec = state_->find(d);
            if (rec == nullptr || !outputs_intact(*rec)) {
                throw PipelineError("rerun required: " + std::string(stage_name(d)));
            }
        }
    }

    bool outputs_intact(const StageRecord& rec) const {
        for (const auto& [rel, sha] : rec.outputs) {
            fs::path p = out_ / rel;
            std::error_code ec;
            if (!fs::exists(p, ec)) return false;
            if (file_sha256(p) != sha) return false;
        }
        return true;
    }

    std::string stage_fingerprint(Stage stage) const {
        Sha256 h;
        h.update(cfg_.config_sha256);
        h.update("|");
        h.update(stage_name(stage));
        for (Stage d : stage_deps(stage)) {
            const StageRecord* rec = state_->find(d);
            h.update("|dep:");
            h.update(stage_name(d));
            h.update(rec == nullptr ? "?" : rec->fingerprint);
        }
        switch (stage) {
            case Stage::ingest:
                for (const auto& repo : cfg_.repos) {
                    h.update("|repo:");
                    h.update(repo.name);
                    h.update(tree_sha256(repo.root_path));
                }
                break;
            case Stage::nuggetize:
            case Stage::variants:
            case Stage::pool:
            case Stage::judge:
            case Stage::filter:
            case Stage::evaluate:
            case Stage::rag_generate:
            case Stage::report:
                h.update("|questions:");
                h.update(file_sha256(cfg_.questions_path));
                break;
            default:
                break;
        }
        return h.finish_hex();
    }

    // ---------- artifact helpers ----------

    fs::path corpus_path() const { return out_ / "corpus.jsonl"; }
    fs::path lexical_dir() const { return out_ / "lexical"; }
    std::string dense_rel(const std::string& model) const {
        return "dense/" + detail::sanitize_for_path(model) + ".bin";
    }
    std::string run_rel(const std::string& tag) const {
        return "runs/" + detail::sanitize_for_path(tag) + ".trec";
    }

    std::vector<QuestionRecord> questions() const { return read_questions(cfg_.questions_path); }

    std::map<std::string, std::string> corpus_texts() const {
        std::map<std::string, std::string> texts;
        for (auto& c : read_corpus(corpus_path())) texts[c.doc_id] = std::move(c.text);
        return texts;
    }

    RetrievalStack make_stack(const InvertedIndex* lexical,
                              const std::vector<DenseIndex>& dense) const {
        RetrievalStack stack;
        stack.lexical = cfg_.use_lexical ? lexical : nullptr;
        for (const auto& d : dense) stack.dense.push_back(&d);
        stack.gateway = gateway_.get();
        stack.fusion = cfg_.fusion;
        return stack;
    }

    std::vector<DenseIndex> load_dense_indexes() const {
        std::vector<DenseIndex> out;
        out.reserve(cfg_.dense_models.size());
        for (const auto& model : cfg_.dense_models) {
            out.push_back(DenseIndex::load(out_ / dense_rel(model)));
        }
        return out;
    }

    // ---------- stage execution ----------

    std::vector<std::string> execute(Stage stage) {
        switch (stage) {
            case Stage::ingest: return do_ingest();
            case Stage::index: return do_index();
            case Stage::embed: return do_embed();
            case Stage::nuggetize: return do_nuggetize();
            case Stage::variants: return do_variants();
            case Stage::pool: return do_pool();
            case Stage::judge: return do_judge();
            case Stage::filter: return do_filter();
            case Stage::evaluate: return do_evaluate();
            case Stage::rag_generate: return do_rag_generate();
            case Stage::rag_score: return do_rag_score();
            case Stage::report: return do_report();
        }
        throw PipelineError("unhandled stage");
    }

    std::vector<std::string> do_ingest() {
        build_corpus(cfg_.repos, corpus_path(), *tokenizer_, cfg_.chunker);
        return {"corpus.jsonl", "corpus.jsonl.manifest.json"};
    }

    std::vector<std::string> do_index() {
        auto corpus = read_corpus(corpus_path());
        InvertedIndex::build(corpus, cfg_.bm25).save(lexical_dir());
        return {"lexical/meta.json", "lexical/docs.tsv", "lexical/postings.txt"};
    }

    std::vector<std::string> do_embed() {
        std::vector<std::string> outputs;
        if (cfg_.dense_models.empty()) {
            atomic_write_file(out_ / "dense/none.marker", "no dense models configured\n");
            return {"dense/none.marker"};
        }
        auto corpus = read_corpus(corpus_path());
        std::vector<std::string> ids;
        std::vector<std::string> texts;
        ids.reserve(corpus.size());
        texts.reserve(corpus.size());
        for (auto& c : corpus) {
            ids.push_back(c.doc_id);
            texts.push_back(c.text);
        }
        for (const auto& model : cfg_.dense_models) {
            auto vectors = gateway_->embed_texts(texts, model, EmbedKind::document);
            DenseIndex::build(ids, vectors, model).save(out_ / dense_rel(model));
            outputs.push_back(dense_rel(model));
        }
        return outputs;
    }

    std::vector<std::string> do_nuggetize() {
        std::vector<json> rows;
        const std::string prompt_hash = prompts::template_hash(prompts::kNuggetizeSystem);
        for (const auto& q : questions()) {
            for (const auto& n : generate_nuggets(q, *gateway_, cfg_.nuggetize)) {
                rows.push_back(nugget_to_json(n, prompt_hash, cfg_.nuggetize.model_id));
            }
        }
        write_jsonl(out_ / "nuggets.jsonl", rows);
        return {"nuggets.jsonl"};
    }

    std::vector<std::string> do_variants() {
        auto by_q = nuggets_by_question(read_nuggets(out_ / "nuggets.jsonl"));
        std::vector<json> rows;
        for (const auto& q : questions()) {
            const auto& nuggets = by_q[q.question_id];
            for (auto kind : cfg_.pool_variants) {
                QueryVariant v = make_variant(q, kind, *gateway_, nuggets, cfg_.variant);
                rows.push_back(json{{"question_id", q.question_id},
                                    {"kind", std::string(variant_name(v.kind))},
                                    {"text", v.text},
                                    {"oracle", v.oracle},
                                    {"available", v.available},
                                    {"error", v.error}});
            }
        }
        write_jsonl(out_ / "variants.jsonl", rows);
        return {"variants.jsonl"};
    }

    std::vector<std::string> do_pool() {
        auto lexical = InvertedIndex::load(lexical_dir());
        auto dense = load_dense_indexes();
        auto stack = make_stack(&lexical, dense);

        std::map<std::string, std::vector<QueryVariant>> variants_by_q;
        for (const auto& j : read_jsonl(out_ / "variants.jsonl")) {
            QueryVariant v;
            v.kind = variant_from_name(j.at("kind").get<std::string>());
            v.text = j.at("text").get<std::string>();
            v.oracle = j.at("oracle").get<bool>();
            v.available = j.at("available").get<bool>();
            variants_by_q[j.at("question_id").get<std::string>()].push_back(std::move(v));
        }

        std::vector<json> rows;
        for (const auto& q : questions()) {
            auto pool = assemble_pool(q, variants_by_q[q.question_id], stack, cfg_.per_variant_k);
            for (const auto& [doc_id, kinds] : pool.entries) {
                json tags = json::array();
                for (auto kind : all_variant_kinds()) {
                    if (kinds.count(kind)) tags.push_back(std::string(variant_name(kind)));
                }
                rows.push_back(json{{"question_id", q.question_id}, {"doc_id", doc_id},
                                    {"provenance", tags}});
            }
        }
        write_jsonl(out_ / "pools.jsonl", rows);
        return {"pools.jsonl"};
    }

    std::vector<std::string> do_judge() {
        auto by_q = nuggets_by_question(read_nuggets(out_ / "nuggets.jsonl"));
        auto texts = corpus_texts();
        std::map<std::string, JudgmentPool> pools;
        for (const auto& j : read_jsonl(out_ / "pools.jsonl")) {
            auto qid = j.at("question_id").get<std::string>();
            pools[qid].question_id = qid;
            auto& entry = pools[qid].entries[j.at("doc_id").get<std::string>()];
            for (const auto& tag : j.at("provenance")) {
                entry.insert(variant_from_name(tag.get<std::string>()));
            }
        }

        std::vector<json> rows;
        std::vector<SupportJudgment> all;
        for (const auto& q : questions()) {
            auto pit = pools.find(q.question_id);
            auto nit = by_q.find(q.question_id);
            if (pit == pools.end() || nit == by_q.end() || nit->second.empty()) continue;
            auto judged = judge_question(q, nit->second, pit->second, texts, *gateway_, cfg_.judge);
            for (const auto& sj : judged) rows.push_back(judgment_to_json(sj));
            all.insert(all.end(), judged.begin(), judged.end());
        }
        write_jsonl(out_ / "judgments.jsonl", rows);

        std::set<std::string> corpus_ids;
        for (const auto& [id, _] : texts) corpus_ids.insert(id);
        build_qrels(all, &corpus_ids).save(out_ / "qrels.tsv");
        return {"judgments.jsonl", "qrels.tsv"};
    }

    std::vector<std::string> do_filter() {
        auto qs = questions();
        auto nuggets = read_nuggets(out_ / "nuggets.jsonl");
        auto qrels = NuggetQrels::load(out_ / "qrels.tsv");
        auto result = filter_dataset(qs, nuggets, qrels);

        std::vector<json> q_rows;
        for (const auto& q : result.questions) q_rows.push_back(question_to_json(q));
        write_jsonl(out_ / "filtered/questions.jsonl", q_rows);
        std::vector<json> n_rows;
        const std::string prompt_hash = prompts::template_hash(prompts::kNuggetizeSystem);
        for (const auto& n : result.nuggets) {
            n_rows.push_back(nugget_to_json(n, prompt_hash, cfg_.nuggetize.model_id));
        }
        write_jsonl(out_ / "filtered/nuggets.jsonl", n_rows);
        result.qrels.save(out_ / "filtered/qrels.tsv");
        json report = result.report.to_json();
        report["config_sha256"] = cfg_.config_sha256;
        atomic_write_file(out_ / "filtered/report.json", report.dump(2) + "\n");
        return {"filtered/questions.jsonl", "filtered/nuggets.jsonl", "filtered/qrels.tsv",
                "filtered/report.json"};
    }

    std::vector<std::string> do_evaluate() {
        auto lexical = InvertedIndex::load(lexical_dir());
        auto dense = load_dense_indexes();
        auto qrels = NuggetQrels::load(out_ / "filtered/qrels.tsv");

        std::vector<QuestionRecord> filtered;
        for (const auto& j : read_jsonl(out_ / "filtered/questions.jsonl")) {
            filtered.push_back(question_from_json(j));
        }

        // inference-setting runs: the raw question against every model
        std::vector<RetrievalRun> runs;
        if (cfg_.use_lexical) {
            RetrievalRun run;
            run.run_tag = "bm25";
            for (const auto& q : filtered) {
                run.by_question[q.question_id] =
                    lexical.search(q.title + "\n\n" + q.body, cfg_.run_depth);
            }
            runs.push_back(std::move(run));
        }
        for (const auto& index : dense) {
            RetrievalRun run;
            run.run_tag = "dense(" + index.model_id() + ")";
            for (const auto& q : filtered) {
                auto qvec = gateway_->embed_one(q.title + "\n\n" + q.body, index.model_id(),
                                                EmbedKind::query);
                run.by_question[q.question_id] = index.search(qvec, cfg_.run_depth);
            }
            runs.push_back(std::move(run));
        }
        if (runs.size() >= 2) {
            std::vector<RetrievalRun> normalized;
            normalized.reserve(runs.size());
            for (const auto& r : runs) normalized.push_back(normalize_run(r, cfg_.fusion.depth));
            runs.push_back(fuse(normalized, cfg_.fusion.output_depth));
        }

        std::vector<std::string> outputs;
        std::vector<EvalResult> results;
        for (const auto& run : runs) {
            std::string rel = run_rel(run.run_tag);
            write_trec(run, out_ / rel);
            outputs.push_back(rel);
            results.push_back(evaluate_run(run, qrels, cfg_.eval));
        }
        json results_json = json::array();
        for (const auto& r : results) results_json.push_back(r.to_json());
        json doc{{"config_sha256", cfg_.config_sha256}, {"results", results_json}};
        atomic_write_file(out_ / "eval/results.json", doc.dump(2) + "\n");
        atomic_write_file(out_ / "eval/table.txt", eval_table(results));
        outputs.push_back("eval/results.json");
        outputs.push_back("eval/table.txt");
        return outputs;
    }

    // Context run: fusion when present, otherwise the single-model run.
    std::string context_run_rel() const {
        std::size_t model_count = (cfg_.use_lexical ? 1 : 0) + cfg_.dense_models.size();
        if (model_count >= 2) {
            std::vector<std::string> tags;
            if (cfg_.use_lexical) tags.push_back("bm25");
            for (const auto& m : cfg_.dense_models) tags.push_back("dense(" + m + ")");
            return run_rel(fusion_tag(tags));
        }
        if (cfg_.use_lexical) return run_rel("bm25");
        return run_rel("dense(" + cfg_.dense_models.front() + ")");
    }

    std::vector<std::string> do_rag_generate() {
        auto texts = corpus_texts();
        RetrievalRun context_run = read_trec(out_ / context_run_rel());
        std::vector<json> rows;
        for (const auto& j : read_jsonl(out_ / "filtered/questions.jsonl")) {
            QuestionRecord q = question_from_json(j);
            std::vector<std::pair<std::string, std::string>> context;
            if (!cfg_.rag_closed_book) {
                auto rit = context_run.by_question.find(q.question_id);
                if (rit != context_run.by_question.end()) {
                    for (const auto& d : rit->second) {
                        if (context.size() == cfg_.rag.max_context_docs) break;
                        context.emplace_back(d.doc_id, texts.at(d.doc_id));
                    }
                }
            }
            auto answer = generate_rag_answer(q, context, *gateway_, cfg_.rag, *tokenizer_);
            rows.push_back(rag_answer_to_json(answer));
        }
        write_jsonl(out_ / "rag/answers.jsonl", rows);
        return {"rag/answers.jsonl"};
    }

    std::vector<std::string> do_rag_score() {
        auto by_q = nuggets_by_question(read_nuggets(out_ / "filtered/nuggets.jsonl"));
        std::vector<json> rows;
        std::map<std::string, std::vector<NuggetAssignment>> assignments;
        for (const auto& answer : read_rag_answers(out_ / "rag/answers.jsonl")) {
            auto nit = by_q.find(answer.question_id);
            if (nit == by_q.end() || nit->second.empty()) {
                warn("no nuggets for answered question " + answer.question_id);
                continue;
            }
            auto labels = assign_nuggets(answer, nit->second, *gateway_, cfg_.assign);
            for (const auto& a : labels) rows.push_back(assignment_to_json(a));
            assignments[answer.question_id] = std::move(labels);
        }
        write_jsonl(out_ / "rag/assignments.jsonl", rows);
        RagScore score = a_strict(assignments);
        json j = score.to_json();
        j["generator_model_id"] = cfg_.rag.generator_model_id;
        j["config_sha256"] = cfg_.config_sha256;
        atomic_write_file(out_ / "rag/score.json", j.dump(2) + "\n");
        return {"rag/assignments.jsonl", "rag/score.json"};
    }

    std::vector<std::string> do_report() {
        std::vector<QuestionRecord> filtered;
        for (const auto& j : read_jsonl(out_ / "filtered/questions.jsonl")) {
            filtered.push_back(question_from_json(j));
        }
        auto nuggets = read_nuggets(out_ / "filtered/nuggets.jsonl");
        auto qrels = NuggetQrels::load(out_ / "filtered/qrels.tsv");
        auto manifest =
            manifest_from_json(json::parse(read_file(out_ / "corpus.jsonl.manifest.json")));
        auto report = build_topic_report(filtered, nuggets, qrels, manifest.chunk_count,
                                         manifest.repos.size(), *tokenizer_);
        json j = report.to_json();
        j["topic"] = cfg_.topic;
        j["config_sha256"] = cfg_.config_sha256;
        atomic_write_file(out_ / "report.json", j.dump(2) + "\n");
        atomic_write_file(out_ / "report.txt", topic_report_text(cfg_.topic, report));
        if (report.question_count == 0) warn("report over an empty filtered set");
        return {"report.json", "report.txt"};
    }

    PipelineConfig cfg_;
    fs::path out_;
    std::unique_ptr<PipelineState> state_;
    std::unique_ptr<Gateway> gateway_;
    std::shared_ptr<const Tokenizer> tokenizer_;
};

} // namespace freshstack
