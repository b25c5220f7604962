// freshstack: build and evaluate nugget-judged retrieval test collections.
//
// Standalone subcommands cover the individual file-to-file operations
// (ingest, index, search, embed, nuggetize, evaluate, report); the stage
// subcommands (variants, pool, judge, filter, rag-generate, rag-score) and
// `pipeline run` orchestrate a declarative config with resumable state.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "freshstack/config.hpp"
#include "freshstack/pipeline.hpp"

using namespace freshstack;

namespace {

std::vector<RepoSource> repos_from_config(const std::string& config_path) {
    TomlTable root = parse_toml(read_file(config_path));
    auto it = root.find("repos");
    if (it == root.end()) throw ConfigError("no [[repos]] entries in " + config_path);
    fs::path base = fs::path(config_path).parent_path();
    std::vector<RepoSource> repos;
    for (const auto& table : it->second.as_table_array()) {
        RepoSource src;
        src.name = detail::table_get<std::string>(table, "name", "");
        src.root_path = detail::resolve_path(base, detail::table_get<std::string>(table, "path", ""));
        src.branch_note = detail::table_get<std::string>(table, "note", "");
        validate_repo_source(src);
        repos.push_back(std::move(src));
    }
    return repos;
}

std::unique_ptr<Gateway> make_gateway_from_flags(const std::string& config_path) {
    if (!config_path.empty()) {
        PipelineConfig cfg = load_pipeline_config(config_path);
        auto backend = make_backend(cfg.gateway);
        if (cfg.gateway.backend == BackendKind::mock && !cfg.mock_rules_path.empty()) {
            static_cast<MockBackend&>(*backend).load_rules(cfg.mock_rules_path);
        }
        return std::make_unique<Gateway>(cfg.gateway, backend);
    }
    GatewayConfig gw;
    return std::make_unique<Gateway>(gw, make_backend(gw));
}

int run_pipeline_stage(const std::string& config_path, const std::string& out_dir,
                       const std::string& stage) {
    PipelineConfig cfg = load_pipeline_config(config_path);
    PipelineRunner runner(cfg, out_dir);
    if (stage.empty()) {
        runner.run_all();
        std::cout << "pipeline complete: " << out_dir << "\n";
    } else {
        bool ran = runner.run_stage(stage_from_name(stage));
        std::cout << stage << (ran ? ": done" : ": up to date (no-op)") << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FreshStack-style benchmark construction and evaluation toolkit"};
    app.require_subcommand(1);

    // ---- ingest ----
    std::string ingest_repos, ingest_out;
    std::size_t ingest_max_tokens = 2048;
    auto* ingest = app.add_subcommand("ingest", "Chunk local repo clones into a corpus JSONL");
    ingest->add_option("--repos", ingest_repos, "TOML config with [[repos]] entries")->required();
    ingest->add_option("--out", ingest_out, "Output corpus JSONL path")->required();
    ingest->add_option("--max-tokens", ingest_max_tokens, "Chunk token budget (default 2048)");

    // ---- index ----
    std::string index_corpus, index_out;
    auto* index = app.add_subcommand("index", "Build the lexical BM25 index from a corpus");
    index->add_option("--corpus", index_corpus, "Corpus JSONL")->required();
    index->add_option("--out", index_out, "Index output directory")->required();

    // ---- search ----
    std::string search_index, search_queries, search_out, search_tag = "bm25";
    std::size_t search_k = 100;
    auto* search = app.add_subcommand("search", "BM25 search; TREC run output");
    search->add_option("--index", search_index, "Lexical index directory")->required();
    search->add_option("--queries", search_queries, "Queries JSONL ({question_id, text})")->required();
    search->add_option("--k", search_k, "Results per query (default 100)");
    search->add_option("--out", search_out, "Output TREC run file")->required();
    search->add_option("--tag", search_tag, "Run tag (default bm25)");

    // ---- embed ----
    std::string embed_corpus, embed_model, embed_out, embed_config;
    auto* embed = app.add_subcommand("embed", "Embed a corpus into a dense index");
    embed->add_option("--corpus", embed_corpus, "Corpus JSONL")->required();
    embed->add_option("--model", embed_model, "Embedding model id")->required();
    embed->add_option("--out", embed_out, "Output index.bin")->required();
    embed->add_option("--config", embed_config, "Pipeline config supplying gateway settings");

    // ---- nuggetize ----
    std::string nug_questions, nug_out, nug_config, nug_model;
    auto* nuggetize = app.add_subcommand("nuggetize", "Generate nuggets for question/answer pairs");
    nuggetize->add_option("--questions", nug_questions, "Questions JSONL")->required();
    nuggetize->add_option("--out", nug_out, "Output nuggets JSONL")->required();
    nuggetize->add_option("--config", nug_config, "Pipeline config supplying gateway settings");
    nuggetize->add_option("--model", nug_model, "Override nugget model id");

    // ---- evaluate ----
    std::string eval_run, eval_qrels, eval_out;
    double eval_alpha = 0.5;
    auto* evaluate = app.add_subcommand("evaluate", "Score a TREC run against nugget qrels");
    evaluate->add_option("--run", eval_run, "TREC run file")->required();
    evaluate->add_option("--qrels", eval_qrels, "Nugget qrels TSV")->required();
    evaluate->add_option("--alpha", eval_alpha, "alpha-nDCG redundancy penalty (default 0.5)");
    evaluate->add_option("--out", eval_out, "Write EvalResult JSON here (default stdout)");

    // ---- report (standalone files mode) ----
    std::string rep_questions, rep_nuggets, rep_qrels, rep_manifest, rep_out, rep_topic = "topic";
    auto* report = app.add_subcommand("report", "Dataset statistics table from released files");
    report->add_option("--questions", rep_questions, "Questions JSONL")->required();
    report->add_option("--nuggets", rep_nuggets, "Nuggets JSONL")->required();
    report->add_option("--qrels", rep_qrels, "Qrels TSV")->required();
    report->add_option("--manifest", rep_manifest, "Corpus manifest JSON (for doc/repo counts)");
    report->add_option("--topic", rep_topic, "Topic label");
    report->add_option("--out", rep_out, "Write report JSON here (default stdout)");

    // ---- pipeline stages over a config ----
    std::string stage_config, stage_out;
    std::vector<CLI::App*> stage_cmds;
    for (const char* name : {"variants", "pool", "judge", "filter", "rag-generate", "rag-score"}) {
        auto* cmd = app.add_subcommand(name, std::string("Run the ") + name + " pipeline stage");
        cmd->add_option("--config", stage_config, "Pipeline config TOML")->required();
        cmd->add_option("--out", stage_out, "Pipeline output directory")->required();
        stage_cmds.push_back(cmd);
    }

    // ---- pipeline run ----
    auto* pipeline = app.add_subcommand("pipeline", "Orchestrate the full pipeline");
    std::string pl_config, pl_out, pl_stage;
    auto* pl_run = pipeline->add_subcommand("run", "Run all stages (or one) with resumable state");
    pl_run->add_option("--config", pl_config, "Pipeline config TOML")->required();
    pl_run->add_option("--out", pl_out, "Output directory")->required();
    pl_run->add_option("--stage", pl_stage, "Run a single named stage");
    pipeline->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            ChunkerConfig chunker;
            chunker.max_tokens = ingest_max_tokens;
            auto manifest = build_corpus(repos_from_config(ingest_repos), ingest_out,
                                         *default_tokenizer(), chunker);
            std::cout << "corpus: " << manifest.chunk_count << " chunks from "
                      << manifest.file_count << " files (" << manifest.skipped_count
                      << " skipped)\n";
        } else if (*index) {
            auto corpus = read_corpus(index_corpus);
            InvertedIndex::build(corpus).save(index_out);
            std::cout << "indexed " << corpus.size() << " chunks\n";
        } else if (*search) {
            auto idx = InvertedIndex::load(search_index);
            RetrievalRun run;
            run.run_tag = search_tag;
            for (const auto& j : read_jsonl(search_queries)) {
                run.by_question[j.at("question_id").get<std::string>()] =
                    idx.search(j.at("text").get<std::string>(), search_k);
            }
            write_trec(run, search_out);
            std::cout << "wrote " << search_out << "\n";
        } else if (*embed) {
            auto gateway = make_gateway_from_flags(embed_config);
            auto corpus = read_corpus(embed_corpus);
            std::vector<std::string> ids;
            std::vector<std::string> texts;
            for (auto& c : corpus) {
                ids.push_back(c.doc_id);
                texts.push_back(c.text);
            }
            auto vectors = gateway->embed_texts(texts, embed_model, EmbedKind::document);
            DenseIndex::build(ids, vectors, embed_model).save(embed_out);
            std::cout << "embedded " << ids.size() << " chunks with " << embed_model << "\n";
        } else if (*nuggetize) {
            auto gateway = make_gateway_from_flags(nug_config);
            NuggetizeConfig ncfg;
            if (!nug_config.empty()) ncfg = load_pipeline_config(nug_config).nuggetize;
            if (!nug_model.empty()) ncfg.model_id = nug_model;
            const std::string prompt_hash = prompts::template_hash(prompts::kNuggetizeSystem);
            std::vector<json> rows;
            for (const auto& q : read_questions(nug_questions)) {
                for (const auto& n : generate_nuggets(q, *gateway, ncfg)) {
                    rows.push_back(nugget_to_json(n, prompt_hash, ncfg.model_id));
                }
            }
            write_jsonl(nug_out, rows);
            std::cout << "wrote " << rows.size() << " nuggets\n";
        } else if (*evaluate) {
            EvalConfig cfg;
            cfg.alpha = eval_alpha;
            auto result = evaluate_run(read_trec(eval_run), NuggetQrels::load(eval_qrels), cfg);
            std::cout << eval_table({result});
            if (!eval_out.empty()) {
                atomic_write_file(eval_out, result.to_json().dump(2) + "\n");
                std::cout << "wrote " << eval_out << "\n";
            }
        } else if (*report) {
            auto questions = read_questions(rep_questions);
            auto nuggets = read_nuggets(rep_nuggets);
            auto qrels = NuggetQrels::load(rep_qrels);
            std::size_t docs = 0, repos = 0;
            if (!rep_manifest.empty()) {
                auto manifest = manifest_from_json(json::parse(read_file(rep_manifest)));
                docs = manifest.chunk_count;
                repos = manifest.repos.size();
            }
            auto rep = build_topic_report(questions, nuggets, qrels, docs, repos,
                                          *default_tokenizer());
            std::cout << topic_report_text(rep_topic, rep);
            if (!rep_out.empty()) {
                json j = rep.to_json();
                j["topic"] = rep_topic;
                atomic_write_file(rep_out, j.dump(2) + "\n");
            }
        } else if (*pl_run) {
            return run_pipeline_stage(pl_config, pl_out, pl_stage);
        } else {
            for (std::size_t i = 0; i < stage_cmds.size(); ++i) {
                if (*stage_cmds[i]) {
                    return run_pipeline_stage(stage_config, stage_out,
                                              stage_cmds[i]->get_name());
                }
            }
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
