#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "freshstack/corpus.hpp"
#include "freshstack/errors.hpp"
#include "freshstack/fusion.hpp"
#include "freshstack/gateway.hpp"
#include "freshstack/io.hpp"
#include "freshstack/metrics.hpp"
#include "freshstack/nuggets.hpp"
#include "freshstack/pooling.hpp"
#include "freshstack/rag.hpp"
#include "freshstack/text.hpp"

namespace freshstack {

// ---------- TOML-style config parsing ----------
//
// Minimal subset: comments, [tables], [[table arrays]], and string / integer
// / float / boolean / string-array values. Quoted strings support \" \\ \n \t.

class TomlValue;
using TomlTable = std::map<std::string, TomlValue>;

class TomlValue {
public:
    using Array = std::vector<std::string>;
    using TableArray = std::vector<TomlTable>;
    std::variant<std::string, std::int64_t, double, bool, Array, TomlTable, TableArray> v;

    const std::string& as_string() const { return expect<std::string>("string"); }
    std::int64_t as_int() const { return expect<std::int64_t>("integer"); }
    double as_double() const {
        if (std::holds_alternative<std::int64_t>(v)) {
            return static_cast<double>(std::get<std::int64_t>(v));
        }
        return expect<double>("float");
    }
    bool as_bool() const { return expect<bool>("boolean"); }
    const Array& as_array() const { return expect<Array>("string array"); }
    const TomlTable& as_table() const { return expect<TomlTable>("table"); }
    const TableArray& as_table_array() const { return expect<TableArray>("table array"); }

private:
    template <typename T>
    const T& expect(const char* what) const {
        if (!std::holds_alternative<T>(v)) throw ConfigError(std::string("expected a ") + what);
        return std::get<T>(v);
    }
};

namespace detail {

inline std::string parse_toml_string(std::string_view raw, std::size_t lineno) {
    if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') {
        throw ConfigError("bad string value at config line " + std::to_string(lineno));
    }
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
        char c = raw[i];
        if (c == '\\' && i + 2 < raw.size()) {
            char n = raw[++i];
            switch (n) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default: out.push_back(n);
            }
        } else {
            out.push_back(c);
        }
    }
    return out;
}

inline TomlValue parse_toml_scalar(std::string_view raw, std::size_t lineno) {
    std::string t = trim(raw);
    TomlValue value;
    if (t.empty()) throw ConfigError("missing value at config line " + std::to_string(lineno));
    if (t.front() == '"') {
        value.v = parse_toml_string(t, lineno);
        return value;
    }
    if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError("unterminated array at line " + std::to_string(lineno));
        TomlValue::Array items;
        std::string inner(t.begin() + 1, t.end() - 1);
        std::size_t pos = 0;
        while (pos < inner.size()) {
            while (pos < inner.size() && (is_ascii_space(static_cast<unsigned char>(inner[pos])) ||
                                          inner[pos] == ',')) {
                ++pos;
            }
            if (pos >= inner.size()) break;
            if (inner[pos] != '"') {
                throw ConfigError("arrays may contain only strings (line " + std::to_string(lineno) + ")");
            }
            std::size_t end = pos + 1;
            while (end < inner.size() && inner[end] != '"') {
                if (inner[end] == '\\') ++end;
                ++end;
            }
            if (end >= inner.size()) {
                throw ConfigError("unterminated string in array at line " + std::to_string(lineno));
            }
            items.push_back(parse_toml_string(std::string_view(inner).substr(pos, end - pos + 1), lineno));
            pos = end + 1;
        }
        value.v = std::move(items);
        return value;
    }
    if (t == "true") {
        value.v = true;
        return value;
    }
    if (t == "false") {
        value.v = false;
        return value;
    }
    bool is_float = t.find('.') != std::string::npos || t.find('e') != std::string::npos ||
                    t.find('E') != std::string::npos;
    try {
        if (is_float) {
            value.v = std::stod(t);
        } else {
            value.v = static_cast<std::int64_t>(std::stoll(t));
        }
    } catch (const std::exception&) {
        throw ConfigError("unparseable value '" + t + "' at config line " + std::to_string(lineno));
    }
    return value;
}

} // namespace detail

inline TomlTable parse_toml(std::string_view content) {
    TomlTable root;
    TomlTable* current = &root;
    std::size_t lineno = 0;
    for (const auto& raw_line : split_lines(content)) {
        ++lineno;
        std::string line = raw_line;
        // strip comments outside strings
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
            if (line[i] == '#' && !in_string) {
                line.resize(i);
                break;
            }
        }
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.rfind("[[", 0) == 0) {
            if (t.size() < 5 || t.substr(t.size() - 2) != "]]") {
                throw ConfigError("bad table array header at line " + std::to_string(lineno));
            }
            std::string name = trim(std::string_view(t).substr(2, t.size() - 4));
            auto& slot = root[name];
            if (!std::holds_alternative<TomlValue::TableArray>(slot.v)) {
                slot.v = TomlValue::TableArray{};
            }
            auto& arr = std::get<TomlValue::TableArray>(slot.v);
            arr.emplace_back();
            current = &arr.back();
            continue;
        }
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("bad table header at line " + std::to_string(lineno));
            std::string name = trim(std::string_view(t).substr(1, t.size() - 2));
            auto& slot = root[name];
            if (!std::holds_alternative<TomlTable>(slot.v)) slot.v = TomlTable{};
            current = &std::get<TomlTable>(slot.v);
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected key = value at config line " + std::to_string(lineno));
        }
        std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw ConfigError("empty key at config line " + std::to_string(lineno));
        (*current)[key] = detail::parse_toml_scalar(std::string_view(t).substr(eq + 1), lineno);
    }
    return root;
}

// ---------- pipeline configuration ----------

struct PipelineConfig {
    std::string topic;
    std::vector<RepoSource> repos;
    std::string questions_path; // resolved absolute
    std::uint64_t seed = 0;     // recorded for provenance

    ChunkerConfig chunker;
    GatewayConfig gateway;
    std::string mock_rules_path; // optional, resolved

    bool use_lexical = true;
    Bm25Params bm25;
    std::vector<std::string> dense_models;

    NuggetizeConfig nuggetize;
    VariantConfig variant;
    JudgeConfig judge;
    std::vector<VariantKind> pool_variants = all_variant_kinds();
    std::size_t per_variant_k = 20;

    FusionConfig fusion;
    EvalConfig eval;
    std::size_t run_depth = 100;

    RagGenerateConfig rag;
    AssignConfig assign;
    bool rag_closed_book = false;

    // provenance
    std::string config_path;   // as given
    std::string config_sha256; // of the raw file bytes
};

namespace detail {

inline std::string resolve_path(const fs::path& base_dir, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    if (path.is_absolute()) return path.lexically_normal().string();
    return (base_dir / path).lexically_normal().string();
}

template <typename T>
T table_get(const TomlTable& table, const std::string& key, T fallback) {
    auto it = table.find(key);
    if (it == table.end()) return fallback;
    if constexpr (std::is_same_v<T, std::string>) {
        return it->second.as_string();
    } else if constexpr (std::is_same_v<T, bool>) {
        return it->second.as_bool();
    } else if constexpr (std::is_same_v<T, double>) {
        return it->second.as_double();
    } else {
        return static_cast<T>(it->second.as_int());
    }
}

} // namespace detail

// Loads and validates the declarative pipeline config. Relative paths are
// resolved against the config file's directory.
inline PipelineConfig load_pipeline_config(const fs::path& path) {
    std::string raw = read_file(path);
    TomlTable root = parse_toml(raw);
    fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

    PipelineConfig cfg;
    cfg.config_path = path.string();
    cfg.config_sha256 = Sha256::hex(raw);
    cfg.topic = detail::table_get<std::string>(root, "topic", "");
    if (cfg.topic.empty()) throw ConfigError("config requires a topic name");
    cfg.seed = static_cast<std::uint64_t>(detail::table_get<std::int64_t>(root, "seed", 0));
    cfg.chunker.max_tokens =
        static_cast<std::size_t>(detail::table_get<std::int64_t>(root, "max_tokens", 2048));

    std::string questions = detail::table_get<std::string>(root, "questions", "");
    if (questions.empty()) throw ConfigError("config requires a questions file");
    cfg.questions_path = detail::resolve_path(base, questions);
    if (!fs::exists(cfg.questions_path)) {
        throw ConfigError("questions file not found: " + cfg.questions_path);
    }

    auto repos_it = root.find("repos");
    if (repos_it == root.end()) throw ConfigError("config requires at least one [[repos]] entry");
    for (const auto& table : repos_it->second.as_table_array()) {
        RepoSource src;
        src.name = detail::table_get<std::string>(table, "name", "");
        src.root_path = detail::resolve_path(base, detail::table_get<std::string>(table, "path", ""));
        src.branch_note = detail::table_get<std::string>(table, "note", "");
        validate_repo_source(src);
        cfg.repos.push_back(std::move(src));
    }

    if (auto it = root.find("gateway"); it != root.end()) {
        const auto& t = it->second.as_table();
        std::string backend = detail::table_get<std::string>(t, "backend", "mock");
        if (backend == "mock") {
            cfg.gateway.backend = BackendKind::mock;
        } else if (backend == "http_provider") {
            cfg.gateway.backend = BackendKind::http_provider;
        } else {
            throw ConfigError("unknown gateway backend: " + backend);
        }
        cfg.gateway.endpoint = detail::table_get<std::string>(t, "endpoint", "");
        cfg.gateway.credentials_env_var = detail::table_get<std::string>(t, "credentials_env_var", "");
        cfg.gateway.max_parallel_requests =
            detail::table_get<int>(t, "max_parallel_requests", cfg.gateway.max_parallel_requests);
        cfg.gateway.mock_dims =
            detail::table_get<std::size_t>(t, "mock_dims", cfg.gateway.mock_dims);
        cfg.gateway.retry.max_attempts =
            detail::table_get<int>(t, "retry_max_attempts", cfg.gateway.retry.max_attempts);
        std::string cache = detail::table_get<std::string>(t, "cache_dir", "");
        if (!cache.empty()) cfg.gateway.cache_dir = detail::resolve_path(base, cache);
        std::string rules = detail::table_get<std::string>(t, "mock_rules", "");
        if (!rules.empty()) cfg.mock_rules_path = detail::resolve_path(base, rules);
    }

    if (auto it = root.find("models"); it != root.end()) {
        const auto& t = it->second.as_table();
        cfg.use_lexical = detail::table_get<bool>(t, "lexical", true);
        if (auto dit = t.find("dense"); dit != t.end()) cfg.dense_models = dit->second.as_array();
        cfg.nuggetize.model_id = detail::table_get<std::string>(t, "nugget_model", cfg.nuggetize.model_id);
        cfg.variant.model_id = detail::table_get<std::string>(t, "variant_model", cfg.variant.model_id);
        cfg.judge.model_id = detail::table_get<std::string>(t, "judge_model", cfg.judge.model_id);
        cfg.assign.model_id = cfg.judge.model_id;
        cfg.rag.generator_model_id =
            detail::table_get<std::string>(t, "generator_model", cfg.rag.generator_model_id);
        cfg.bm25.k1 = detail::table_get<double>(t, "bm25_k1", cfg.bm25.k1);
        cfg.bm25.b = detail::table_get<double>(t, "bm25_b", cfg.bm25.b);
    }
    if (!cfg.use_lexical && cfg.dense_models.empty()) {
        throw ConfigError("model roster is empty: enable lexical or add dense models");
    }

    if (auto it = root.find("pool"); it != root.end()) {
        const auto& t = it->second.as_table();
        cfg.per_variant_k = detail::table_get<std::size_t>(t, "per_variant_k", cfg.per_variant_k);
        if (auto vit = t.find("variants"); vit != t.end()) {
            cfg.pool_variants.clear();
            for (const auto& name : vit->second.as_array()) {
                cfg.pool_variants.push_back(variant_from_name(name));
            }
            if (cfg.pool_variants.empty()) throw ConfigError("pool.variants must not be empty");
        }
    }

    if (auto it = root.find("fusion"); it != root.end()) {
        const auto& t = it->second.as_table();
        cfg.fusion.depth = detail::table_get<std::size_t>(t, "depth", cfg.fusion.depth);
        cfg.fusion.output_depth =
            detail::table_get<std::size_t>(t, "output_depth", cfg.fusion.output_depth);
    }
    if (cfg.fusion.depth < cfg.fusion.output_depth || cfg.fusion.output_depth < 1) {
        throw ConfigError("fusion requires depth >= output_depth >= 1");
    }

    if (auto it = root.find("eval"); it != root.end()) {
        const auto& t = it->second.as_table();
        cfg.eval.alpha = detail::table_get<double>(t, "alpha", cfg.eval.alpha);
        cfg.eval.k_alpha_ndcg = detail::table_get<std::size_t>(t, "k_alpha_ndcg", cfg.eval.k_alpha_ndcg);
        cfg.eval.k_coverage = detail::table_get<std::size_t>(t, "k_coverage", cfg.eval.k_coverage);
        cfg.eval.k_recall = detail::table_get<std::size_t>(t, "k_recall", cfg.eval.k_recall);
        cfg.run_depth = detail::table_get<std::size_t>(t, "run_depth", cfg.run_depth);
    }
    if (cfg.eval.alpha < 0.0 || cfg.eval.alpha > 1.0) throw ConfigError("eval.alpha must be in [0,1]");
    cfg.run_depth = std::max({cfg.run_depth, cfg.eval.k_alpha_ndcg, cfg.eval.k_coverage,
                              cfg.eval.k_recall});

    if (auto it = root.find("rag"); it != root.end()) {
        const auto& t = it->second.as_table();
        cfg.rag.max_context_docs =
            detail::table_get<std::size_t>(t, "context_docs", cfg.rag.max_context_docs);
        cfg.rag.max_context_tokens =
            detail::table_get<std::size_t>(t, "max_context_tokens", cfg.rag.max_context_tokens);
        cfg.rag_closed_book = detail::table_get<bool>(t, "closed_book", false);
        cfg.rag.temperature = detail::table_get<double>(t, "temperature", cfg.rag.temperature);
    }

    cfg.nuggetize.temperature = detail::table_get<double>(root, "llm_temperature", 0.1);
    cfg.variant.temperature = cfg.nuggetize.temperature;
    cfg.judge.temperature = cfg.nuggetize.temperature;
    cfg.assign.temperature = cfg.nuggetize.temperature;

    return cfg;
}

} // namespace freshstack
