#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "freshstack/errors.hpp"
#include "freshstack/io.hpp"
#include "freshstack/text.hpp"
#include "freshstack/tokenizer.hpp"
#include "freshstack/warn.hpp"

namespace freshstack {

struct RepoSource {
    std::string name;        // short label, no path separators
    std::string root_path;   // local clone directory
    std::string branch_note; // free-text provenance
};

struct FileRecord {
    std::string repo;
    std::string rel_path; // '/'-separated, relative to the repo root
    std::uint64_t byte_len = 0;
    bool indexable = false;
};

struct DocumentChunk {
    std::string doc_id; // "{repo}/{rel_path}_{start}_{end}"
    std::string text;
    std::string repo;
    std::string rel_path;
    std::size_t start = 0; // byte offset into the file text, inclusive
    std::size_t end = 0;   // exclusive
    std::size_t token_count = 0;
};

struct CorpusManifest {
    std::string corpus_id;
    std::vector<RepoSource> repos;
    std::size_t chunk_count = 0;
    std::size_t file_count = 0;    // files chunked into the corpus
    std::size_t skipped_count = 0; // skip-list, non-UTF-8, or unreadable files
    std::string tokenizer_id;
    std::size_t max_tokens = 0;
};

struct ChunkerConfig {
    std::size_t max_tokens = 2048;
    // Mirrors the skip list for images, videos, .bin, .csv, and audio files;
    // non-UTF-8 content is skipped separately at read time.
    std::set<std::string> skip_extensions = {
        ".png", ".jpg", ".jpeg", ".gif", ".bmp", ".ico", ".svg", ".webp", ".tiff",
        ".mp4", ".avi", ".mov", ".mkv", ".webm",
        ".mp3", ".wav", ".ogg", ".flac", ".m4a",
        ".bin", ".csv",
    };
};

// ---------- doc ids ----------

inline std::string make_doc_id(std::string_view repo, std::string_view rel_path,
                               std::size_t start, std::size_t end) {
    std::string id;
    id.reserve(repo.size() + rel_path.size() + 24);
    id.append(repo);
    id.push_back('/');
    id.append(rel_path);
    id.push_back('_');
    id.append(std::to_string(start));
    id.push_back('_');
    id.append(std::to_string(end));
    return id;
}

struct DocIdParts {
    std::string repo;
    std::string rel_path;
    std::size_t start = 0;
    std::size_t end = 0;
};

// Inverse of make_doc_id; rel_path may itself contain '_' and '/', so the
// offsets are taken from the last two '_'-separated numeric suffixes.
inline DocIdParts parse_doc_id(std::string_view doc_id) {
    auto fail = [&]() -> DocIdParts {
        throw ContractError("malformed doc_id: " + std::string(doc_id));
    };
    std::size_t u2 = doc_id.rfind('_');
    if (u2 == std::string_view::npos || u2 + 1 >= doc_id.size()) return fail();
    std::size_t u1 = doc_id.rfind('_', u2 - 1);
    if (u1 == std::string_view::npos) return fail();
    auto parse_num = [&](std::string_view s, std::size_t& out) {
        if (s.empty()) return false;
        std::size_t v = 0;
        for (char c : s) {
            if (c < '0' || c > '9') return false;
            v = v * 10 + static_cast<std::size_t>(c - '0');
        }
        out = v;
        return true;
    };
    DocIdParts parts;
    if (!parse_num(doc_id.substr(u1 + 1, u2 - u1 - 1), parts.start)) return fail();
    if (!parse_num(doc_id.substr(u2 + 1), parts.end)) return fail();
    std::string_view prefix = doc_id.substr(0, u1);
    std::size_t slash = prefix.find('/');
    if (slash == std::string_view::npos || slash == 0 || slash + 1 >= prefix.size()) return fail();
    if (parts.start >= parts.end) return fail();
    parts.repo = std::string(prefix.substr(0, slash));
    parts.rel_path = std::string(prefix.substr(slash + 1));
    return parts;
}

// ---------- repo walking ----------

inline void validate_repo_source(const RepoSource& source) {
    if (source.name.empty()) throw ConfigError("repo name must be non-empty");
    if (source.name.find('/') != std::string::npos || source.name.find('\\') != std::string::npos) {
        throw ConfigError("repo name must not contain path separators: " + source.name);
    }
    std::error_code ec;
    if (!fs::is_directory(source.root_path, ec)) {
        throw ConfigError("repo root is not a readable directory: " + source.root_path);
    }
}

inline bool extension_skipped(std::string_view rel_path, const ChunkerConfig& cfg) {
    std::size_t dot = rel_path.rfind('.');
    std::size_t slash = rel_path.rfind('/');
    if (dot == std::string_view::npos) return false;
    if (slash != std::string_view::npos && dot < slash) return false;
    std::string ext = to_lower_ascii(rel_path.substr(dot));
    return cfg.skip_extensions.count(ext) > 0;
}

// Lists every regular file under the repo root exactly once, lexicographic by
// rel_path, without following symlinks. rel_path is checked against ".."
// escapes (possible only via crafted directory entries).
inline std::vector<FileRecord> walk_repo(const RepoSource& source,
                                         const ChunkerConfig& cfg = {}) {
    validate_repo_source(source);
    std::vector<FileRecord> records;
    fs::path root(source.root_path);
    std::error_code ec;
    auto it = fs::recursive_directory_iterator(
        root, fs::directory_options::skip_permission_denied, ec);
    if (ec) throw ConfigError("cannot walk repo root: " + source.root_path + ": " + ec.message());
    for (; it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_symlink(ec)) continue; // not followed
        if (!it->is_regular_file(ec)) continue;
        std::string rel = fs::relative(it->path(), root, ec).generic_string();
        if (ec || rel.empty()) continue;
        if (rel == ".." || rel.rfind("../", 0) == 0 || rel.find("/../") != std::string::npos) {
            throw ConfigError("path escapes repo root: " + rel);
        }
        FileRecord rec;
        rec.repo = source.name;
        rec.rel_path = std::move(rel);
        rec.byte_len = it->file_size(ec);
        if (ec) rec.byte_len = 0;
        rec.indexable = !extension_skipped(rec.rel_path, cfg);
        records.push_back(std::move(rec));
    }
    std::sort(records.begin(), records.end(),
              [](const FileRecord& a, const FileRecord& b) { return a.rel_path < b.rel_path; });
    return records;
}

// False iff the extension is on the skip set or the content is not valid
// UTF-8 ("unrecognized file formats" operationalized as non-text content).
inline bool should_index_file(const FileRecord& record, std::string_view content,
                              const ChunkerConfig& cfg = {}) {
    if (extension_skipped(record.rel_path, cfg)) return false;
    return is_valid_utf8(content);
}

// ---------- chunking ----------

namespace detail {

// Splits one over-budget line at token end boundaries; every piece holds at
// most max_tokens tokens and the pieces partition [line_start, line_end).
inline void hard_split_line(std::string_view file_text, std::size_t line_start,
                            std::size_t line_end, const Tokenizer& tok,
                            std::size_t max_tokens,
                            std::vector<std::pair<std::size_t, std::size_t>>& out) {
    std::string_view line = file_text.substr(line_start, line_end - line_start);
    auto spans = tok.spans(line);
    std::size_t piece_start = line_start;
    std::size_t taken = 0;
    for (std::size_t s = 0; s < spans.size(); ++s) {
        ++taken;
        if (taken == max_tokens && s + 1 < spans.size()) {
            std::size_t cut = line_start + spans[s].end;
            out.emplace_back(piece_start, cut);
            piece_start = cut;
            taken = 0;
        }
    }
    out.emplace_back(piece_start, line_end);
}

} // namespace detail

// Contiguous, non-overlapping chunks whose concatenation reproduces the input
// exactly. Boundaries snap to line breaks; a single line over the budget is
// hard-split at token boundaries.
inline std::vector<DocumentChunk> chunk_file(const FileRecord& record, std::string_view text,
                                             const Tokenizer& tok, std::size_t max_tokens = 2048) {
    if (max_tokens < 1) throw ContractError("max_tokens must be >= 1");
    std::vector<DocumentChunk> chunks;
    if (text.empty()) return chunks;

    std::vector<std::pair<std::size_t, std::size_t>> bounds;
    std::size_t cur_start = 0;
    std::size_t cur_end = 0;
    std::size_t cur_tokens = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::size_t line_end = (nl == std::string_view::npos) ? text.size() : nl + 1;
        std::size_t line_tokens = tok.count(text.substr(pos, line_end - pos));
        if (line_tokens > max_tokens) {
            if (cur_end > cur_start) bounds.emplace_back(cur_start, cur_end);
            detail::hard_split_line(text, pos, line_end, tok, max_tokens, bounds);
            cur_start = line_end;
            cur_end = line_end;
            cur_tokens = 0;
        } else if (cur_tokens + line_tokens > max_tokens) {
            bounds.emplace_back(cur_start, cur_end);
            cur_start = pos;
            cur_end = line_end;
            cur_tokens = line_tokens;
        } else {
            cur_tokens += line_tokens;
            cur_end = line_end;
        }
        pos = line_end;
    }
    if (cur_end > cur_start) bounds.emplace_back(cur_start, cur_end);

    chunks.reserve(bounds.size());
    for (auto [start, end] : bounds) {
        DocumentChunk c;
        c.repo = record.repo;
        c.rel_path = record.rel_path;
        c.start = start;
        c.end = end;
        c.text = std::string(text.substr(start, end - start));
        c.token_count = tok.count(c.text);
        c.doc_id = make_doc_id(record.repo, record.rel_path, start, end);
        chunks.push_back(std::move(c));
    }
    return chunks;
}

// ---------- corpus building ----------

inline json chunk_to_json(const DocumentChunk& c) {
    return json{{"doc_id", c.doc_id}, {"text", c.text},   {"repo", c.repo},
                {"path", c.rel_path}, {"start", c.start}, {"end", c.end},
                {"token_count", c.token_count}};
}

inline DocumentChunk chunk_from_json(const json& j) {
    DocumentChunk c;
    c.doc_id = j.at("doc_id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.repo = j.at("repo").get<std::string>();
    c.rel_path = j.at("path").get<std::string>();
    c.start = j.at("start").get<std::size_t>();
    c.end = j.at("end").get<std::size_t>();
    c.token_count = j.at("token_count").get<std::size_t>();
    return c;
}

inline json manifest_to_json(const CorpusManifest& m) {
    json repos = json::array();
    for (const auto& r : m.repos) {
        repos.push_back({{"name", r.name}, {"root_path", r.root_path}, {"branch_note", r.branch_note}});
    }
    return json{{"corpus_id", m.corpus_id},      {"repos", repos},
                {"chunk_count", m.chunk_count},  {"file_count", m.file_count},
                {"skipped_count", m.skipped_count}, {"tokenizer_id", m.tokenizer_id},
                {"max_tokens", m.max_tokens}};
}

inline CorpusManifest manifest_from_json(const json& j) {
    CorpusManifest m;
    m.corpus_id = j.at("corpus_id").get<std::string>();
    for (const auto& r : j.at("repos")) {
        m.repos.push_back({r.at("name").get<std::string>(), r.at("root_path").get<std::string>(),
                           r.value("branch_note", std::string{})});
    }
    m.chunk_count = j.at("chunk_count").get<std::size_t>();
    m.file_count = j.at("file_count").get<std::size_t>();
    m.skipped_count = j.at("skipped_count").get<std::size_t>();
    m.tokenizer_id = j.at("tokenizer_id").get<std::string>();
    m.max_tokens = j.value("max_tokens", std::size_t{0});
    return m;
}

// Walks every source, chunks indexable files, and writes one JSONL record per
// chunk plus a manifest sidecar ("<out>.manifest.json").
inline CorpusManifest build_corpus(const std::vector<RepoSource>& sources, const fs::path& out_path,
                                   const Tokenizer& tok, const ChunkerConfig& cfg = {}) {
    if (sources.empty()) throw ConfigError("at least one repo source is required");
    std::set<std::string> names;
    for (const auto& s : sources) {
        validate_repo_source(s);
        if (!names.insert(s.name).second) throw ConfigError("duplicate repo name: " + s.name);
    }

    CorpusManifest manifest;
    manifest.repos = sources;
    manifest.tokenizer_id = tok.id();
    manifest.max_tokens = cfg.max_tokens;

    std::string corpus_body;
    Sha256 corpus_hash;
    for (const auto& source : sources) {
        for (auto& rec : walk_repo(source, cfg)) {
            if (!rec.indexable) {
                ++manifest.skipped_count;
                continue;
            }
            std::string content;
            try {
                content = read_file(fs::path(source.root_path) / fs::path(rec.rel_path));
            } catch (const Error&) {
                warn("unreadable file skipped: " + rec.repo + "/" + rec.rel_path);
                ++manifest.skipped_count;
                continue;
            }
            if (!is_valid_utf8(content)) {
                ++manifest.skipped_count;
                continue;
            }
            ++manifest.file_count;
            for (const auto& chunk : chunk_file(rec, content, tok, cfg.max_tokens)) {
                std::string line = chunk_to_json(chunk).dump();
                line += '\n';
                corpus_hash.update(line);
                corpus_body += line;
                ++manifest.chunk_count;
            }
        }
    }
    if (manifest.chunk_count == 0) throw ConfigError("no indexable files; corpus would be empty");

    manifest.corpus_id = corpus_hash.finish_hex();
    atomic_write_file(out_path, corpus_body);
    fs::path manifest_path = out_path;
    manifest_path += ".manifest.json";
    atomic_write_file(manifest_path, manifest_to_json(manifest).dump(2) + "\n");
    return manifest;
}

inline std::vector<DocumentChunk> read_corpus(const fs::path& path) {
    std::vector<DocumentChunk> chunks;
    for (const auto& j : read_jsonl(path)) chunks.push_back(chunk_from_json(j));
    return chunks;
}

} // namespace freshstack
