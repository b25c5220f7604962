#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "freshstack/errors.hpp"
#include "freshstack/sha256.hpp"

namespace freshstack {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    std::ostringstream oss;
    oss << in.rdbuf();
    if (in.bad()) throw ConfigError("read failed: " + path.string());
    return oss.str();
}

// All artifact writes go through a temp file + rename so an interrupted stage
// never leaves a partially written file at the final path.
inline void atomic_write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot open file for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw ConfigError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string file_sha256(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    Sha256 h;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h.update(buf, static_cast<std::size_t>(in.gcount()));
        if (in.eof()) break;
    }
    return h.finish_hex();
}

inline std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    std::vector<json> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ParseError("invalid JSON at " + path.string() + ":" + std::to_string(lineno));
        }
        records.push_back(std::move(j));
    }
    return records;
}

inline std::string to_jsonl(const std::vector<json>& records) {
    std::string out;
    for (const auto& j : records) {
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline void write_jsonl(const fs::path& path, const std::vector<json>& records) {
    atomic_write_file(path, to_jsonl(records));
}

// Deterministic fingerprint of a directory tree: sha256 over sorted
// (relative path, file sha256) pairs.
inline std::string tree_sha256(const fs::path& root) {
    std::vector<std::pair<std::string, std::string>> entries;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (!it->is_regular_file()) continue;
        std::string rel = fs::relative(it->path(), root).generic_string();
        entries.emplace_back(std::move(rel), file_sha256(it->path()));
    }
    std::sort(entries.begin(), entries.end());
    Sha256 h;
    for (const auto& [rel, sha] : entries) {
        h.update(rel);
        h.update("\0", 1);
        h.update(sha);
        h.update("\n", 1);
    }
    return h.finish_hex();
}

} // namespace freshstack
