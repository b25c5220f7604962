#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "freshstack/errors.hpp"
#include "freshstack/gateway.hpp"
#include "freshstack/io.hpp"
#include "freshstack/run_file.hpp"

namespace freshstack {

// Exact top-k search over unit vectors; dot product equals cosine. No ANN:
// the corpora here are small enough for brute force. Immutable after build.
class DenseIndex {
public:
    static DenseIndex build(std::vector<std::string> doc_ids,
                            const std::vector<EmbeddingVector>& vectors, std::string model_id) {
        if (doc_ids.size() != vectors.size()) {
            throw ContractError("doc_ids/vectors length mismatch");
        }
        if (vectors.empty()) throw ConfigError("cannot build an empty dense index");
        DenseIndex idx;
        idx.dims_ = vectors[0].dims();
        idx.doc_ids_ = std::move(doc_ids);
        idx.model_id_ = std::move(model_id);
        idx.matrix_.reserve(vectors.size() * idx.dims_);
        for (const auto& v : vectors) {
            if (v.dims() != idx.dims_) throw ContractError("inconsistent embedding dims in index build");
            double n = l2_norm(v);
            if (std::abs(n - 1.0) > 1e-3) throw ContractError("index rows must be unit-normalized");
            idx.matrix_.insert(idx.matrix_.end(), v.values.begin(), v.values.end());
        }
        return idx;
    }

    std::size_t doc_count() const { return doc_ids_.size(); }
    std::size_t dims() const { return dims_; }
    const std::string& model_id() const { return model_id_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }

    std::vector<ScoredDoc> search(const EmbeddingVector& query, std::size_t k) const {
        if (k < 1) throw ContractError("k must be >= 1");
        if (query.dims() != dims_) {
            throw ContractError("query dims " + std::to_string(query.dims()) + " != index dims " +
                                std::to_string(dims_));
        }
        double qn = l2_norm(query);
        if (std::abs(qn - 1.0) > 1e-3) throw ContractError("query must be unit-normalized");
        std::vector<ScoredDoc> hits;
        hits.reserve(doc_count());
        for (std::size_t d = 0; d < doc_count(); ++d) {
            const float* row = matrix_.data() + d * dims_;
            double s = 0.0;
            for (std::size_t i = 0; i < dims_; ++i) {
                s += static_cast<double>(row[i]) * static_cast<double>(query.values[i]);
            }
            hits.push_back({doc_ids_[d], s, 0});
        }
        return top_k(std::move(hits), k);
    }

    // ---------- binary serialization (little-endian) ----------

    void save(const fs::path& path) const {
        std::string body;
        auto put_u32 = [&](std::uint32_t v) {
            char b[4];
            std::memcpy(b, &v, 4);
            body.append(b, 4);
        };
        auto put_u64 = [&](std::uint64_t v) {
            char b[8];
            std::memcpy(b, &v, 8);
            body.append(b, 8);
        };
        auto put_str = [&](const std::string& s) {
            put_u32(static_cast<std::uint32_t>(s.size()));
            body.append(s);
        };
        body.append("FSDI", 4);
        put_u32(1); // version
        put_u32(static_cast<std::uint32_t>(dims_));
        put_u64(doc_count());
        put_str(model_id_);
        for (const auto& id : doc_ids_) put_str(id);
        body.append(reinterpret_cast<const char*>(matrix_.data()), matrix_.size() * sizeof(float));
        atomic_write_file(path, body);
    }

    static DenseIndex load(const fs::path& path) {
        std::string body = read_file(path);
        std::size_t pos = 0;
        auto need = [&](std::size_t n) {
            if (pos + n > body.size()) throw ParseError("truncated dense index: " + path.string());
        };
        auto get_u32 = [&]() {
            need(4);
            std::uint32_t v;
            std::memcpy(&v, body.data() + pos, 4);
            pos += 4;
            return v;
        };
        auto get_u64 = [&]() {
            need(8);
            std::uint64_t v;
            std::memcpy(&v, body.data() + pos, 8);
            pos += 8;
            return v;
        };
        auto get_str = [&]() {
            std::uint32_t n = get_u32();
            need(n);
            std::string s = body.substr(pos, n);
            pos += n;
            return s;
        };
        need(4);
        if (body.compare(0, 4, "FSDI") != 0) throw ParseError("not a dense index file: " + path.string());
        pos += 4;
        std::uint32_t version = get_u32();
        if (version != 1) throw ParseError("unsupported dense index version");
        DenseIndex idx;
        idx.dims_ = get_u32();
        std::uint64_t count = get_u64();
        idx.model_id_ = get_str();
        idx.doc_ids_.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) idx.doc_ids_.push_back(get_str());
        std::size_t floats = static_cast<std::size_t>(count) * idx.dims_;
        need(floats * sizeof(float));
        idx.matrix_.resize(floats);
        std::memcpy(idx.matrix_.data(), body.data() + pos, floats * sizeof(float));
        pos += floats * sizeof(float);
        if (pos != body.size()) throw ParseError("trailing bytes in dense index: " + path.string());
        return idx;
    }

private:
    std::vector<float> matrix_; // row-major unit vectors
    std::vector<std::string> doc_ids_;
    std::size_t dims_ = 0;
    std::string model_id_;
};

} // namespace freshstack
