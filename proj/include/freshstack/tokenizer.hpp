#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "freshstack/text.hpp"

namespace freshstack {

struct TokenSpan {
    std::size_t begin = 0; // byte offset, inclusive
    std::size_t end = 0;   // byte offset, exclusive
};

// Token-budget counter used by the chunker and the report stage. Pluggable so
// an exact BPE adapter can be swapped in; the default is a self-contained
// approximate tokenizer chosen for offline determinism.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::string id() const = 0;
    virtual std::vector<TokenSpan> spans(std::string_view text) const = 0;
    virtual std::size_t count(std::string_view text) const { return spans(text).size(); }
};

// Whitespace + punctuation segmentation: a token is either a maximal run of
// word bytes (ASCII alnum or >=0x80) or a single ASCII punctuation byte.
// Whitespace separates and is never part of a token, so per-line counts add
// up to whole-file counts.
class ApproxTokenizer final : public Tokenizer {
public:
    std::string id() const override { return "approx-v1"; }

    std::vector<TokenSpan> spans(std::string_view text) const override {
        std::vector<TokenSpan> out;
        std::size_t i = 0;
        while (i < text.size()) {
            unsigned char c = static_cast<unsigned char>(text[i]);
            if (is_ascii_space(c)) {
                ++i;
            } else if (is_word_byte(c)) {
                std::size_t j = i + 1;
                while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
                out.push_back({i, j});
                i = j;
            } else {
                out.push_back({i, i + 1});
                ++i;
            }
        }
        return out;
    }

    std::size_t count(std::string_view text) const override {
        std::size_t n = 0;
        std::size_t i = 0;
        while (i < text.size()) {
            unsigned char c = static_cast<unsigned char>(text[i]);
            if (is_ascii_space(c)) {
                ++i;
            } else if (is_word_byte(c)) {
                ++n;
                ++i;
                while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
            } else {
                ++n;
                ++i;
            }
        }
        return n;
    }
};

inline std::shared_ptr<const Tokenizer> default_tokenizer() {
    static auto tok = std::make_shared<const ApproxTokenizer>();
    return tok;
}

} // namespace freshstack
