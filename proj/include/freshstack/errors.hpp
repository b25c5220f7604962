#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace freshstack {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user-supplied configuration: missing roots, duplicate repo names, bad TOML.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Caller violated an API precondition: dimension mismatch, duplicate doc ids,
// mismatched question sets.
class ContractError : public Error {
public:
    using Error::Error;
};

// Provider failure that survived the retry budget. Carries the per-attempt log.
class TransportError : public Error {
public:
    TransportError(const std::string& what, std::vector<std::string> attempts)
        : Error(what), attempts_(std::move(attempts)) {}
    const std::vector<std::string>& attempts() const { return attempts_; }

private:
    std::vector<std::string> attempts_;
};

// LLM output that could not be parsed into the expected structure.
class ParseError : public Error {
public:
    using Error::Error;
};

// Cross-artifact inconsistency: doc id absent from corpus, qrels referencing
// unknown questions.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Stage-state violations: stale upstream artifacts, interrupted stages.
class PipelineError : public Error {
public:
    using Error::Error;
};

} // namespace freshstack
