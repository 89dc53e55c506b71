#pragma once

#include <stdexcept>
#include <string>

namespace invseq {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// exit codes: config/usage -> 1, data -> 2, training divergence -> 3.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape disagreement between tensors or layers.
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Value outside an operation's domain (empty softmax, non-normalized
// probability vector, ...).
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration (k > n, dropout rate >= 1, degenerate ranges, ...).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Operation called on a model variant that does not support it.
struct VariantError : ConfigError {
    explicit VariantError(const std::string& msg) : ConfigError(msg) {}
};

// Bad input data: non-finite frames, missing labels, malformed files.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// File parsing failure; carries the offending line when known.
struct ParseError : DataError {
    explicit ParseError(const std::string& msg) : DataError(msg) {}
    ParseError(const std::string& msg, long line)
        : DataError(msg + " (line " + std::to_string(line) + ")") {}
};

// File format version not understood by this build.
struct VersionError : DataError {
    explicit VersionError(const std::string& msg) : DataError(msg) {}
};

// Training failure (divergence, non-finite loss).
struct TrainingError : Error {
    explicit TrainingError(const std::string& msg) : Error(msg) {}
};

}  // namespace invseq
