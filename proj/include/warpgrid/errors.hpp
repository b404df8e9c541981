#pragma once

#include <stdexcept>
#include <string>

namespace warpgrid {

// Error taxonomy mirrored by the CLI exit codes:
//   ConfigError -> 2, IoError/FormatError -> 3, NumericError -> 4.

// Invalid configuration or command usage.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem-level failure (missing file, unwritable directory, ...).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A file exists but its contents are not acceptable.
struct FormatError : std::runtime_error {
    enum class Code {
        malformed,          // corrupt/truncated stream
        unsupported,        // legal file, unsupported bit depth or color type
        bad_magic,          // wrong leading magic bytes
        size_mismatch,      // header dims inconsistent with payload size
    };
    Code code;
    FormatError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

// Non-finite values or an optimization that cannot proceed.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace warpgrid
