#pragma once

#include <stdexcept>
#include <string>

namespace timeraf {

// Bad configuration: dimension mismatches, invalid hyperparameters,
// malformed config files. CLI exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad data: missing files, unparseable CSV, corrupted binary formats.
// CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: NaN losses, divergence. CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Binary container failures carry a distinct code per failure mode.
struct FormatError : DataError {
    enum class Code { bad_magic, bad_version, bad_checksum, truncated };
    Code code;
    FormatError(Code c, const std::string& msg) : DataError(msg), code(c) {}
};

}  // namespace timeraf
