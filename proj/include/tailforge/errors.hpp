#pragma once

#include <stdexcept>
#include <string>

namespace tailforge {

// Invalid configuration or malformed input files. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset / checkpoint file problems. Each failure mode carries a distinct code.
class IoError : public std::runtime_error {
public:
    enum class Code {
        missing_file,
        size_mismatch,
        version_mismatch,
        checksum_mismatch,
        validation,
        write_failed,
    };

    IoError(Code code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

// Non-finite values or degenerate numeric state (zero weight rows, bad BN stats).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Data-dependent pipeline failures discovered mid-run (e.g. a cleaning round
// that would exhaust a class). Maps to CLI exit code 1.
class PipelineError : public std::runtime_error {
public:
    explicit PipelineError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tailforge
