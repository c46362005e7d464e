#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace specmix {

/// Tensor/layer shape mismatch; the message names both shapes involved.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration (bad peak position, empty partner pool, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file; the message carries the line number where known.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Diagnostics go to stderr; data never does.
void set_verbose(bool on);
bool verbose();
void log_warn(const std::string& msg);
void log_info(const std::string& msg);

} // namespace specmix
