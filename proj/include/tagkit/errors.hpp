#pragma once

#include <stdexcept>
#include <string>

namespace tagkit {

// Error taxonomy shared by the library and the CLI. Exit codes:
//   2 config, 3 IO/format, 4 data mismatch, 5 backend failure.

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class BackendError : public std::runtime_error {
public:
    BackendError(const std::string& msg, bool retriable)
        : std::runtime_error(msg), retriable_(retriable) {}
    bool retriable() const { return retriable_; }

private:
    bool retriable_;
};

class TemplateError : public std::runtime_error {
public:
    explicit TemplateError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tagkit
