#ifndef TRUG_ERRORS_HPP
#define TRUG_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trug {

/// Argument outside the mathematical domain of an operation (non-finite input, infinite point).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Caller violated a documented precondition (shape mismatch, empty batch, bad ordering).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf produced during training or a rejection loop that hit its safety cap.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact enumeration requested for a model that is too large to enumerate.
class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Malformed input file. `offset` is a byte offset (binary formats) or a line number (text formats).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Invalid run configuration, or a checkpoint that does not match the requested model.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ContractError(message);
}

}  // namespace trug

#endif  // TRUG_ERRORS_HPP
