#ifndef IVNET_ERROR_HPP
#define IVNET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ivnet {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// NaN/Inf encountered, or a divergent training run.
class NumericError : public Error {
  public:
    using Error::Error;
};

/// Misuse of the autodiff graph (non-scalar loss, second backward, ...).
class GraphError : public Error {
  public:
    using Error::Error;
};

/// Malformed input records. Carries the 1-based line number when known.
class ParseError : public Error {
  public:
    ParseError(const std::string &msg, std::size_t line = 0)
        : Error(line == 0 ? msg : "line " + std::to_string(line) + ": " + msg), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Inputs that parse but are semantically unusable (bad spec, vocab mismatch, ...).
class DataError : public Error {
  public:
    using Error::Error;
};

}  // namespace ivnet

#endif
