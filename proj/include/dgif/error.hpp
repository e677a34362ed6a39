#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dgif {

/// Category of a failure, stable across the C API boundary.
enum class ErrorCode {
  io = 1,
  parse = 2,
  dimension = 3,
  singular = 4,
  contract = 5,
  data = 6,
  degenerate = 7,
  diverged = 8,
  truncated = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCode::io, w) {}
};

struct ParseError : Error {
  ParseError(const std::string& w, std::size_t line)
      : Error(ErrorCode::parse, w + " (line " + std::to_string(line) + ")"),
        line(line) {}
  std::size_t line;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorCode::dimension, w) {}
};

/// Cholesky breakdown; `pivot` is the index of the failing diagonal entry.
struct SingularError : Error {
  SingularError(const std::string& w, std::size_t pivot)
      : Error(ErrorCode::singular, w + " (pivot " + std::to_string(pivot) + ")"),
        pivot(pivot) {}
  std::size_t pivot;
};

struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(ErrorCode::contract, w) {}
};

struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorCode::data, w) {}
};

struct DegenerateError : Error {
  explicit DegenerateError(const std::string& w) : Error(ErrorCode::degenerate, w) {}
};

struct DivergedError : Error {
  explicit DivergedError(const std::string& w) : Error(ErrorCode::diverged, w) {}
};

struct TruncationError : Error {
  explicit TruncationError(const std::string& w) : Error(ErrorCode::truncated, w) {}
};

}  // namespace dgif
