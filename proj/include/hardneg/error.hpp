#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hardneg {

/// Coarse failure classes. The CLI maps these onto exit codes.
enum class ErrorKind {
  kUsage,      // bad flag or subcommand
  kConfig,     // invalid configuration
  kParse,      // malformed input file
  kIntegrity,  // structurally valid input that violates a uniqueness rule
  kArgument,   // precondition on an operation argument
  kContract,   // mismatched inputs between modules
  kData,       // numerically invalid data (non-finite logits)
  kTransport,  // network failure after retries
  kApi,        // HTTP non-success from the chat-completion endpoint
  kScript,     // mock script exhausted or mismatched
  kIncomplete, // pending work blocks an operation
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& w) : Error(ErrorKind::kUsage, w) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kConfig, w) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& w) : Error(ErrorKind::kParse, w) {}
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& w)
      : Error(ErrorKind::kIntegrity, w) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& w)
      : Error(ErrorKind::kArgument, w) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& w)
      : Error(ErrorKind::kContract, w) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& w) : Error(ErrorKind::kData, w) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& w)
      : Error(ErrorKind::kTransport, w) {}
};

class ApiError : public Error {
 public:
  ApiError(int status, const std::string& w)
      : Error(ErrorKind::kApi, w), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

class ScriptError : public Error {
 public:
  explicit ScriptError(const std::string& w) : Error(ErrorKind::kScript, w) {}
};

class IncompleteError : public Error {
 public:
  IncompleteError(const std::string& w, std::vector<std::string> ids)
      : Error(ErrorKind::kIncomplete, w), ids_(std::move(ids)) {}

  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& w) : Error(ErrorKind::kIo, w) {}
};

}  // namespace hardneg
