#pragma once

#include <stdexcept>
#include <string>

namespace cogen {

// Every failure raised by the library derives from Error so callers can map
// it to a stage and an exit code without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class InvalidDistribution : public Error {
 public:
  using Error::Error;
};

class IncompatibleVocab : public Error {
 public:
  using Error::Error;
};

// Raised when a request to a context-blind backend would carry private context.
class PrivacyViolation : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what, bool retryable = true)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace cogen
