#pragma once

#include <stdexcept>
#include <string>

namespace flashcomm {

// Base for every error raised by the library. Subclasses map one-to-one onto
// the failure classes callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& what) : Error("invalid config: " + what) {}
};

class InvalidData : public Error {
 public:
  explicit InvalidData(const std::string& what) : Error("invalid data: " + what) {}
};

class EncodeRange : public Error {
 public:
  explicit EncodeRange(const std::string& what) : Error("encode range: " + what) {}
};

class DecodeFormat : public Error {
 public:
  explicit DecodeFormat(const std::string& what) : Error("decode format: " + what) {}
};

class NotApplicable : public Error {
 public:
  explicit NotApplicable(const std::string& what) : Error("not applicable: " + what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("i/o: " + what) {}
};

}  // namespace flashcomm
