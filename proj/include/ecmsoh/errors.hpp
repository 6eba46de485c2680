/*
 * Copyright 2026 The ecmsoh Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ecmsoh {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violation on numeric inputs (non-positive frequency, bad
/// ordering, non-finite values).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Closed-form parameter extraction produced a non-physical intermediate or
/// result. `parameter()` names the offending ECM parameter.
class ExtractionError : public Error {
 public:
  ExtractionError(std::string parameter, std::string reason)
      : Error("extraction failed for " + parameter + ": " + reason),
        parameter_(std::move(parameter)),
        reason_(std::move(reason)) {}

  const std::string& parameter() const noexcept { return parameter_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string parameter_;
  std::string reason_;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

// Signal pipeline.
class RateError : public Error {
 public:
  using Error::Error;
};
class LengthError : public Error {
 public:
  using Error::Error;
};
class SettlingError : public Error {
 public:
  using Error::Error;
};
class SignalError : public Error {
 public:
  using Error::Error;
};

// Regression.
class SizeError : public Error {
 public:
  using Error::Error;
};
class RankError : public Error {
 public:
  using Error::Error;
};
class UnknownCellError : public Error {
 public:
  using Error::Error;
};

// Dataset / artifacts.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(std::vector<std::string> missing)
      : Error(describe(missing)), missing_(std::move(missing)) {}

  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  static std::string describe(const std::vector<std::string>& missing) {
    std::string msg = "missing columns:";
    for (const auto& m : missing) msg += " " + m;
    return msg;
  }

  std::vector<std::string> missing_;
};

class EmptyTableError : public Error {
 public:
  using Error::Error;
};
class VersionError : public Error {
 public:
  using Error::Error;
};
class RangeError : public Error {
 public:
  using Error::Error;
};

}  // namespace ecmsoh
