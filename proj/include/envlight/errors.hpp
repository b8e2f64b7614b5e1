// Copyright 2026 The envlight Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace envlight {

/// Base class for every error raised by the library. Callers that only need
/// a message catch this; the CLI and the service map subclasses to exit codes
/// and HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (zero vector,
/// non-positive bandwidth, degenerate field of view, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Image or grid dimensions that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a type invariant (negative color, sigma <= 0, ...).
/// `field` names the offending field when known.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::string field = {})
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Malformed input bytes. `offset` is the byte position where decoding
/// failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// The optimizer produced a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace envlight
