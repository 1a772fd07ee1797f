// Copyright 2026 The essayscore Authors.
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

#include <stdexcept>
#include <string>

namespace essayscore {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached an operation that requires finite input.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition (non-scalar loss, all-masked pooling...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Bad user-supplied data: files, token ids, record sets.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A required CSV column is missing.
class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

/// A value parsed fine but violates a domain rule (e.g. off-lattice score).
class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

/// Unknown or malformed configuration key/value.
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace essayscore
