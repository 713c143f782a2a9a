// Copyright 2026 The nsg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace nsg {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument values (out-of-range indices, shape or dimension mismatches).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Problems with persisted artifacts.
class FormatError : public Error {
 public:
  using Error::Error;
};

class MalformedFile : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class CorruptFile : public FormatError {
 public:
  using FormatError::FormatError;
};

// Numerical failure during training or gradient checking.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace nsg
