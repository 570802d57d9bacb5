// Copyright 2026 The Altar Authors
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
#include <string_view>

namespace altar {

// Every failure raised by the library carries one of these codes. The C API
// exposes the same set as `altar_status` values (same order, offset by one).
enum class ErrorCode {
  InvalidArgument,
  KeyInvalid,
  DepthExceeded,
  NonFiniteNumber,
  IllegalTransition,
  NotFound,
  ImmutableRecord,
  Conflict,
  NonMonotonicStep,
  LimitExceeded,
  FilterInvalid,
  CorruptJournal,
  LockHeld,
  StorageFull,
  IoFailure,
  HashMismatch,
  Unauthorized,
  ConfigParseError,
  EmptyFolder,
  MetricCsvMalformed,
  ServerUnreachable,
  UploadFailed,
  SyntaxError,
  ChecksumMismatch,
};

std::string_view error_name(ErrorCode code);

// Inverse of error_name; unknown names map to IoFailure.
ErrorCode error_code_from_name(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace altar
