// Copyright 2026 The pqmim Authors.
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

#ifndef PQMIM_ERROR_H_
#define PQMIM_ERROR_H_

#include <stdexcept>
#include <string>

namespace pqmim {

enum class ErrorCode {
  kInvalidInput,
  kInvalidConfig,
  kCorruptData,
  kModelMismatch,
  kUnsupportedVersion,
  kIo,
};

const char* ErrorCodeName(ErrorCode code);

// All library failures are reported through this exception type. The code
// is what callers (the CLI in particular) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) Fail(code, message);
}

}  // namespace pqmim

#endif  // PQMIM_ERROR_H_
