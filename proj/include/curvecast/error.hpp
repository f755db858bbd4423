/*
 * Copyright 2026 The curvecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#pragma once

#include <stdexcept>
#include <string>

namespace curvecast {

/// Failure categories raised by the library. The CLI maps each category to
/// one of its exit codes (see exit_code()).
enum class ErrorKind {
  domain,               // argument outside the admissible interval
  invalid_knot,         // knot vector violates ordering or multiplicity rules
  invalid_nodes,        // duplicate Lagrange nodes
  invalid_matrix,       // non-finite or non-symmetric input
  invalid_variance,     // nonpositive variance parameter
  invalid_input,        // mismatched spaces / dimensions
  underdetermined_fit,  // rank-deficient regression design
  degenerate_model,     // zero variance in a retained component
  infeasible_fold,      // cross-validation fold cannot be evaluated
  unreliable_estimate,  // Monte Carlo effective sample size too small
  schema,               // CSV layout error
  no_data,              // nothing left after ingestion
  io,                   // file cannot be read or written
  usage,                // bad command-line / configuration value
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain error";
    case ErrorKind::invalid_knot: return "invalid knot";
    case ErrorKind::invalid_nodes: return "invalid nodes";
    case ErrorKind::invalid_matrix: return "invalid matrix";
    case ErrorKind::invalid_variance: return "invalid variance";
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::underdetermined_fit: return "underdetermined fit";
    case ErrorKind::degenerate_model: return "degenerate model";
    case ErrorKind::infeasible_fold: return "infeasible fold";
    case ErrorKind::unreliable_estimate: return "unreliable estimate";
    case ErrorKind::schema: return "schema error";
    case ErrorKind::no_data: return "no data";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::usage: return "usage error";
  }
  return "error";
}

/// 0 success, 1 usage error, 2 data error, 3 numerical failure.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
      return 1;
    case ErrorKind::schema:
    case ErrorKind::no_data:
    case ErrorKind::io:
    case ErrorKind::invalid_input:
    case ErrorKind::domain:
      return 2;
    default:
      return 3;
  }
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace curvecast
