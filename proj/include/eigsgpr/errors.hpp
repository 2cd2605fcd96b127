/*
 * Copyright 2026 The eigsgpr Authors
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
 */

#ifndef EIGSGPR_ERRORS_HPP_
#define EIGSGPR_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace eigsgpr {

// Invalid kernel/experiment settings (bad gamma for a family, bad dimension).
struct ConfigurationError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside an operation's precondition (m out of range, bad bracket).
struct ArgumentError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input point outside the kernel's domain.
struct DomainError : public std::domain_error {
  using std::domain_error::domain_error;
};

// Caller broke a structural contract, e.g. a non-symmetric "symmetric" matrix.
struct ContractViolation : public std::logic_error {
  using std::logic_error::logic_error;
};

// Round-off beyond the tolerated band or non-finite intermediate values.
struct NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed external feature files.
struct IngestionError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace eigsgpr

#endif  // EIGSGPR_ERRORS_HPP_
