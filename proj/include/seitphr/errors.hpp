/*
 * Copyright (C) 2026 The seitphr Authors
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
#ifndef SEITPHR_ERRORS_HPP
#define SEITPHR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace seitphr {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched dimensions between states, controls and parameters.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant (simplex, sign, bounds).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a mathematical conversion.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Calibration against an all-zero contact matrix.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// The integrated state left the probability simplex.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double time_days, std::size_t group, std::string compartment)
      : Error(what), time_days_(time_days), group_(group), compartment_(std::move(compartment)) {}

  double time_days() const noexcept { return time_days_; }
  std::size_t group() const noexcept { return group_; }
  const std::string& compartment() const noexcept { return compartment_; }

 private:
  double time_days_;
  std::size_t group_;
  std::string compartment_;
};

/// The transition matrix of the next-generation construction is singular.
class DecompositionError : public Error {
 public:
  using Error::Error;
};

/// A bisection bracket does not straddle the feasibility boundary.
class BracketError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration file or command-line value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace seitphr

#endif  // SEITPHR_ERRORS_HPP
