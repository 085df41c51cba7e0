/*
 * Copyright 2026 The ldml Authors.
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

#ifndef LDML_ERROR_HPP
#define LDML_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ldml {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad shape, non-PD prior...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Round-off or conditioning made a computation impossible.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// The optimization problem cannot be satisfied.
class Infeasible : public Error {
 public:
  using Error::Error;
};

/// Input files are malformed.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace ldml

#endif  // LDML_ERROR_HPP
