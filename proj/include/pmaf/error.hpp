/*
 * Copyright 2026 The pmaf Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace pmaf
{

// Base of every error thrown by the library. Callers that do not care about
// the category can catch this alone.
class Error : public std::runtime_error
{
   public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform (non-square where square is required,
// mismatched lengths, ...).
class ShapeError : public Error
{
   public:
    using Error::Error;
};

// Non-finite entries or arguments outside the admissible domain.
class DomainError : public Error
{
   public:
    using Error::Error;
};

// Zero-norm vectors and other inputs that make an operation undefined.
class DegenerateInputError : public Error
{
   public:
    using Error::Error;
};

class SingularMatrixError : public Error
{
   public:
    SingularMatrixError(const std::string& what, double condition_estimate)
        : Error(what + " (condition estimate " + std::to_string(condition_estimate) + ")"),
          condition_estimate_(condition_estimate)
    {
    }

    double condition_estimate() const noexcept { return condition_estimate_; }

   private:
    double condition_estimate_;
};

// The scalar A H^{-1} A^T of a single-row constraint Jacobian vanished.
class DegenerateConstraintError : public Error
{
   public:
    using Error::Error;
};

// A x = 0 during power iteration or a fixed-point residual evaluation.
class ZeroImageError : public Error
{
   public:
    using Error::Error;
};

// A NaN or Inf appeared inside an iterative solver.
class NumericFailure : public Error
{
   public:
    NumericFailure(const std::string& what, std::size_t iteration)
        : Error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration)
    {
    }

    std::size_t iteration() const noexcept { return iteration_; }

   private:
    std::size_t iteration_;
};

class InvalidConfigError : public Error
{
   public:
    using Error::Error;
};

// Raised by the reference oracles: the oracle cannot produce an answer for
// this input (complex dominant pair, size cap exceeded, NaN while probing).
class OracleError : public Error
{
   public:
    using Error::Error;
};

}  // namespace pmaf
