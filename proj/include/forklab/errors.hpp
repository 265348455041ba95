#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file errors.hpp
 * @brief Error taxonomy shared by every forklab module.
 *
 * Each error carries a category that maps 1:1 to a CLI exit code, so
 * failures stay machine-distinguishable end to end. Throw sites always
 * use the typed helpers below; catch sites may match on category.
 */

#include <stdexcept>
#include <string>

namespace forklab {

enum class ErrorCategory : int {
  config = 2,
  io = 3,
  parse = 4,
  empty_input = 5,
  index = 6,
  shape = 7,
  numerics = 8,
  length = 9,
  budget = 10,
  distribution = 11,
  zero_variance = 12,
  starved_batch = 13,
  duplicate_record = 14,
  range = 15,
  episode_done = 16,
};

/// Name used in CLI error messages; stable, lowercase, no spaces.
inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::empty_input: return "empty_input";
    case ErrorCategory::index: return "index";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::numerics: return "numerics";
    case ErrorCategory::length: return "length";
    case ErrorCategory::budget: return "budget";
    case ErrorCategory::distribution: return "distribution";
    case ErrorCategory::zero_variance: return "zero_variance";
    case ErrorCategory::starved_batch: return "starved_batch";
    case ErrorCategory::duplicate_record: return "duplicate_record";
    case ErrorCategory::range: return "range";
    case ErrorCategory::episode_done: return "episode_done";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(std::string(category_name(category)) + ": " + message),
        category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

#define FORKLAB_DEFINE_ERROR(ClassName, category_value)            \
  class ClassName : public Error {                                 \
   public:                                                         \
    explicit ClassName(const std::string& message)                 \
        : Error(ErrorCategory::category_value, message) {}         \
  }

FORKLAB_DEFINE_ERROR(ConfigError, config);
FORKLAB_DEFINE_ERROR(IoError, io);
FORKLAB_DEFINE_ERROR(ParseError, parse);
FORKLAB_DEFINE_ERROR(EmptyInputError, empty_input);
FORKLAB_DEFINE_ERROR(IndexError, index);
FORKLAB_DEFINE_ERROR(ShapeError, shape);
FORKLAB_DEFINE_ERROR(NumericsError, numerics);
FORKLAB_DEFINE_ERROR(LengthError, length);
FORKLAB_DEFINE_ERROR(BudgetError, budget);
FORKLAB_DEFINE_ERROR(DistributionError, distribution);
FORKLAB_DEFINE_ERROR(ZeroVarianceGroup, zero_variance);
FORKLAB_DEFINE_ERROR(StarvedBatchError, starved_batch);
FORKLAB_DEFINE_ERROR(DuplicateRecordError, duplicate_record);
FORKLAB_DEFINE_ERROR(RangeError, range);
FORKLAB_DEFINE_ERROR(EpisodeDoneError, episode_done);

#undef FORKLAB_DEFINE_ERROR

}  // namespace forklab
