// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include "picard/errors.hpp"

namespace picard {

PoisonedDrift::PoisonedDrift(std::int64_t step, std::uint64_t seed, const std::string& detail)
    : Error("poisoned drift at step " + std::to_string(step) + " (seed " + std::to_string(seed) +
            "): " + detail),
      step_(step),
      seed_(seed) {}

ConfigError::ConfigError(std::string field, const std::string& detail)
    : Error(field + ": " + detail), field_(std::move(field)) {}

}  // namespace picard
