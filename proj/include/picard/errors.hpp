// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace picard {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A drift (or the state produced from it) is non-finite, or a worker failed
/// while computing it. Carries the step and seed so the failure can be replayed.
class PoisonedDrift : public Error {
public:
    PoisonedDrift(std::int64_t step, std::uint64_t seed, const std::string& detail);

    std::int64_t step() const noexcept { return step_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::int64_t step_;
    std::uint64_t seed_;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ScheduleError : public Error {
public:
    using Error::Error;
};

class ObjectiveError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value. `field()` is the dotted key, e.g. "engine.gamma".
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& detail);

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Internal invariant violated; always an engine bug.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

}  // namespace picard
