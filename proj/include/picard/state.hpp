// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace picard {

/// Optimizer moments carried alongside the parameters of momentum-based rules.
struct MomentState {
    std::vector<double> m1;
    std::vector<double> m2;  // elementwise >= 0
    std::int64_t t = 0;      // applied updates, used for bias correction
};

/// Parameter vector at sequential time `step`.
///
/// `dim_tag` counts points; values.size() == dim_tag * point_width for the
/// governing rule (point_width is 1 for fixed-dimension problems).
/// `aux_version` is diagnostic only and never feeds arithmetic.
struct ParamState {
    std::int64_t step = 0;
    std::vector<double> values;
    std::int64_t dim_tag = 0;
    std::optional<MomentState> moments;
    std::int64_t aux_version = 0;
};

/// Output of the parallel computational unit for one step.
struct Drift {
    std::int64_t step = 0;
    std::vector<double> payload;
    std::uint64_t seed = 0;
    int worker_id = 0;
    std::int64_t aux_version = 0;
};

ParamState make_state(std::int64_t step, std::vector<double> values, std::int64_t point_width = 1);

ParamState clone_state(const ParamState& state);

/// FNV-1a over step, dim_tag, value bytes and moment bytes (little-endian).
std::uint64_t state_checksum(const ParamState& state);

/// Field-wise bitwise equality (aux_version excluded, like the checksum).
bool bitwise_equal(const ParamState& a, const ParamState& b);
bool bitwise_equal(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);

/// Throws DimensionError on shape violations, Error on non-finite values.
void validate_state(const ParamState& state, std::int64_t point_width);

// Binary layout (all integers and doubles little-endian):
//   "PCST" u32 version=1
//   i64 step, i64 dim_tag, i64 aux_version
//   u64 n, f64[n] values
//   u8 has_moments; if 1: i64 t, f64[n] m1, f64[n] m2
// A state list is "PCSL" u32 version=1 u64 count followed by count states.
void write_state(std::ostream& out, const ParamState& state);
ParamState read_state(std::istream& in);
void write_states(std::ostream& out, std::span<const ParamState> states);
std::vector<ParamState> read_states(std::istream& in);

void save_states(const std::filesystem::path& path, std::span<const ParamState> states);
std::vector<ParamState> load_states(const std::filesystem::path& path);

nlohmann::json state_to_json(const ParamState& state);
ParamState state_from_json(const nlohmann::json& j);

}  // namespace picard
