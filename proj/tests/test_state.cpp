// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "picard/errors.hpp"
#include "picard/state.hpp"

using namespace picard;

namespace {

ParamState with_moments() {
    auto s = make_state(5, {0.5, -1.25, 3.0});
    s.moments = MomentState{{0.1, 0.2, 0.3}, {0.01, 0.02, 0.03}, 7};
    return s;
}

}  // namespace

TEST_CASE("clone is a deep copy") {
    auto a = make_state(0, {1.0, 2.0});
    auto b = clone_state(a);
    CHECK(b.values == std::vector<double>{1.0, 2.0});
    b.values[0] = 42.0;
    CHECK(a.values[0] == 1.0);

    auto m = with_moments();
    auto mc = clone_state(m);
    REQUIRE(mc.moments);
    CHECK(mc.moments->t == 7);
    mc.moments->m1[0] = -1.0;
    CHECK(m.moments->m1[0] == 0.1);
    CHECK(bitwise_equal(m, clone_state(m)));
}

TEST_CASE("make_state sets dim_tag from the point width") {
    CHECK(make_state(0, std::vector<double>(8, 0.0), 4).dim_tag == 2);
    CHECK(make_state(0, std::vector<double>(3, 0.0)).dim_tag == 3);
    CHECK_THROWS_AS(make_state(0, std::vector<double>(6, 0.0), 4), DimensionError);
}

TEST_CASE("checksum: pinned values from an independent FNV-1a") {
    // Computed by hand-packing the documented byte layout in Python.
    CHECK(state_checksum(make_state(3, {1.0, 2.0}, 1)) == 0x0f0725368c56ce75ULL);
    auto s = make_state(3, {1.0, 2.0});
    s.dim_tag = 2;
    CHECK(state_checksum(s) == 0x0f0725368c56ce75ULL);
    auto m = with_moments();
    CHECK(state_checksum(m) == 0x53b741d2c4777600ULL);
}

TEST_CASE("checksum: determinism and sensitivity") {
    auto a = with_moments();
    CHECK(state_checksum(a) == state_checksum(clone_state(a)));

    auto flipped = clone_state(a);
    flipped.values[1] = -flipped.values[1];
    CHECK(state_checksum(flipped) != state_checksum(a));

    auto zero = make_state(0, {0.0});
    auto negzero = make_state(0, {-0.0});
    CHECK(state_checksum(zero) != state_checksum(negzero));

    auto moved = clone_state(a);
    moved.moments->m2[2] = 0.04;
    CHECK(state_checksum(moved) != state_checksum(a));

    auto tagged = clone_state(a);
    tagged.aux_version = 9;  // diagnostic only
    CHECK(state_checksum(tagged) == state_checksum(a));
}

TEST_CASE("validate_state") {
    auto s = make_state(0, {1.0, 2.0});
    CHECK_NOTHROW(validate_state(s, 1));
    CHECK_THROWS_AS(validate_state(s, 2), DimensionError);
    s.values[0] = NAN;
    CHECK_THROWS_AS(validate_state(s, 1), Error);
    auto m = with_moments();
    m.moments->m1.pop_back();
    CHECK_THROWS_AS(validate_state(m, 1), DimensionError);
}

TEST_CASE("binary round trip is bit-exact") {
    auto a = with_moments();
    a.aux_version = 4;
    auto b = make_state(7, {-0.0, 1e-310, 123.456}, 1);
    std::vector<ParamState> states{a, b};
    std::stringstream ss;
    write_states(ss, states);
    const auto back = read_states(ss);
    REQUIRE(back.size() == 2);
    CHECK(bitwise_equal(back[0], a));
    CHECK(back[0].aux_version == 4);
    CHECK(bitwise_equal(back[1], b));
    CHECK_FALSE(back[1].moments.has_value());
}

TEST_CASE("binary layout header") {
    std::stringstream ss;
    write_state(ss, make_state(1, {2.0}));
    const auto bytes = ss.str();
    // magic, version, step, dim_tag, aux_version, n, one value, flag
    CHECK(bytes.size() == 4 + 4 + 8 + 8 + 8 + 8 + 8 + 1);
    CHECK(bytes.substr(0, 4) == "PCST");
    CHECK(bytes[8] == 1);   // step, little-endian
    CHECK(bytes.back() == 0);
}

TEST_CASE("truncated or foreign input is rejected") {
    std::stringstream ss;
    write_state(ss, make_state(1, {2.0, 3.0}));
    auto bytes = ss.str();
    std::stringstream cut(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(read_state(cut), Error);
    std::stringstream junk("XXXXjunk");
    CHECK_THROWS_AS(read_state(junk), Error);
}

TEST_CASE("json round trip") {
    auto a = with_moments();
    const auto back = state_from_json(state_to_json(a));
    CHECK(bitwise_equal(back, a));
    auto plain = make_state(2, {1.5});
    CHECK(state_to_json(plain)["moments"].is_null());
    CHECK(bitwise_equal(state_from_json(state_to_json(plain)), plain));
}
