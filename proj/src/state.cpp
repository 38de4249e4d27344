// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include "picard/state.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "picard/errors.hpp"

namespace picard {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr std::uint32_t kFormatVersion = 1;

class Fnv1a {
public:
    void add_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            hash_ ^= (v >> (8 * i)) & 0xffU;
            hash_ *= kFnvPrime;
        }
    }
    void add_i64(std::int64_t v) { add_u64(static_cast<std::uint64_t>(v)); }
    void add_f64(double v) { add_u64(std::bit_cast<std::uint64_t>(v)); }
    void add_byte(std::uint8_t b) {
        hash_ ^= b;
        hash_ *= kFnvPrime;
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = kFnvOffset;
};

void put_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> buf{};
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    out.write(buf.data(), buf.size());
}

void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> buf{};
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    out.write(buf.data(), buf.size());
}

void put_f64s(std::ostream& out, std::span<const double> v) {
    for (double x : v) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

std::uint64_t get_u64(std::istream& in) {
    std::array<unsigned char, 8> buf{};
    if (!in.read(reinterpret_cast<char*>(buf.data()), buf.size()))
        throw Error("state file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> buf{};
    if (!in.read(reinterpret_cast<char*>(buf.data()), buf.size()))
        throw Error("state file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

std::vector<double> get_f64s(std::istream& in, std::uint64_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = std::bit_cast<double>(get_u64(in));
    return v;
}

void expect_magic(std::istream& in, const char* magic) {
    std::array<char, 4> buf{};
    if (!in.read(buf.data(), buf.size()) || std::memcmp(buf.data(), magic, 4) != 0)
        throw Error(std::string("bad magic, expected ") + magic);
    if (const auto version = get_u32(in); version != kFormatVersion)
        throw Error("unsupported format version " + std::to_string(version));
}

}  // namespace

ParamState make_state(std::int64_t step, std::vector<double> values, std::int64_t point_width) {
    if (point_width < 1 || values.size() % static_cast<std::size_t>(point_width) != 0)
        throw DimensionError("values length " + std::to_string(values.size()) +
                             " is not a multiple of point width " + std::to_string(point_width));
    ParamState s;
    s.step = step;
    s.dim_tag = static_cast<std::int64_t>(values.size()) / point_width;
    s.values = std::move(values);
    return s;
}

ParamState clone_state(const ParamState& state) {
    return state;
}

std::uint64_t state_checksum(const ParamState& state) {
    Fnv1a h;
    h.add_i64(state.step);
    h.add_i64(state.dim_tag);
    h.add_u64(state.values.size());
    for (double v : state.values) h.add_f64(v);
    if (state.moments) {
        h.add_byte(1);
        h.add_i64(state.moments->t);
        for (double v : state.moments->m1) h.add_f64(v);
        for (double v : state.moments->m2) h.add_f64(v);
    } else {
        h.add_byte(0);
    }
    return h.value();
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    }
    return true;
}

bool bitwise_equal(const ParamState& a, const ParamState& b) {
    if (a.step != b.step || a.dim_tag != b.dim_tag) return false;
    if (!bitwise_equal(a.values, b.values)) return false;
    if (a.moments.has_value() != b.moments.has_value()) return false;
    if (a.moments) {
        return a.moments->t == b.moments->t && bitwise_equal(a.moments->m1, b.moments->m1) &&
               bitwise_equal(a.moments->m2, b.moments->m2);
    }
    return true;
}

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void validate_state(const ParamState& state, std::int64_t point_width) {
    if (state.dim_tag * point_width != static_cast<std::int64_t>(state.values.size()))
        throw DimensionError("dim_tag " + std::to_string(state.dim_tag) + " x width " +
                             std::to_string(point_width) + " != values length " +
                             std::to_string(state.values.size()));
    if (!all_finite(state.values))
        throw Error("state at step " + std::to_string(state.step) + " has non-finite values");
    if (state.moments) {
        const auto& m = *state.moments;
        if (m.m1.size() != state.values.size() || m.m2.size() != state.values.size())
            throw DimensionError("moment length differs from values length");
        for (double v : m.m2) {
            if (!(v >= 0.0)) throw Error("negative second moment");
        }
    }
}

void write_state(std::ostream& out, const ParamState& state) {
    out.write("PCST", 4);
    put_u32(out, kFormatVersion);
    put_u64(out, static_cast<std::uint64_t>(state.step));
    put_u64(out, static_cast<std::uint64_t>(state.dim_tag));
    put_u64(out, static_cast<std::uint64_t>(state.aux_version));
    put_u64(out, state.values.size());
    put_f64s(out, state.values);
    const char flag = state.moments ? 1 : 0;
    out.write(&flag, 1);
    if (state.moments) {
        put_u64(out, static_cast<std::uint64_t>(state.moments->t));
        put_f64s(out, state.moments->m1);
        put_f64s(out, state.moments->m2);
    }
}

ParamState read_state(std::istream& in) {
    expect_magic(in, "PCST");
    ParamState s;
    s.step = static_cast<std::int64_t>(get_u64(in));
    s.dim_tag = static_cast<std::int64_t>(get_u64(in));
    s.aux_version = static_cast<std::int64_t>(get_u64(in));
    const auto n = get_u64(in);
    s.values = get_f64s(in, n);
    char flag = 0;
    if (!in.read(&flag, 1)) throw Error("state file truncated");
    if (flag == 1) {
        MomentState m;
        m.t = static_cast<std::int64_t>(get_u64(in));
        m.m1 = get_f64s(in, n);
        m.m2 = get_f64s(in, n);
        s.moments = std::move(m);
    } else if (flag != 0) {
        throw Error("bad moment flag");
    }
    return s;
}

void write_states(std::ostream& out, std::span<const ParamState> states) {
    out.write("PCSL", 4);
    put_u32(out, kFormatVersion);
    put_u64(out, states.size());
    for (const auto& s : states) write_state(out, s);
}

std::vector<ParamState> read_states(std::istream& in) {
    expect_magic(in, "PCSL");
    const auto count = get_u64(in);
    std::vector<ParamState> states;
    states.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) states.push_back(read_state(in));
    return states;
}

void save_states(const std::filesystem::path& path, std::span<const ParamState> states) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_states(out, states);
}

std::vector<ParamState> load_states(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return read_states(in);
}

nlohmann::json state_to_json(const ParamState& state) {
    nlohmann::json j;
    j["step"] = state.step;
    j["dim_tag"] = state.dim_tag;
    j["aux_version"] = state.aux_version;
    j["values"] = state.values;
    if (state.moments) {
        j["moments"] = {{"m1", state.moments->m1}, {"m2", state.moments->m2}, {"t", state.moments->t}};
    } else {
        j["moments"] = nullptr;
    }
    return j;
}

ParamState state_from_json(const nlohmann::json& j) {
    ParamState s;
    s.step = j.at("step").get<std::int64_t>();
    s.dim_tag = j.at("dim_tag").get<std::int64_t>();
    s.aux_version = j.value("aux_version", std::int64_t{0});
    s.values = j.at("values").get<std::vector<double>>();
    if (j.contains("moments") && !j["moments"].is_null()) {
        const auto& m = j["moments"];
        s.moments = MomentState{m.at("m1").get<std::vector<double>>(),
                                m.at("m2").get<std::vector<double>>(), m.at("t").get<std::int64_t>()};
    }
    return s;
}

}  // namespace picard
