// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include "picard/problems.hpp"

#include <cmath>

#include "picard/errors.hpp"
#include "picard/rng.hpp"

namespace picard {

namespace {

// Distinct RNG streams so the dataset, the initial state and the per-step
// randomness never share draws.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kStepStream = 3;
constexpr std::uint64_t kNoiseStream = 4;
constexpr std::uint64_t kTargetStream = 5;

std::vector<double> noise_direction(std::size_t n, std::uint64_t seed) {
    Rng rng(seed, kNoiseStream);
    std::vector<double> xi(n);
    for (auto& v : xi) v = rng.normal();
    return xi;
}

}  // namespace

std::string to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::quadratic: return "quadratic";
        case ProblemKind::rosenbrock: return "rosenbrock";
        case ProblemKind::stochastic_lsq: return "stochastic_lsq";
        case ProblemKind::tiny_mlp: return "tiny_mlp";
        case ProblemKind::splat2d: return "splat2d";
        case ProblemKind::linear_ode: return "linear_ode";
    }
    return "unknown";
}

ProblemKind parse_problem_kind(std::string_view name) {
    for (auto k : {ProblemKind::quadratic, ProblemKind::rosenbrock, ProblemKind::stochastic_lsq,
                   ProblemKind::tiny_mlp, ProblemKind::splat2d, ProblemKind::linear_ode}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("problem.kind", "unknown problem '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Problem

void Problem::check_dimension(std::span<const double> values) const {
    if (static_cast<std::int64_t>(values.size()) != dim())
        throw DimensionError(to_string(kind()) + ": expected " + std::to_string(dim()) +
                             " values, got " + std::to_string(values.size()));
}

double Problem::loss(std::span<const double> values, std::uint64_t seed) const {
    check_dimension(values);
    double l = base_loss(values, seed);
    if (spec_.noise != 0.0) {
        const auto xi = noise_direction(values.size(), seed);
        double dot = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) dot += xi[i] * values[i];
        l += spec_.noise * dot;
    }
    return l;
}

std::vector<double> Problem::grad(std::span<const double> values, std::uint64_t seed) const {
    check_dimension(values);
    std::vector<double> g(values.size(), 0.0);
    base_grad(values, seed, g);
    if (spec_.noise != 0.0) {
        const auto xi = noise_direction(values.size(), seed);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += spec_.noise * xi[i];
    }
    return g;
}

std::vector<double> Problem::ode_rhs(std::span<const double> values, double /*time*/,
                                     std::uint64_t seed) const {
    auto g = grad(values, seed);
    for (auto& v : g) v = -v;
    return g;
}

std::unique_ptr<Problem> make_problem(const ProblemSpec& spec) {
    switch (spec.kind) {
        case ProblemKind::quadratic: return std::make_unique<QuadraticProblem>(spec);
        case ProblemKind::rosenbrock: return std::make_unique<RosenbrockProblem>(spec);
        case ProblemKind::stochastic_lsq: return std::make_unique<StochasticLsqProblem>(spec);
        case ProblemKind::tiny_mlp: return std::make_unique<TinyMlpProblem>(spec);
        case ProblemKind::splat2d: return std::make_unique<Splat2dProblem>(spec);
        case ProblemKind::linear_ode: return std::make_unique<LinearOdeProblem>(spec);
    }
    throw ConfigError("problem.kind", "unhandled problem kind");
}

// ---------------------------------------------------------------------------
// quadratic

QuadraticProblem::QuadraticProblem(const ProblemSpec& spec) : Problem(spec) {
    if (spec.dim < 1) throw ConfigError("problem.dim", "must be >= 1");
    if (!(spec.condition >= 1.0)) throw ConfigError("problem.condition", "must be >= 1");
    curvature_.resize(static_cast<std::size_t>(spec.dim));
    for (std::int64_t i = 0; i < spec.dim; ++i) {
        const double frac = spec.dim > 1 ? static_cast<double>(i) / static_cast<double>(spec.dim - 1) : 0.0;
        curvature_[static_cast<std::size_t>(i)] = spec.condition == 1.0 ? 1.0 : std::pow(spec.condition, -frac);
    }
}

ParamState QuadraticProblem::initial_state() const {
    Rng rng(spec_.data_seed, kInitStream);
    std::vector<double> v(static_cast<std::size_t>(spec_.dim));
    for (auto& x : v) x = rng.normal();
    return make_state(0, std::move(v));
}

double QuadraticProblem::base_loss(std::span<const double> values, std::uint64_t) const {
    double l = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) l += curvature_[i] * values[i] * values[i];
    return 0.5 * l;
}

void QuadraticProblem::base_grad(std::span<const double> values, std::uint64_t,
                                 std::span<double> out) const {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = curvature_[i] * values[i];
}

// ---------------------------------------------------------------------------
// rosenbrock

RosenbrockProblem::RosenbrockProblem(const ProblemSpec& spec) : Problem(spec) {
    if (spec.dim < 2) throw ConfigError("problem.dim", "rosenbrock needs dim >= 2");
}

ParamState RosenbrockProblem::initial_state() const {
    Rng rng(spec_.data_seed, kInitStream);
    std::vector<double> v(static_cast<std::size_t>(spec_.dim));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (i % 2 == 0 ? -1.2 : 1.0) + 0.05 * rng.normal();
    return make_state(0, std::move(v));
}

double RosenbrockProblem::base_loss(std::span<const double> x, std::uint64_t) const {
    double l = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double a = 1.0 - x[i];
        const double b = x[i + 1] - x[i] * x[i];
        l += a * a + 100.0 * b * b;
    }
    return l;
}

void RosenbrockProblem::base_grad(std::span<const double> x, std::uint64_t,
                                  std::span<double> out) const {
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double a = 1.0 - x[i];
        const double b = x[i + 1] - x[i] * x[i];
        out[i] += -2.0 * a - 400.0 * b * x[i];
        out[i + 1] += 200.0 * b;
    }
}

// ---------------------------------------------------------------------------
// stochastic least squares

StochasticLsqProblem::StochasticLsqProblem(const ProblemSpec& spec) : Problem(spec) {
    if (spec.dim < 1) throw ConfigError("problem.dim", "must be >= 1");
    if (spec.rows < 1) throw ConfigError("problem.rows", "must be >= 1");
    if (spec.batch < 1 || spec.batch > spec.rows)
        throw ConfigError("problem.batch", "must be in [1, rows]");
    Rng rng(spec.data_seed, kDataStream);
    const auto rows = static_cast<std::size_t>(spec.rows);
    const auto d = static_cast<std::size_t>(spec.dim);
    std::vector<double> truth(d);
    for (auto& w : truth) w = rng.normal();
    design_.resize(rows * d);
    for (auto& x : design_) x = rng.normal();
    target_.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double y = 0.0;
        for (std::size_t j = 0; j < d; ++j) y += design_[r * d + j] * truth[j];
        target_[r] = y + 0.05 * rng.normal();
    }
}

ParamState StochasticLsqProblem::initial_state() const {
    Rng rng(spec_.data_seed, kInitStream);
    std::vector<double> v(static_cast<std::size_t>(spec_.dim));
    for (auto& x : v) x = 0.1 * rng.normal();
    return make_state(0, std::move(v));
}

std::vector<std::int64_t> StochasticLsqProblem::batch_rows(std::uint64_t seed) const {
    Rng rng(seed, kStepStream);
    std::vector<std::int64_t> rows(static_cast<std::size_t>(spec_.batch));
    for (auto& r : rows) r = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(spec_.rows)));
    return rows;
}

double StochasticLsqProblem::base_loss(std::span<const double> x, std::uint64_t seed) const {
    const auto d = x.size();
    double l = 0.0;
    for (auto r : batch_rows(seed)) {
        const double* row = design_.data() + static_cast<std::size_t>(r) * d;
        double pred = 0.0;
        for (std::size_t j = 0; j < d; ++j) pred += row[j] * x[j];
        const double res = pred - target_[static_cast<std::size_t>(r)];
        l += res * res;
    }
    return l / (2.0 * static_cast<double>(spec_.batch));
}

void StochasticLsqProblem::base_grad(std::span<const double> x, std::uint64_t seed,
                                     std::span<double> out) const {
    const auto d = x.size();
    const double scale = 1.0 / static_cast<double>(spec_.batch);
    for (auto r : batch_rows(seed)) {
        const double* row = design_.data() + static_cast<std::size_t>(r) * d;
        double pred = 0.0;
        for (std::size_t j = 0; j < d; ++j) pred += row[j] * x[j];
        const double res = (pred - target_[static_cast<std::size_t>(r)]) * scale;
        for (std::size_t j = 0; j < d; ++j) out[j] += res * row[j];
    }
}

// ---------------------------------------------------------------------------
// tiny mlp
//
// Layout: W1 [kHidden x kInputs] row-major, b1 [kHidden], W2 [kHidden], b2.

TinyMlpProblem::TinyMlpProblem(const ProblemSpec& spec) : Problem(spec) {
    if (spec.samples < 1) throw ConfigError("problem.samples", "must be >= 1");
    Rng rng(spec.data_seed, kDataStream);
    const auto n = static_cast<std::size_t>(spec.samples);
    inputs_.resize(n * kInputs);
    labels_.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double x0 = rng.uniform(-1.0, 1.0);
        const double x1 = rng.uniform(-1.0, 1.0);
        inputs_[s * kInputs] = x0;
        inputs_[s * kInputs + 1] = x1;
        labels_[s] = std::sin(2.0 * x0) + 0.5 * std::cos(3.0 * x1);
    }
}

ParamState TinyMlpProblem::initial_state() const {
    Rng rng(spec_.data_seed, kInitStream);
    std::vector<double> v(static_cast<std::size_t>(dim()), 0.0);
    std::size_t k = 0;
    for (std::int64_t i = 0; i < kHidden * kInputs; ++i) v[k++] = 0.8 * rng.normal();
    for (std::int64_t i = 0; i < kHidden; ++i) v[k++] = 0.1 * rng.normal();
    for (std::int64_t i = 0; i < kHidden; ++i) v[k++] = 0.5 * rng.normal();
    v[k] = 0.0;
    return make_state(0, std::move(v));
}

double TinyMlpProblem::base_loss(std::span<const double> p, std::uint64_t) const {
    const double* w1 = p.data();
    const double* b1 = w1 + kHidden * kInputs;
    const double* w2 = b1 + kHidden;
    const double b2 = w2[kHidden];
    double l = 0.0;
    for (std::size_t s = 0; s < labels_.size(); ++s) {
        const double* x = inputs_.data() + s * kInputs;
        double f = b2;
        for (std::int64_t h = 0; h < kHidden; ++h) {
            double z = b1[h];
            for (std::int64_t i = 0; i < kInputs; ++i) z += w1[h * kInputs + i] * x[i];
            f += w2[h] * std::tanh(z);
        }
        const double e = f - labels_[s];
        l += e * e;
    }
    return l / (2.0 * static_cast<double>(labels_.size()));
}

void TinyMlpProblem::base_grad(std::span<const double> p, std::uint64_t,
                               std::span<double> out) const {
    const double* w1 = p.data();
    const double* b1 = w1 + kHidden * kInputs;
    const double* w2 = b1 + kHidden;
    const double b2 = w2[kHidden];
    double* gw1 = out.data();
    double* gb1 = gw1 + kHidden * kInputs;
    double* gw2 = gb1 + kHidden;
    double* gb2 = gw2 + kHidden;
    const double inv_n = 1.0 / static_cast<double>(labels_.size());
    std::array<double, kHidden> act{};
    for (std::size_t s = 0; s < labels_.size(); ++s) {
        const double* x = inputs_.data() + s * kInputs;
        double f = b2;
        for (std::int64_t h = 0; h < kHidden; ++h) {
            double z = b1[h];
            for (std::int64_t i = 0; i < kInputs; ++i) z += w1[h * kInputs + i] * x[i];
            act[h] = std::tanh(z);
            f += w2[h] * act[h];
        }
        const double e = (f - labels_[s]) * inv_n;
        *gb2 += e;
        for (std::int64_t h = 0; h < kHidden; ++h) {
            gw2[h] += e * act[h];
            const double dz = e * w2[h] * (1.0 - act[h] * act[h]);
            gb1[h] += dz;
            for (std::int64_t i = 0; i < kInputs; ++i) gw1[h * kInputs + i] += dz * x[i];
        }
    }
}

// ---------------------------------------------------------------------------
// splat2d

namespace {

std::vector<double> mixture_on_grid(std::span<const double> values) {
    constexpr auto g = Splat2dProblem::kGrid;
    constexpr auto w = Splat2dProblem::kWidth;
    std::vector<double> m(static_cast<std::size_t>(g * g), 0.0);
    const auto points = values.size() / w;
    for (std::size_t k = 0; k < points; ++k) {
        const double px = values[k * w];
        const double py = values[k * w + 1];
        const double s = std::exp(values[k * w + 2]);
        const double weight = values[k * w + 3];
        const double inv2s2 = 1.0 / (2.0 * s * s);
        for (std::int64_t iy = 0; iy < g; ++iy) {
            const double dy = Splat2dProblem::cell_center(iy) - py;
            for (std::int64_t ix = 0; ix < g; ++ix) {
                const double dx = Splat2dProblem::cell_center(ix) - px;
                m[static_cast<std::size_t>(iy * g + ix)] += weight * std::exp(-(dx * dx + dy * dy) * inv2s2);
            }
        }
    }
    return m;
}

double grid_normalization(std::span<const double> m) {
    double z = 0.0;
    for (double v : m) z += v;
    return z * Splat2dProblem::cell_area();
}

}  // namespace

Splat2dProblem::Splat2dProblem(const ProblemSpec& spec) : Problem(spec) {
    if (spec.points < 1) throw ConfigError("problem.points", "must be >= 1");
    if (spec.target_points < 1) throw ConfigError("problem.target_points", "must be >= 1");
    Rng rng(spec.data_seed, kTargetStream);
    std::vector<SplatPoint> target(static_cast<std::size_t>(spec.target_points));
    for (auto& p : target) {
        p.x = rng.uniform(0.25, 0.75);
        p.y = rng.uniform(0.25, 0.75);
        p.log_scale = std::log(rng.uniform(0.08, 0.15));
        p.weight = rng.uniform(0.5, 1.5);
    }
    build_target(target);
}

Splat2dProblem::Splat2dProblem(const ProblemSpec& spec, std::vector<SplatPoint> target) : Problem(spec) {
    if (spec.points < 1) throw ConfigError("problem.points", "must be >= 1");
    if (target.empty()) throw ConfigError("problem.target_points", "must be >= 1");
    build_target(target);
}

void Splat2dProblem::build_target(std::span<const SplatPoint> points) {
    std::vector<double> packed;
    packed.reserve(points.size() * kWidth);
    for (const auto& p : points) packed.insert(packed.end(), {p.x, p.y, p.log_scale, p.weight});
    auto m = mixture_on_grid(packed);
    const double z = grid_normalization(m);
    if (!(z > 0.0)) throw ObjectiveError("target mixture normalization is not positive");
    for (auto& v : m) v /= z;
    target_ = std::move(m);
}

ParamState Splat2dProblem::initial_state() const {
    Rng rng(spec_.data_seed, kInitStream);
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(dim()));
    for (std::int64_t k = 0; k < spec_.points; ++k) {
        const double x = rng.uniform(0.2, 0.8);
        const double y = rng.uniform(0.2, 0.8);
        v.insert(v.end(), {x, y, std::log(0.2), 1.0});
    }
    return make_state(0, std::move(v), kWidth);
}

void Splat2dProblem::check_dimension(std::span<const double> values) const {
    if (values.empty() || values.size() % kWidth != 0)
        throw DimensionError("splat2d: values length " + std::to_string(values.size()) +
                             " is not a positive multiple of 4");
}

SplatRender Splat2dProblem::render(std::span<const double> values) const {
    check_dimension(values);
    SplatRender r;
    r.mixture = mixture_on_grid(values);
    r.normalization = grid_normalization(r.mixture);
    if (!(r.normalization > 0.0) || !std::isfinite(r.normalization))
        throw ObjectiveError("splat2d: mixture normalization " + std::to_string(r.normalization) +
                             " is not positive");
    r.residual.resize(r.mixture.size());
    for (std::size_t c = 0; c < r.mixture.size(); ++c) {
        r.residual[c] = r.mixture[c] / r.normalization - target_[c];
        r.loss += r.residual[c] * r.residual[c];
    }
    return r;
}

double Splat2dProblem::base_loss(std::span<const double> values, std::uint64_t) const {
    return render(values).loss;
}

void Splat2dProblem::base_grad(std::span<const double> values, std::uint64_t,
                               std::span<double> out) const {
    const auto r = render(values);
    const double z = r.normalization;
    // dL/dm_c = 2 r_c / Z - 2 A (sum_c r_c m_c) / Z^2
    double rm = 0.0;
    for (std::size_t c = 0; c < r.mixture.size(); ++c) rm += r.residual[c] * r.mixture[c];
    const double shared = 2.0 * cell_area() * rm / (z * z);
    std::vector<double> dm(r.mixture.size());
    for (std::size_t c = 0; c < dm.size(); ++c) dm[c] = 2.0 * r.residual[c] / z - shared;

    const auto points = values.size() / kWidth;
    for (std::size_t k = 0; k < points; ++k) {
        const double px = values[k * kWidth];
        const double py = values[k * kWidth + 1];
        const double s = std::exp(values[k * kWidth + 2]);
        const double weight = values[k * kWidth + 3];
        const double inv_s2 = 1.0 / (s * s);
        double gx = 0.0, gy = 0.0, gs = 0.0, gw = 0.0;
        for (std::int64_t iy = 0; iy < kGrid; ++iy) {
            const double dy = cell_center(iy) - py;
            for (std::int64_t ix = 0; ix < kGrid; ++ix) {
                const double dx = cell_center(ix) - px;
                const double d2 = dx * dx + dy * dy;
                const double phi = std::exp(-0.5 * d2 * inv_s2);
                const double g = dm[static_cast<std::size_t>(iy * kGrid + ix)];
                gw += g * phi;
                const double wp = g * weight * phi;
                gx += wp * dx * inv_s2;
                gy += wp * dy * inv_s2;
                gs += wp * d2 * inv_s2;
            }
        }
        out[k * kWidth] += gx;
        out[k * kWidth + 1] += gy;
        out[k * kWidth + 2] += gs;
        out[k * kWidth + 3] += gw;
    }
}

SplatRender splat2d_render(const Splat2dProblem& problem, std::span<const double> values,
                           std::int64_t dim_tag) {
    if (dim_tag * Splat2dProblem::kWidth != static_cast<std::int64_t>(values.size()))
        throw DimensionError("splat2d: dim_tag " + std::to_string(dim_tag) +
                             " does not match values length " + std::to_string(values.size()));
    return problem.render(values);
}

// ---------------------------------------------------------------------------
// linear ode

LinearOdeProblem::LinearOdeProblem(const ProblemSpec& spec) : Problem(spec) {
    if (spec.dim < 1) throw ConfigError("problem.dim", "must be >= 1");
}

ParamState LinearOdeProblem::initial_state() const {
    Rng rng(spec_.data_seed, kInitStream);
    std::vector<double> v(static_cast<std::size_t>(spec_.dim));
    for (auto& x : v) x = rng.normal();
    return make_state(0, std::move(v));
}

std::vector<double> LinearOdeProblem::ode_rhs(std::span<const double> x, double,
                                              std::uint64_t) const {
    check_dimension(x);
    const double a = spec_.decay;
    const double b = spec_.rotation;
    std::vector<double> f(x.size());
    std::size_t i = 0;
    for (; i + 1 < x.size(); i += 2) {
        f[i] = -a * x[i] + b * x[i + 1];
        f[i + 1] = -b * x[i] - a * x[i + 1];
    }
    if (i < x.size()) f[i] = -a * x[i];
    return f;
}

std::vector<double> LinearOdeProblem::analytic(std::span<const double> x0, double t) const {
    const double damp = std::exp(-spec_.decay * t);
    const double c = std::cos(spec_.rotation * t);
    const double s = std::sin(spec_.rotation * t);
    std::vector<double> x(x0.size());
    std::size_t i = 0;
    for (; i + 1 < x0.size(); i += 2) {
        x[i] = damp * (c * x0[i] + s * x0[i + 1]);
        x[i + 1] = damp * (-s * x0[i] + c * x0[i + 1]);
    }
    if (i < x0.size()) x[i] = damp * x0[i];
    return x;
}

double LinearOdeProblem::base_loss(std::span<const double> x, std::uint64_t) const {
    double l = 0.0;
    for (double v : x) l += v * v;
    return 0.5 * l;
}

void LinearOdeProblem::base_grad(std::span<const double> x, std::uint64_t,
                                 std::span<double> out) const {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
}

}  // namespace picard
