// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "picard/state.hpp"

namespace picard {

enum class ProblemKind { quadratic, rosenbrock, stochastic_lsq, tiny_mlp, splat2d, linear_ode };

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(std::string_view name);

struct ProblemSpec {
    ProblemKind kind = ProblemKind::quadratic;
    std::int64_t dim = 16;          // quadratic, rosenbrock, stochastic_lsq, linear_ode
    std::uint64_t data_seed = 0;
    double noise = 0.0;             // scale of the seeded linear perturbation of the loss
    double condition = 100.0;       // quadratic: curvatures log-spaced in [1/condition, 1]
    std::int64_t rows = 128;        // stochastic_lsq design rows
    std::int64_t batch = 16;        // stochastic_lsq rows drawn per step seed
    std::int64_t samples = 64;      // tiny_mlp dataset size
    std::int64_t points = 4;        // splat2d initial points
    std::int64_t target_points = 3; // splat2d target mixture size
    double decay = 1.0;             // linear_ode
    double rotation = 0.0;          // linear_ode
};

/// Seeded loss/gradient oracle. Immutable after construction and safe to call
/// from several threads. Every reduction runs in a fixed left-to-right order.
class Problem {
public:
    explicit Problem(ProblemSpec spec) : spec_(spec) {}
    virtual ~Problem() = default;
    Problem(const Problem&) = delete;
    Problem& operator=(const Problem&) = delete;

    const ProblemSpec& spec() const { return spec_; }
    ProblemKind kind() const { return spec_.kind; }
    /// Width of one "point"; values.size() is always a multiple of it.
    virtual std::int64_t point_width() const { return 1; }
    /// Dimension of the initial state.
    virtual std::int64_t dim() const = 0;
    virtual ParamState initial_state() const = 0;

    /// Loss with all randomness drawn from `seed`.
    double loss(std::span<const double> values, std::uint64_t seed) const;
    std::vector<double> grad(std::span<const double> values, std::uint64_t seed) const;
    /// ODE right-hand side f(x, u). Gradient flow -grad L unless overridden.
    virtual std::vector<double> ode_rhs(std::span<const double> values, double time,
                                        std::uint64_t seed) const;

protected:
    virtual void check_dimension(std::span<const double> values) const;
    virtual double base_loss(std::span<const double> values, std::uint64_t seed) const = 0;
    virtual void base_grad(std::span<const double> values, std::uint64_t seed,
                           std::span<double> out) const = 0;

    ProblemSpec spec_;
};

std::unique_ptr<Problem> make_problem(const ProblemSpec& spec);

/// 0.5 * sum_i a_i x_i^2.
class QuadraticProblem final : public Problem {
public:
    explicit QuadraticProblem(const ProblemSpec& spec);
    std::int64_t dim() const override { return spec_.dim; }
    ParamState initial_state() const override;
    std::span<const double> curvatures() const { return curvature_; }

protected:
    double base_loss(std::span<const double> values, std::uint64_t seed) const override;
    void base_grad(std::span<const double> values, std::uint64_t seed,
                   std::span<double> out) const override;

private:
    std::vector<double> curvature_;
};

/// Chained Rosenbrock: sum_i (1 - x_i)^2 + 100 (x_{i+1} - x_i^2)^2.
class RosenbrockProblem final : public Problem {
public:
    explicit RosenbrockProblem(const ProblemSpec& spec);
    std::int64_t dim() const override { return spec_.dim; }
    ParamState initial_state() const override;

protected:
    double base_loss(std::span<const double> values, std::uint64_t seed) const override;
    void base_grad(std::span<const double> values, std::uint64_t seed,
                   std::span<double> out) const override;
};

/// Least squares on a random mini-batch of rows chosen by the step seed.
class StochasticLsqProblem final : public Problem {
public:
    explicit StochasticLsqProblem(const ProblemSpec& spec);
    std::int64_t dim() const override { return spec_.dim; }
    ParamState initial_state() const override;
    std::vector<std::int64_t> batch_rows(std::uint64_t seed) const;

protected:
    double base_loss(std::span<const double> values, std::uint64_t seed) const override;
    void base_grad(std::span<const double> values, std::uint64_t seed,
                   std::span<double> out) const override;

private:
    std::vector<double> design_;  // rows x dim, row-major
    std::vector<double> target_;
};

/// 2 -> 8 (tanh) -> 1 regression network on a fixed dataset.
class TinyMlpProblem final : public Problem {
public:
    static constexpr std::int64_t kInputs = 2;
    static constexpr std::int64_t kHidden = 8;

    explicit TinyMlpProblem(const ProblemSpec& spec);
    std::int64_t dim() const override { return kHidden * kInputs + kHidden + kHidden + 1; }
    ParamState initial_state() const override;

protected:
    double base_loss(std::span<const double> values, std::uint64_t seed) const override;
    void base_grad(std::span<const double> values, std::uint64_t seed,
                   std::span<double> out) const override;

private:
    std::vector<double> inputs_;  // samples x kInputs
    std::vector<double> labels_;
};

/// Point of a 2D isotropic Gaussian mixture: (x, y, log_scale, weight).
struct SplatPoint {
    double x = 0.0;
    double y = 0.0;
    double log_scale = 0.0;
    double weight = 1.0;
};

/// Normalized mixture evaluated on the fixed grid.
struct SplatRender {
    std::vector<double> mixture;  // unnormalized, grid_size^2 cells, row-major (y, x)
    double normalization = 0.0;   // cell_area * sum(mixture)
    std::vector<double> residual; // mixture / normalization - target
    double loss = 0.0;            // sum of squared residuals
};

/// Fits a mixture of variable point count to a fixed target density on a
/// 16x16 grid over the unit square. Each point owns 4 consecutive values.
class Splat2dProblem final : public Problem {
public:
    static constexpr std::int64_t kGrid = 16;
    static constexpr std::int64_t kWidth = 4;

    explicit Splat2dProblem(const ProblemSpec& spec);
    Splat2dProblem(const ProblemSpec& spec, std::vector<SplatPoint> target);

    std::int64_t point_width() const override { return kWidth; }
    std::int64_t dim() const override { return spec_.points * kWidth; }
    ParamState initial_state() const override;

    /// Throws ObjectiveError when the mixture normalization is not positive.
    SplatRender render(std::span<const double> values) const;
    std::span<const double> target_density() const { return target_; }

    static double cell_center(std::int64_t i) { return (static_cast<double>(i) + 0.5) / kGrid; }
    static constexpr double cell_area() { return 1.0 / (kGrid * kGrid); }

protected:
    void check_dimension(std::span<const double> values) const override;
    double base_loss(std::span<const double> values, std::uint64_t seed) const override;
    void base_grad(std::span<const double> values, std::uint64_t seed,
                   std::span<double> out) const override;

private:
    void build_target(std::span<const SplatPoint> points);
    std::vector<double> target_;
};

SplatRender splat2d_render(const Splat2dProblem& problem, std::span<const double> values,
                           std::int64_t dim_tag);

/// dx/du = A x with A block-diagonal 2x2 [[-decay, rotation], [-rotation, -decay]]
/// (a trailing odd coordinate gets -decay). Loss is 0.5 |x|^2.
class LinearOdeProblem final : public Problem {
public:
    explicit LinearOdeProblem(const ProblemSpec& spec);
    std::int64_t dim() const override { return spec_.dim; }
    ParamState initial_state() const override;
    std::vector<double> ode_rhs(std::span<const double> values, double time,
                                std::uint64_t seed) const override;
    /// Exact flow x(t) = exp(A t) x0.
    std::vector<double> analytic(std::span<const double> x0, double t) const;

protected:
    double base_loss(std::span<const double> values, std::uint64_t seed) const override;
    void base_grad(std::span<const double> values, std::uint64_t seed,
                   std::span<double> out) const override;
};

}  // namespace picard
