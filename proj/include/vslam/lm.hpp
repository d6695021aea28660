#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vslam/types.hpp"

namespace vslam {

struct LmSettings {
    int max_iters = 50;
    double initial_damping = 1e-4;
    double damping_up = 10.0;
    double damping_down = 0.1;
    double rel_cost_tol = 1e-10;
    double grad_tol = 1e-10;

    void validate() const {
        if (max_iters <= 0 || !(initial_damping > 0.0) || !(damping_up > 0.0) || !(damping_down > 0.0) ||
            !(rel_cost_tol > 0.0) || !(grad_tol > 0.0)) {
            throw Error("LM settings must all be positive");
        }
    }
};

enum class LmStatus { converged, max_iterations, stalled };

struct LmIteration {
    int iter = 0;
    double cost = 0.0;
    double damping = 0.0;
    double step_norm = 0.0;
};

struct LmSolution {
    std::vector<double> cost_trace;  // initial cost, then the cost after every accepted step
    std::vector<LmIteration> log;    // accepted steps only
    int iterations = 0;
    bool converged = false;
    LmStatus status = LmStatus::max_iterations;

    double initial_cost() const { return cost_trace.front(); }
    double final_cost() const { return cost_trace.back(); }
};

/// A nonlinear least-squares problem with cost 0.5 * sum(w * |r|^2).
///
/// linearize() caches the normal equations at the current state and returns
/// the max-abs gradient entry. solve_step(damping) solves (H + damping I) dx = -g
/// against that cache, or returns nullopt when the system cannot be solved.
template <class P>
concept LeastSquaresProblem = requires(P& p, const P& cp, const Eigen::VectorXd& dx, double damping,
                                       typename P::State s) {
    { cp.cost() } -> std::convertible_to<double>;
    { p.linearize() } -> std::convertible_to<double>;
    { p.solve_step(damping) } -> std::same_as<std::optional<Eigen::VectorXd>>;
    { cp.save() } -> std::same_as<typename P::State>;
    p.restore(s);
    p.retract(dx);
};

/// Levenberg-Marquardt with additive damping. Steps are accepted only if the
/// cost strictly decreases, so cost_trace is non-increasing.
template <LeastSquaresProblem P>
LmSolution solve_lm(P& problem, const LmSettings& settings) {
    settings.validate();
    constexpr int kMaxConsecutiveFailures = 10;
    // Steps this short only move the state by round-off.
    constexpr double kMinStepNorm = 1e-12;

    LmSolution sol;
    double cost = problem.cost();
    if (!std::isfinite(cost)) throw Error("non-finite initial cost");
    sol.cost_trace.push_back(cost);
    double damping = settings.initial_damping;

    for (int iter = 0; iter < settings.max_iters; ++iter) {
        sol.iterations = iter;
        if (cost == 0.0) {
            sol.converged = true;
            sol.status = LmStatus::converged;
            return sol;
        }
        const double grad = problem.linearize();
        if (grad <= settings.grad_tol) {
            sol.converged = true;
            sol.status = LmStatus::converged;
            return sol;
        }

        int failures = 0;
        bool solve_failed = false;
        double last_trial = cost;
        for (;;) {
            auto step = problem.solve_step(damping);
            if (!step || !step->allFinite()) {
                solve_failed = true;
            } else {
                solve_failed = false;
                if (step->norm() <= kMinStepNorm) {
                    sol.iterations = iter;
                    sol.converged = true;
                    sol.status = LmStatus::converged;
                    return sol;
                }
                auto saved = problem.save();
                problem.retract(*step);
                const double trial = problem.cost();
                last_trial = trial;
                if (std::isfinite(trial) && trial < cost) {
                    const double rel = (cost - trial) / cost;
                    cost = trial;
                    sol.cost_trace.push_back(cost);
                    sol.log.push_back({iter + 1, cost, damping, step->norm()});
                    damping = std::max(damping * settings.damping_down, 1e-15);
                    if (rel < settings.rel_cost_tol) {
                        sol.iterations = iter + 1;
                        sol.converged = true;
                        sol.status = LmStatus::converged;
                        return sol;
                    }
                    break;
                }
                problem.restore(std::move(saved));
            }
            damping *= settings.damping_up;
            if (++failures >= kMaxConsecutiveFailures) {
                sol.iterations = iter + 1;
                // Rejections that only differ from the current cost by round-off mean we sit at the minimum.
                if (!solve_failed && std::isfinite(last_trial) &&
                    std::abs(last_trial - cost) <= settings.rel_cost_tol * cost + 1e-30) {
                    sol.converged = true;
                    sol.status = LmStatus::converged;
                } else {
                    sol.status = LmStatus::stalled;
                }
                return sol;
            }
        }
    }
    sol.iterations = settings.max_iters;
    sol.status = LmStatus::max_iterations;
    return sol;
}

/// CSV with header "iter,cost,damping,step_norm".
void write_lm_trace_csv(std::ostream& out, const LmSolution& sol, bool header = true);

}  // namespace vslam
