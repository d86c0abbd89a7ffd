#pragma once

#include <vector>

namespace ftop {

// Method of Moving Asymptotes outer-loop state. Variables live in the fixed
// box [0, 1]; the asymptotes strictly bracket every iterate.
struct MmaState {
    std::vector<double> x, x_prev, x_prev2;
    std::vector<double> low, upp;  // moving asymptotes
    double move_limit = 0.2;
    int outer_iter = 0;
    // True when the last subproblem leaned on its elastic slack variables,
    // i.e. the constraints could not be met inside the trust region.
    bool feasibility_restored = false;
};

MmaState mma_init(std::vector<double> x0);

// Separable rational approximation around state.x. Exposed so the
// first-order consistency of the subproblem model can be verified directly:
// the model value and slope at the expansion point equal the true ones.
//   objective model: r0 + sum_j p0_j/(upp_j - x_j) + q0_j/(x_j - low_j)
//   constraint i:    sum_j pc_ij/(upp_j - x_j) + qc_ij/(x_j - low_j) - b_i
struct MmaApprox {
    std::vector<double> low, upp;    // asymptotes in force
    std::vector<double> alfa, beta;  // subproblem bounds (move limit applied)
    std::vector<double> p0, q0;
    double r0 = 0.0;
    std::vector<std::vector<double>> pc, qc;
    std::vector<double> b;
};

MmaApprox mma_build_approximation(const MmaState& state, double obj_value,
                                  const std::vector<double>& obj_grad,
                                  const std::vector<double>& cons_values,
                                  const std::vector<std::vector<double>>& cons_grads);

// One outer iteration: adapt asymptotes, build the convex subproblem, solve
// its dual by per-multiplier bisection, shift the iterate history. Returns
// the new point (also stored in state.x). Constraints enter as g_i <= 0.
std::vector<double> mma_step(MmaState& state, double obj_value,
                             const std::vector<double>& obj_grad,
                             const std::vector<double>& cons_values,
                             const std::vector<std::vector<double>>& cons_grads);

// First-order stochastic optimizer for the network-parameterized mode.
struct AdamState {
    std::vector<double> m, v;  // moment accumulators, sized on first use
    int step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool last_step_rejected = false;
};

// Bias-corrected Adam update. A non-finite gradient rejects the step: the
// parameters and moments stay untouched and the rejection is flagged.
std::vector<double> adam_step(AdamState& state, const std::vector<double>& params,
                              const std::vector<double>& grad);

}  // namespace ftop
