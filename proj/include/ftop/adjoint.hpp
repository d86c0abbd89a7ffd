#pragma once

#include <functional>
#include <vector>

#include "ftop/objfn.hpp"
#include "ftop/solve.hpp"

namespace ftop {

// Total design derivative of one scalar functional. The gradient is restricted
// to design elements, in element order.
struct SensitivityResult {
    double value = 0.0;
    std::vector<double> grad_gamma;
    int linear_solves = 0;
};

// Element ids inside the design region, in element order.
std::vector<int> design_elements(const Mesh& mesh);

// Implicit-function-theorem gradient: one transposed linear solve per
// functional, then dc/dgamma = dc_partial/dgamma - lambda^T dR/dgamma.
// A state-independent functional (empty grad_state) skips the solve.
// Pass the Jacobian kept from the final Newton step to avoid re-assembly.
SensitivityResult adjoint_gradient(const FunctionalEval& functional, const DesignSystem& system,
                                   const std::vector<double>& state, const SolveReport& report,
                                   const LinearSolverOptions& lin = {},
                                   const CsrMatrix* jacobian = nullptr);

// Two-block staggered chain (upstream feeds downstream). cross_vjp maps the
// downstream adjoint (free rows) to (dR_down/du_up)^T lambda over full
// upstream DOFs; grad_state_up holds any direct dependence of the functional
// on the upstream state (full length, may be empty).
SensitivityResult coupled_adjoint(const FunctionalEval& functional,
                                  const std::vector<double>& grad_state_up,
                                  const DesignSystem& upstream,
                                  const std::vector<double>& state_up,
                                  const SolveReport& report_up, const DesignSystem& downstream,
                                  const std::vector<double>& state_down,
                                  const SolveReport& report_down,
                                  const std::function<std::vector<double>(
                                      const std::vector<double>&)>& cross_vjp,
                                  const LinearSolverOptions& lin = {});

}  // namespace ftop
