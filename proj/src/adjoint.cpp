#include "ftop/adjoint.hpp"

#include <cmath>
#include <string>

#include "ftop/errors.hpp"

namespace ftop {

namespace {

void require_converged(const SolveReport& report, const char* where) {
    if (report.converged) return;
    const double last =
        report.residual_history.empty() ? std::nan("") : report.residual_history.back();
    throw SolverError(std::string(where) +
                      ": sensitivities need a converged state (iterations=" +
                      std::to_string(report.iterations) + ", residual=" + std::to_string(last) +
                      ")");
}

std::vector<double> reduce_to_free(const DofPartition& part, const std::vector<double>& full) {
    std::vector<double> r(std::size_t(part.n_free()), 0.0);
    if (full.empty()) return r;
    for (int i = 0; i < part.n_free(); ++i)
        r[std::size_t(i)] = full[std::size_t(part.free_to_full[std::size_t(i)])];
    return r;
}

std::vector<double> restrict_to_design(const Mesh& mesh, const std::vector<double>& full) {
    std::vector<double> out;
    for (int e = 0; e < mesh.n_elems(); ++e)
        if (mesh.design_mask[std::size_t(e)]) out.push_back(full[std::size_t(e)]);
    return out;
}

}  // namespace

std::vector<int> design_elements(const Mesh& mesh) {
    std::vector<int> ids;
    for (int e = 0; e < mesh.n_elems(); ++e)
        if (mesh.design_mask[std::size_t(e)]) ids.push_back(e);
    return ids;
}

SensitivityResult adjoint_gradient(const FunctionalEval& functional, const DesignSystem& system,
                                   const std::vector<double>& state, const SolveReport& report,
                                   const LinearSolverOptions& lin, const CsrMatrix* jacobian) {
    require_converged(report, "adjoint_gradient");

    std::vector<double> grad_full(std::size_t(system.mesh().n_elems()), 0.0);
    if (!functional.grad_gamma.empty()) grad_full = functional.grad_gamma;

    SensitivityResult result;
    result.value = functional.value;
    if (!functional.grad_state.empty()) {
        auto rhs = reduce_to_free(system.partition(), functional.grad_state);
        const CsrMatrix J = jacobian ? CsrMatrix(*jacobian) : system.jacobian(state);
        auto lambda = linear_solve(J.transposed(), rhs, lin);
        result.linear_solves = 1;
        auto vjp = system.design_vjp(state, lambda);
        for (std::size_t e = 0; e < grad_full.size(); ++e) grad_full[e] -= vjp[e];
    }
    result.grad_gamma = restrict_to_design(system.mesh(), grad_full);
    for (double g : result.grad_gamma)
        if (!std::isfinite(g)) throw SolverError("adjoint_gradient: non-finite sensitivity");
    return result;
}

SensitivityResult coupled_adjoint(
    const FunctionalEval& functional, const std::vector<double>& grad_state_up,
    const DesignSystem& upstream, const std::vector<double>& state_up,
    const SolveReport& report_up, const DesignSystem& downstream,
    const std::vector<double>& state_down, const SolveReport& report_down,
    const std::function<std::vector<double>(const std::vector<double>&)>& cross_vjp,
    const LinearSolverOptions& lin) {
    require_converged(report_up, "coupled_adjoint(upstream)");
    require_converged(report_down, "coupled_adjoint(downstream)");
    if (upstream.mesh().n_elems() != downstream.mesh().n_elems())
        throw ConfigError("coupled_adjoint: staggered systems share one mesh");

    std::vector<double> grad_full(std::size_t(upstream.mesh().n_elems()), 0.0);
    if (!functional.grad_gamma.empty()) grad_full = functional.grad_gamma;

    SensitivityResult result;
    result.value = functional.value;

    // Downstream adjoint first; its solution feeds the upstream right side.
    std::vector<double> lambda_down;
    if (!functional.grad_state.empty()) {
        auto rhs = reduce_to_free(downstream.partition(), functional.grad_state);
        lambda_down = linear_solve(downstream.jacobian(state_down).transposed(), rhs, lin);
        result.linear_solves += 1;
        auto vjp = downstream.design_vjp(state_down, lambda_down);
        for (std::size_t e = 0; e < grad_full.size(); ++e) grad_full[e] -= vjp[e];
    }

    std::vector<double> rhs_up_full(std::size_t(upstream.n_state()), 0.0);
    bool up_needed = !grad_state_up.empty();
    if (!grad_state_up.empty()) rhs_up_full = grad_state_up;
    if (!lambda_down.empty()) {
        auto cross = cross_vjp(lambda_down);
        for (std::size_t i = 0; i < rhs_up_full.size(); ++i) {
            rhs_up_full[i] -= cross[i];
            if (cross[i] != 0.0) up_needed = true;
        }
    }

    if (up_needed) {
        auto rhs = reduce_to_free(upstream.partition(), rhs_up_full);
        auto lambda_up = linear_solve(upstream.jacobian(state_up).transposed(), rhs, lin);
        result.linear_solves += 1;
        auto vjp = upstream.design_vjp(state_up, lambda_up);
        for (std::size_t e = 0; e < grad_full.size(); ++e) grad_full[e] -= vjp[e];
    }

    result.grad_gamma = restrict_to_design(upstream.mesh(), grad_full);
    for (double g : result.grad_gamma)
        if (!std::isfinite(g)) throw SolverError("coupled_adjoint: non-finite sensitivity");
    return result;
}

}  // namespace ftop
