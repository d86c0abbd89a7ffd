#pragma once

#include <utility>
#include <vector>

#include "ftop/csr.hpp"
#include "ftop/geometry.hpp"

namespace ftop {

// Fixed/free split of a full DOF vector. Fixed DOFs carry prescribed values
// and are condensed out of assembled systems.
struct DofPartition {
    std::vector<int> full_to_free;  // -1 where fixed
    std::vector<int> free_to_full;
    std::vector<double> fixed_values;  // full length; prescribed value where fixed

    static DofPartition build(int n_full, const std::vector<std::pair<int, double>>& fixed);
    int n_free() const { return int(free_to_full.size()); }
    int n_full() const { return int(full_to_free.size()); }
    bool is_fixed(int full_dof) const { return full_to_free[full_dof] < 0; }

    // Overwrites fixed entries of a full state with their prescribed values.
    void impose(std::vector<double>& full_state) const;
};

struct LinearSolverOptions {
    enum class Method { direct, bicgstab } method = Method::direct;
    double tol = 1e-10;
    int max_iter = 2000;
};

// Direct path: sparse LU, residual verified to 1e-10 relative. Iterative
// path: BiCGStab with an ILU(0) preconditioner.
std::vector<double> linear_solve(const CsrMatrix& A, const std::vector<double>& b,
                                 const LinearSolverOptions& opts = {});

// Nonlinear residual over a full state vector; residual and Jacobian are
// reduced to free DOFs.
class ResidualSystem {
  public:
    virtual ~ResidualSystem() = default;
    virtual int n_state() const = 0;
    virtual const DofPartition& partition() const = 0;
    virtual std::vector<double> residual(const std::vector<double>& state) const = 0;
    virtual CsrMatrix jacobian(const std::vector<double>& state) const = 0;
};

// Residual system whose assembly depends on a per-element design field; the
// directional derivatives in the design are what the sensitivity layer needs.
class DesignSystem : public ResidualSystem {
  public:
    // (dR/dgamma) dir, over free residual rows.
    virtual std::vector<double> design_jvp(const std::vector<double>& state,
                                           const std::vector<double>& dir) const = 0;
    // lambda^T dR/dgamma, per element.
    virtual std::vector<double> design_vjp(const std::vector<double>& state,
                                           const std::vector<double>& lambda) const = 0;
    virtual const Mesh& mesh() const = 0;
};

struct NewtonConfig {
    double tol_abs = 1e-8;
    double tol_rel = 1e-10;
    int max_iter = 25;
    double damping = 1.0;  // initial step scale
};

struct SolveReport {
    int iterations = 0;
    std::vector<double> residual_history;  // length iterations + 1
    bool converged = false;
    int linear_solves = 0;
};

std::pair<std::vector<double>, SolveReport> newton_solve(const ResidualSystem& system,
                                                         std::vector<double> initial_state,
                                                         const NewtonConfig& config = {},
                                                         const LinearSolverOptions& lin = {});

double l2_norm(const std::vector<double>& v);

}  // namespace ftop
