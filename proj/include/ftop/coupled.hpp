#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ftop/adjoint.hpp"
#include "ftop/flow.hpp"
#include "ftop/geometry.hpp"
#include "ftop/materials.hpp"
#include "ftop/solve.hpp"

namespace ftop {

struct ThermalOptions {
    bool parallel = true;
    std::function<double(Vec2)> source;  // manufactured-solution hook
};

// Steady energy transport u . grad(T) = div(k(gamma) grad(T)) with the
// design-dependent inverse-Peclet diffusivity. One temperature DOF per node;
// advection uses the supplied flow state verbatim (one-way coupling).
class ThermalSystem : public DesignSystem {
  public:
    ThermalSystem(const Mesh& mesh, const BCTable& table, InterpolationLaws laws,
                  ThermalOptions options = {});

    int n_state() const override { return mesh_->n_nodes(); }
    const DofPartition& partition() const override { return part_; }
    std::vector<double> residual(const std::vector<double>& state) const override;
    CsrMatrix jacobian(const std::vector<double>& state) const override;

    std::vector<double> design_jvp(const std::vector<double>& state,
                                   const std::vector<double>& dir) const override;
    std::vector<double> design_vjp(const std::vector<double>& state,
                                   const std::vector<double>& lambda) const override;
    const Mesh& mesh() const override { return *mesh_; }

    // Advecting velocity, shared layout with FlowSystem states.
    void set_velocity(std::vector<double> flow_state);
    // (dR_T/du_flow)^T lambda over full flow DOFs: the staggered cross-term.
    std::vector<double> velocity_vjp(const std::vector<double>& state,
                                     const std::vector<double>& lambda) const;

    void set_gamma(std::vector<double> gamma);
    const std::vector<double>& gamma() const { return gamma_; }
    const InterpolationLaws& laws() const { return laws_; }
    std::vector<double> initial_state() const;

  private:
    const Mesh* mesh_;
    InterpolationLaws laws_;
    ThermalOptions options_;
    DofPartition part_;
    std::vector<double> gamma_;
    std::vector<double> velocity_;
    std::vector<std::pair<BoundaryEdge, double>> flux_edges_;  // prescribed diffusive flux
};

// Consistent nodal loads of the fluid pressure acting on the implicit
// fluid-solid interface: an interior edge belongs to the interface when the
// density jump across it exceeds the threshold; the traction -p n uses the
// shared-edge midpoint pressure. Output uses elastic DOF layout (2 per node).
std::vector<double> compute_coupling_force(const Mesh& mesh, const std::vector<double>& gamma,
                                           const std::vector<double>& flow_state,
                                           double jump_threshold = 0.5);

// (df/dp)^T w for the same detection: maps elastic-layout w to flow-layout
// pressure sensitivities. The indicator itself is frozen (not differentiated).
std::vector<double> coupling_force_pressure_vjp(const Mesh& mesh,
                                                const std::vector<double>& gamma,
                                                const std::vector<double>& w,
                                                double jump_threshold = 0.5);

// Linear elasticity K(gamma) d = f with plane-stress isotropic material and
// SIMP-interpolated modulus. Residual form K d - f so the Newton/adjoint
// machinery applies unchanged.
class ElasticSystem : public DesignSystem {
  public:
    ElasticSystem(const Mesh& mesh, const BCTable& table, InterpolationLaws laws);

    int n_state() const override { return 2 * mesh_->n_nodes(); }
    const DofPartition& partition() const override { return part_; }
    std::vector<double> residual(const std::vector<double>& state) const override;
    CsrMatrix jacobian(const std::vector<double>& state) const override;

    std::vector<double> design_jvp(const std::vector<double>& state,
                                   const std::vector<double>& dir) const override;
    std::vector<double> design_vjp(const std::vector<double>& state,
                                   const std::vector<double>& lambda) const override;
    const Mesh& mesh() const override { return *mesh_; }

    void set_gamma(std::vector<double> gamma);
    const std::vector<double>& gamma() const { return gamma_; }
    void set_load(std::vector<double> force);
    const std::vector<double>& load() const { return force_; }

    static int dof_dx(int node) { return 2 * node; }
    static int dof_dy(int node) { return 2 * node + 1; }

  private:
    const Mesh* mesh_;
    InterpolationLaws laws_;
    DofPartition part_;
    std::vector<double> gamma_;
    std::vector<double> force_;
};

struct FsiResult {
    std::vector<double> flow_state;
    SolveReport flow_report;
    std::vector<double> force;
    std::vector<double> displacement;
    SolveReport elastic_report;
};

// One-way weak coupling: flow solve, pressure-load transfer, elastic solve.
FsiResult solve_weak_fsi(FlowSystem& flow, ElasticSystem& elastic,
                         const NewtonConfig& newton = {}, const LinearSolverOptions& lin = {});

struct ChtResult {
    std::vector<double> flow_state;
    SolveReport flow_report;
    std::vector<double> thermal_state;
    SolveReport thermal_report;
};

// Staggered conjugate heat transfer: flow first, then energy transport.
ChtResult solve_cht(FlowSystem& flow, ThermalSystem& thermal, const NewtonConfig& newton = {},
                    const LinearSolverOptions& lin = {});

// Scalarized heat-exchange objective (1-w) J_f/J_f* - w J_t/J_t* over the
// staggered chain. outlet_segments selects the boundary carrying the advected
// heat flux J_t.
struct ChtObjective {
    double weight = 0.0;  // 0 = pure dissipated power, 1 = pure thermal power
    ChtNormalizers norms{1.0, 1.0};
    std::vector<int> outlet_segments;
    double rho_cp = 1.0;
};

struct ChtSensitivity {
    double value = 0.0;
    double j_flow = 0.0;     // dissipated power before scalarization
    double j_thermal = 0.0;  // boundary thermal power before scalarization
    std::vector<double> grad_gamma;  // design elements, element order
    int linear_solves = 0;
};

// Total design gradient of the weighted objective. weight = 0 never touches
// the thermal block, so it reproduces the plain dissipated-power sensitivity
// exactly when the flow normalizer is 1.
ChtSensitivity cht_sensitivity(const FlowSystem& flow, const ThermalSystem& thermal,
                               const ChtResult& result, const ChtObjective& objective,
                               const LinearSolverOptions& lin = {});

}  // namespace ftop
