#pragma once

#include <span>
#include <vector>

#include "ftop/geometry.hpp"
#include "ftop/materials.hpp"

namespace ftop {

// Value plus the partial derivatives the adjoint engine consumes. Gradients
// are empty when the functional does not depend on that argument.
struct FunctionalEval {
    double value = 0.0;
    std::vector<double> grad_state;  // per state DOF
    std::vector<double> grad_gamma;  // per element
};

// Boundary functional with two state dependencies (velocity and temperature).
struct ThermalPowerEval {
    double value = 0.0;
    std::vector<double> grad_flow;
    std::vector<double> grad_thermal;
};

enum class VolumeSense { lower_bound, upper_bound };
enum class VolumeReference { domain, design_region };

struct ChtNormalizers {
    double j_f = 0.0;  // dissipated-power reference (w = 0 optimum)
    double j_t = 0.0;  // thermal-power reference (w = 1 optimum)
};

// Total dissipated power: mu(shear)*shear^2 viscous part plus the penalized
// 0.5*alpha*|u|^2 seepage part, integrated with the same quadrature as the
// residual.
FunctionalEval dissipated_power(const Mesh& mesh, const InterpolationLaws& laws,
                                std::span<const double> gamma, std::span<const double> flow_state);

// Bilinear sample of one velocity component at an interior probe point.
FunctionalEval point_velocity(const Mesh& mesh, std::span<const double> flow_state, Vec2 probe,
                              int comp);

// Body-force drag: integral of alpha(gamma) * u_comp over the domain.
FunctionalEval drag(const Mesh& mesh, const InterpolationLaws& laws, std::span<const double> gamma,
                    std::span<const double> flow_state, int comp = 0);

// Structural compliance f.d; grad_state is the load vector.
FunctionalEval compliance(std::span<const double> force, std::span<const double> displacement);

// Net convective heat flow through the listed boundary segments.
ThermalPowerEval thermal_power(const Mesh& mesh, const std::vector<int>& segments, double rho_cp,
                               std::span<const double> flow_state,
                               std::span<const double> thermal_state);

// Material-fraction constraint, both senses. The reference area is the whole
// domain or the design region; the target vstar is a fraction of it.
FunctionalEval volume_constraint(const Mesh& mesh, std::span<const double> gamma, double vstar,
                                 VolumeSense sense,
                                 VolumeReference reference = VolumeReference::domain);

// Dissipated-power budget Phi - c_f * phi0 <= 0 relative to a precomputed
// empty-design baseline phi0.
FunctionalEval dissipation_constraint(const Mesh& mesh, const InterpolationLaws& laws,
                                      std::span<const double> gamma,
                                      std::span<const double> flow_state, double phi0, double c_f);

// Scalarized bi-objective (1-w) Jf/Jf* - w Jt/Jt*.
double weighted_cht_objective(double j_f, double j_t, double w, const ChtNormalizers& norms);

}  // namespace ftop
