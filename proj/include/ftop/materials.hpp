#pragma once

#include <vector>

#include "ftop/dual.hpp"
#include "ftop/errors.hpp"
#include "ftop/geometry.hpp"

namespace ftop {

// Rational Brinkman interpolation: convexity steered by q_alpha, sharpened by
// continuation over the optimization.
struct RampParams {
    double alpha_min = 0.0;
    double alpha_max = 1e4;
    double q_alpha = 0.1;
};

// Shear-thinning viscosity between zero-shear and infinite-shear plateaus.
struct CarreauYasudaParams {
    double mu_inf = 3.45e-2;
    double mu_0 = 0.8;
    double a = 2.0;
    double lambda = 3.31;
    double n = 0.3568;
};

// Inverse-Peclet blend for conjugate heat transfer; q = 0 is a linear blend.
struct PecletParams {
    double pe_fluid = 20.0;
    double pe_solid = 2.0;
    double q = 0.0;
};

// Power-law modulus interpolation for the elastic phase.
struct ElasticityParams {
    double e_solid = 1e5;
    double e_min = 1e-1;
    double simp_power = 3.0;
    double poisson = 0.3;
};

struct InterpolationLaws {
    RampParams brinkman;
    PecletParams peclet;
    ElasticityParams elasticity;
    bool carreau = false;
    double mu = 1.0;  // constant viscosity when carreau is off
    CarreauYasudaParams cy;
};

namespace detail {
template <class T>
void check_unit_range(const T& gamma, const char* law) {
    const double g = value(gamma);
    if (g < 0.0 || g > 1.0)
        throw ConfigError(std::string(law) + ": density outside [0, 1]");
}
}  // namespace detail

template <class T>
T brinkman_alpha(const T& gamma, const RampParams& p) {
    detail::check_unit_range(gamma, "brinkman_alpha");
    return p.alpha_min + (p.alpha_max - p.alpha_min) * gamma / (1.0 + p.q_alpha - p.q_alpha * gamma);
}

template <class T>
T carreau_yasuda_mu(const T& shear_rate, const CarreauYasudaParams& p) {
    T t = 1.0 + pow(p.lambda * shear_rate, p.a);
    return p.mu_inf + (p.mu_0 - p.mu_inf) * pow(t, (p.n - 1.0) / p.a);
}

// Coefficient multiplying the temperature gradient: 1/Pe(gamma).
template <class T>
T interpolate_peclet(const T& gamma, const PecletParams& p) {
    detail::check_unit_range(gamma, "interpolate_peclet");
    const double k_fluid = 1.0 / p.pe_fluid;
    const double k_solid = 1.0 / p.pe_solid;
    return k_fluid + (k_solid - k_fluid) * gamma / (1.0 + p.q - p.q * gamma);
}

template <class T>
T interpolate_modulus(const T& gamma, const ElasticityParams& p) {
    detail::check_unit_range(gamma, "interpolate_modulus");
    return p.e_min + (p.e_solid - p.e_min) * pow(gamma, p.simp_power);
}

// Conic-weight neighborhood average over element centroids. Rows outside the
// design mask pass through unchanged; radius below one element width makes the
// whole map the identity.
class DensityFilter {
  public:
    DensityFilter(const Mesh& mesh, double radius);

    bool active() const { return active_; }
    std::vector<double> apply(const std::vector<double>& gamma) const;
    std::vector<double> apply_transpose(const std::vector<double>& grad) const;

  private:
    bool active_ = false;
    int n_ = 0;
    std::vector<std::uint8_t> design_;
    // CSR-style weight rows, normalized to sum 1.
    std::vector<int> row_start_;
    std::vector<int> cols_;
    std::vector<double> weights_;
};

}  // namespace ftop
