#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ftop/dual.hpp"
#include "ftop/geometry.hpp"
#include "ftop/materials.hpp"
#include "ftop/solve.hpp"

namespace ftop {

struct FluidConstants {
    double rho = 1.0;
    double convection_scale = 1.0;  // 0 gives the Stokes limit
};

struct FlowOptions {
    double stab_beta = 0.05;  // pressure-stabilization coefficient
    bool parallel = true;
    // Pressure pin for enclosed domains; defaults to node 0 at 0 when the
    // table fixes no pressure DOF anywhere.
    std::optional<std::pair<int, double>> pressure_pin;
    std::function<Vec2(Vec2)> body_force;  // manufactured-solution source hook
};

// Local steady Navier-Stokes residual of one voxel element: 12 state inputs
// (ux, uy, p per corner node), 1 design input, 12 outputs. The momentum rows
// carry convection, shear stress, pressure and Brinkman drag; continuity rows
// carry divergence plus a pressure-Laplacian stabilization tau = beta h^2/mu.
struct FlowElementKernel {
    double hx = 0, hy = 0;
    double x0 = 0, y0 = 0;
    double rho = 1.0;
    double convection_scale = 1.0;
    double stab_beta = 0.05;
    RampParams ramp;
    bool carreau = false;
    double mu = 1.0;
    CarreauYasudaParams cy;
    const std::function<Vec2(Vec2)>* body_force = nullptr;

    template <class T>
    void operator()(std::span<const T> s, std::span<const T> g, std::span<T> out) const {
        static constexpr double kGauss = 0.57735026918962576;
        static constexpr double qx[4] = {-kGauss, kGauss, kGauss, -kGauss};
        static constexpr double qy[4] = {-kGauss, -kGauss, kGauss, kGauss};
        static constexpr double cx[4] = {-1.0, 1.0, 1.0, -1.0};
        static constexpr double cy_[4] = {-1.0, -1.0, 1.0, 1.0};

        for (auto& o : out) o = T(0.0);
        const T alpha = brinkman_alpha(g[0], ramp);
        const double w = hx * hy / 4.0;

        for (int q = 0; q < 4; ++q) {
            double N[4], dNx[4], dNy[4];
            for (int a = 0; a < 4; ++a) {
                N[a] = 0.25 * (1.0 + cx[a] * qx[q]) * (1.0 + cy_[a] * qy[q]);
                dNx[a] = 0.25 * cx[a] * (1.0 + cy_[a] * qy[q]) * 2.0 / hx;
                dNy[a] = 0.25 * cy_[a] * (1.0 + cx[a] * qx[q]) * 2.0 / hy;
            }

            T ux(0.0), uy(0.0), p(0.0);
            T ux_x(0.0), ux_y(0.0), uy_x(0.0), uy_y(0.0), p_x(0.0), p_y(0.0);
            for (int a = 0; a < 4; ++a) {
                const T& va = s[3 * a];
                const T& vb = s[3 * a + 1];
                const T& vp = s[3 * a + 2];
                ux += N[a] * va;
                uy += N[a] * vb;
                p += N[a] * vp;
                ux_x += dNx[a] * va;
                ux_y += dNy[a] * va;
                uy_x += dNx[a] * vb;
                uy_y += dNy[a] * vb;
                p_x += dNx[a] * vp;
                p_y += dNy[a] * vp;
            }
            const T gamma_dot_sq =
                2.0 * (ux_x * ux_x + uy_y * uy_y) + (ux_y + uy_x) * (ux_y + uy_x);

            T mu_q(mu);
            if (carreau) mu_q = carreau_yasuda_mu(sqrt(gamma_dot_sq + 1e-20), cy);
            const T tau = stab_beta * hx * hy / mu_q;

            const T conv_x = convection_scale * rho * (ux * ux_x + uy * ux_y);
            const T conv_y = convection_scale * rho * (ux * uy_x + uy * uy_y);
            const T div = ux_x + uy_y;

            double fx = 0.0, fy = 0.0;
            if (body_force && *body_force) {
                const double gx = x0 + 0.5 * hx * (1.0 + qx[q]);
                const double gy = y0 + 0.5 * hy * (1.0 + qy[q]);
                const Vec2 f = (*body_force)({gx, gy});
                fx = f.x;
                fy = f.y;
            }

            for (int a = 0; a < 4; ++a) {
                const T sym_xy = ux_y + uy_x;
                const T rx = conv_x * N[a] + mu_q * (2.0 * ux_x * dNx[a] + sym_xy * dNy[a]) -
                             p * dNx[a] + alpha * ux * N[a] - fx * N[a];
                const T ry = conv_y * N[a] + mu_q * (sym_xy * dNx[a] + 2.0 * uy_y * dNy[a]) -
                             p * dNy[a] + alpha * uy * N[a] - fy * N[a];
                const T rc = div * N[a] + tau * (p_x * dNx[a] + p_y * dNy[a]);
                out[3 * a] -= w * rx;
                out[3 * a + 1] -= w * ry;
                out[3 * a + 2] -= w * rc;
            }
        }
    }
};

// Global residual/Jacobian assembly over the voxel mesh; interleaved DOFs
// (ux, uy, p) per node. Assembly runs kernel evaluations in parallel into
// per-element buffers and scatters serially in element order, so results are
// bit-stable across worker counts.
class FlowSystem : public DesignSystem {
  public:
    FlowSystem(const Mesh& mesh, const BCTable& table, InterpolationLaws laws,
               FluidConstants constants = {}, FlowOptions options = {});

    int n_state() const override { return 3 * mesh_->n_nodes(); }
    const DofPartition& partition() const override { return part_; }
    std::vector<double> residual(const std::vector<double>& state) const override;
    CsrMatrix jacobian(const std::vector<double>& state) const override;

    void set_gamma(std::vector<double> gamma);
    const std::vector<double>& gamma() const { return gamma_; }
    void set_ramp(const RampParams& ramp) { laws_.brinkman = ramp; }
    const InterpolationLaws& laws() const { return laws_; }
    void set_convection_scale(double s) { constants_.convection_scale = s; }
    const FluidConstants& constants() const { return constants_; }
    void set_parallel(bool on) { options_.parallel = on; }

    // Directional design derivative dR/dgamma . v, reduced rows.
    std::vector<double> design_jvp(const std::vector<double>& state,
                                   const std::vector<double>& dir) const override;
    // lambda^T dR/dgamma, one entry per element.
    std::vector<double> design_vjp(const std::vector<double>& state,
                                   const std::vector<double>& lambda) const override;

    const Mesh& mesh() const override { return *mesh_; }
    FlowElementKernel element_kernel(int e) const;
    std::vector<double> gather_element_state(const std::vector<double>& state, int e) const;

    static int dof_ux(int node) { return 3 * node; }
    static int dof_uy(int node) { return 3 * node + 1; }
    static int dof_p(int node) { return 3 * node + 2; }

    // Builds a full state holding zeros with Dirichlet values imposed.
    std::vector<double> initial_state() const;

  private:
    const Mesh* mesh_;
    InterpolationLaws laws_;
    FluidConstants constants_;
    FlowOptions options_;
    DofPartition part_;
    std::vector<double> gamma_;

    template <class Fn>
    void for_each_element(Fn&& fn) const;
};

}  // namespace ftop
