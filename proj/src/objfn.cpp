#include "ftop/objfn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ftop/dual.hpp"
#include "ftop/errors.hpp"

namespace ftop {

namespace {

constexpr double kGauss = 0.57735026918962576;
constexpr double kQx[4] = {-kGauss, kGauss, kGauss, -kGauss};
constexpr double kQy[4] = {-kGauss, -kGauss, kGauss, kGauss};
constexpr double kCx[4] = {-1, 1, 1, -1};
constexpr double kCy[4] = {-1, -1, 1, 1};

struct GaussPoint {
    double N[4], dNx[4], dNy[4];
};

GaussPoint shape_at(int q, double hx, double hy) {
    GaussPoint g;
    for (int a = 0; a < 4; ++a) {
        g.N[a] = 0.25 * (1 + kCx[a] * kQx[q]) * (1 + kCy[a] * kQy[q]);
        g.dNx[a] = 0.25 * kCx[a] * (1 + kCy[a] * kQy[q]) * 2.0 / hx;
        g.dNy[a] = 0.25 * kCy[a] * (1 + kCx[a] * kQx[q]) * 2.0 / hy;
    }
    return g;
}

// Element contribution of a volume functional, differentiated in one sweep:
// lanes 0..11 are the local (ux, uy, p) values, lane 12 is the density.
template <class Integrand>
FunctionalEval integrate_volume(const Mesh& mesh, std::span<const double> gamma,
                                std::span<const double> state, Integrand&& f) {
    FunctionalEval out;
    out.grad_state.assign(state.size(), 0.0);
    out.grad_gamma.assign(std::size_t(mesh.n_elems()), 0.0);

    using D = DualN<13>;
    std::array<GaussPoint, 4> gp;
    for (int q = 0; q < 4; ++q) gp[q] = shape_at(q, mesh.hx, mesh.hy);
    const double w = mesh.hx * mesh.hy / 4.0;

    for (int e = 0; e < mesh.n_elems(); ++e) {
        const auto& conn = mesh.elem_conn[e];
        std::array<D, 12> s;
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 3; ++c)
                s[3 * a + c] = D::seeded(state[3 * conn[a] + c], 3 * a + c);
        const D g = D::seeded(gamma[e], 12);

        D acc{};
        for (int q = 0; q < 4; ++q) {
            D ux{}, uy{}, ux_x{}, ux_y{}, uy_x{}, uy_y{};
            for (int a = 0; a < 4; ++a) {
                ux = ux + gp[q].N[a] * s[3 * a];
                uy = uy + gp[q].N[a] * s[3 * a + 1];
                ux_x = ux_x + gp[q].dNx[a] * s[3 * a];
                ux_y = ux_y + gp[q].dNy[a] * s[3 * a];
                uy_x = uy_x + gp[q].dNx[a] * s[3 * a + 1];
                uy_y = uy_y + gp[q].dNy[a] * s[3 * a + 1];
            }
            acc = acc + w * f(ux, uy, ux_x, ux_y, uy_x, uy_y, g);
        }

        out.value += acc.v;
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 3; ++c) out.grad_state[3 * conn[a] + c] += acc.d[3 * a + c];
        out.grad_gamma[std::size_t(e)] = acc.d[12];
    }
    return out;
}

}  // namespace

FunctionalEval dissipated_power(const Mesh& mesh, const InterpolationLaws& laws,
                                std::span<const double> gamma,
                                std::span<const double> flow_state) {
    using D = DualN<13>;
    return integrate_volume(
        mesh, gamma, flow_state,
        [&](const D& ux, const D& uy, const D& ux_x, const D& ux_y, const D& uy_x, const D& uy_y,
            const D& g) {
            const D shear_sq = 2.0 * (ux_x * ux_x + uy_y * uy_y) +
                               (ux_y + uy_x) * (ux_y + uy_x);
            const D mu = laws.carreau ? carreau_yasuda_mu(sqrt(shear_sq + 1e-20), laws.cy)
                                      : D{laws.mu};
            const D alpha = brinkman_alpha(g, laws.brinkman);
            return mu * shear_sq + 0.5 * alpha * (ux * ux + uy * uy);
        });
}

FunctionalEval point_velocity(const Mesh& mesh, std::span<const double> flow_state, Vec2 probe,
                              int comp) {
    const double tol = 1e-12 * std::max(mesh.nx * mesh.hx, mesh.ny * mesh.hy);
    const Vec2 lo = mesh.origin;
    const Vec2 hi{mesh.origin.x + mesh.nx * mesh.hx, mesh.origin.y + mesh.ny * mesh.hy};
    if (probe.x < lo.x - tol || probe.x > hi.x + tol || probe.y < lo.y - tol ||
        probe.y > hi.y + tol)
        throw ConfigError("point_velocity: probe point lies outside the mesh");
    if (comp != 0 && comp != 1) throw ConfigError("point_velocity: component must be 0 or 1");

    const int ex = std::clamp(int((probe.x - lo.x) / mesh.hx), 0, mesh.nx - 1);
    const int ey = std::clamp(int((probe.y - lo.y) / mesh.hy), 0, mesh.ny - 1);
    const int e = mesh.elem_id(ex, ey);
    const double xi = 2.0 * (probe.x - (lo.x + ex * mesh.hx)) / mesh.hx - 1.0;
    const double eta = 2.0 * (probe.y - (lo.y + ey * mesh.hy)) / mesh.hy - 1.0;

    FunctionalEval out;
    out.grad_state.assign(flow_state.size(), 0.0);
    const auto& conn = mesh.elem_conn[e];
    for (int a = 0; a < 4; ++a) {
        const double N = 0.25 * (1 + kCx[a] * xi) * (1 + kCy[a] * eta);
        out.value += N * flow_state[3 * conn[a] + comp];
        out.grad_state[3 * conn[a] + comp] += N;
    }
    return out;
}

FunctionalEval drag(const Mesh& mesh, const InterpolationLaws& laws, std::span<const double> gamma,
                    std::span<const double> flow_state, int comp) {
    if (comp != 0 && comp != 1) throw ConfigError("drag: component must be 0 or 1");
    using D = DualN<13>;
    return integrate_volume(mesh, gamma, flow_state,
                            [&](const D& ux, const D& uy, const D&, const D&, const D&, const D&,
                                const D& g) {
                                const D alpha = brinkman_alpha(g, laws.brinkman);
                                return alpha * (comp == 0 ? ux : uy);
                            });
}

FunctionalEval compliance(std::span<const double> force, std::span<const double> displacement) {
    if (force.size() != displacement.size())
        throw ConfigError("compliance: force and displacement lengths differ");
    FunctionalEval out;
    out.grad_state.assign(force.begin(), force.end());
    for (std::size_t i = 0; i < force.size(); ++i) out.value += force[i] * displacement[i];
    return out;
}

ThermalPowerEval thermal_power(const Mesh& mesh, const std::vector<int>& segments, double rho_cp,
                               std::span<const double> flow_state,
                               std::span<const double> thermal_state) {
    std::set<int> wanted(segments.begin(), segments.end());
    std::set<int> seen;
    ThermalPowerEval out;
    out.grad_flow.assign(flow_state.size(), 0.0);
    out.grad_thermal.assign(thermal_state.size(), 0.0);

    for (const auto& be : mesh.boundary_edges) {
        if (!wanted.count(be.segment_id)) continue;
        seen.insert(be.segment_id);
        const auto& conn = mesh.elem_conn[be.elem];
        const int n0 = conn[kEdgeNodes[be.local_edge][0]];
        const int n1 = conn[kEdgeNodes[be.local_edge][1]];
        const double nx = kEdgeNormal[be.local_edge][0];
        const double ny = kEdgeNormal[be.local_edge][1];
        const double len = (be.local_edge % 2 == 0) ? mesh.hx : mesh.hy;

        for (double xi : {-kGauss, kGauss}) {
            const double N0 = 0.5 * (1 - xi), N1 = 0.5 * (1 + xi);
            const double w = 0.5 * len;
            const double un = nx * (N0 * flow_state[3 * n0] + N1 * flow_state[3 * n1]) +
                              ny * (N0 * flow_state[3 * n0 + 1] + N1 * flow_state[3 * n1 + 1]);
            const double T = N0 * thermal_state[n0] + N1 * thermal_state[n1];
            out.value += w * rho_cp * un * T;
            out.grad_thermal[n0] += w * rho_cp * un * N0;
            out.grad_thermal[n1] += w * rho_cp * un * N1;
            out.grad_flow[3 * n0] += w * rho_cp * nx * N0 * T;
            out.grad_flow[3 * n1] += w * rho_cp * nx * N1 * T;
            out.grad_flow[3 * n0 + 1] += w * rho_cp * ny * N0 * T;
            out.grad_flow[3 * n1 + 1] += w * rho_cp * ny * N1 * T;
        }
    }
    for (int id : segments)
        if (!seen.count(id))
            throw ConfigError("thermal_power: segment " + std::to_string(id) +
                              " has no boundary edges");
    return out;
}

FunctionalEval volume_constraint(const Mesh& mesh, std::span<const double> gamma, double vstar,
                                 VolumeSense sense, VolumeReference reference) {
    if (!(vstar > 0.0) || vstar > 1.0)
        throw ConfigError("volume_constraint: target fraction must lie in (0, 1]");
    const bool design_only = reference == VolumeReference::design_region;

    double ref_area = 0.0, material = 0.0;
    for (int e = 0; e < mesh.n_elems(); ++e) {
        if (design_only && !mesh.design_mask[std::size_t(e)]) continue;
        ref_area += mesh.elem_volume[std::size_t(e)];
        material += gamma[std::size_t(e)] * mesh.elem_volume[std::size_t(e)];
    }
    const double scale = 1.0 / (vstar * ref_area);

    FunctionalEval out;
    out.grad_gamma.assign(std::size_t(mesh.n_elems()), 0.0);
    const double sign = (sense == VolumeSense::lower_bound) ? -1.0 : 1.0;
    out.value = (sense == VolumeSense::lower_bound) ? 1.0 - material * scale
                                                    : material * scale - 1.0;
    for (int e = 0; e < mesh.n_elems(); ++e) {
        if (design_only && !mesh.design_mask[std::size_t(e)]) continue;
        out.grad_gamma[std::size_t(e)] = sign * mesh.elem_volume[std::size_t(e)] * scale;
    }
    return out;
}

FunctionalEval dissipation_constraint(const Mesh& mesh, const InterpolationLaws& laws,
                                      std::span<const double> gamma,
                                      std::span<const double> flow_state, double phi0,
                                      double c_f) {
    if (!std::isfinite(phi0) || phi0 <= 0.0)
        throw ConfigError("dissipation_constraint: baseline power must be positive");
    FunctionalEval out = dissipated_power(mesh, laws, gamma, flow_state);
    out.value -= c_f * phi0;
    return out;
}

double weighted_cht_objective(double j_f, double j_t, double w, const ChtNormalizers& norms) {
    if (!(norms.j_f > 0.0) || !(norms.j_t > 0.0))
        throw ConfigError("weighted_cht_objective: normalizers must be positive");
    return (1.0 - w) * j_f / norms.j_f - w * j_t / norms.j_t;
}

}  // namespace ftop
