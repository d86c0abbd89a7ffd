#include "ftop/coupled.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ftop/dual.hpp"
#include "ftop/errors.hpp"

namespace ftop {

namespace {

constexpr double kGauss = 0.57735026918962576;
constexpr double kQx[4] = {-kGauss, kGauss, kGauss, -kGauss};
constexpr double kQy[4] = {-kGauss, -kGauss, kGauss, kGauss};
constexpr double kCx[4] = {-1, 1, 1, -1};
constexpr double kCy[4] = {-1, -1, 1, 1};

struct ElementGeom {
    double hx, hy, x0, y0;
};

// Energy-transport rows of one element. Lanes: T nodal values (4), nodal
// velocities (8), density (1); callers seed whichever block they need.
template <class T>
void thermal_element(const ElementGeom& g, const T* temp, const T* vel, const T& gamma,
                     const PecletParams& peclet, const std::function<double(Vec2)>& source,
                     T* out) {
    const T inv_pe = interpolate_peclet(gamma, peclet);
    const double w = g.hx * g.hy / 4.0;
    for (int q = 0; q < 4; ++q) {
        double N[4], dNx[4], dNy[4];
        for (int a = 0; a < 4; ++a) {
            N[a] = 0.25 * (1 + kCx[a] * kQx[q]) * (1 + kCy[a] * kQy[q]);
            dNx[a] = 0.25 * kCx[a] * (1 + kCy[a] * kQy[q]) * 2.0 / g.hx;
            dNy[a] = 0.25 * kCy[a] * (1 + kCx[a] * kQx[q]) * 2.0 / g.hy;
        }
        T ux{}, uy{}, tx{}, ty{};
        for (int a = 0; a < 4; ++a) {
            ux = ux + N[a] * vel[2 * a];
            uy = uy + N[a] * vel[2 * a + 1];
            tx = tx + dNx[a] * temp[a];
            ty = ty + dNy[a] * temp[a];
        }
        const T adv = ux * tx + uy * ty;
        double f = 0.0;
        if (source)
            f = source({g.x0 + 0.5 * g.hx * (1 + kQx[q]), g.y0 + 0.5 * g.hy * (1 + kQy[q])});
        for (int a = 0; a < 4; ++a)
            out[a] = out[a] +
                     w * (adv * N[a] + inv_pe * (tx * dNx[a] + ty * dNy[a]) - f * N[a]);
    }
}

// Plane-stress stiffness action K_e(E(gamma)) d_e; lanes: displacements (8)
// plus density (1).
template <class T>
void elastic_element(const ElementGeom& g, const T* d, const T& gamma,
                     const ElasticityParams& params, T* out) {
    const T e_mod = interpolate_modulus(gamma, params);
    const double nu = params.poisson;
    const T c0 = e_mod / (1.0 - nu * nu);  // C = c0 [[1,nu,0],[nu,1,0],[0,0,(1-nu)/2]]
    const double w = g.hx * g.hy / 4.0;
    for (int q = 0; q < 4; ++q) {
        double dNx[4], dNy[4];
        for (int a = 0; a < 4; ++a) {
            dNx[a] = 0.25 * kCx[a] * (1 + kCy[a] * kQy[q]) * 2.0 / g.hx;
            dNy[a] = 0.25 * kCy[a] * (1 + kCx[a] * kQx[q]) * 2.0 / g.hy;
        }
        T exx{}, eyy{}, gxy{};
        for (int a = 0; a < 4; ++a) {
            exx = exx + dNx[a] * d[2 * a];
            eyy = eyy + dNy[a] * d[2 * a + 1];
            gxy = gxy + dNy[a] * d[2 * a] + dNx[a] * d[2 * a + 1];
        }
        const T sxx = c0 * (exx + nu * eyy);
        const T syy = c0 * (nu * exx + eyy);
        const T sxy = c0 * (0.5 * (1.0 - nu) * gxy);
        for (int a = 0; a < 4; ++a) {
            out[2 * a] = out[2 * a] + w * (sxx * dNx[a] + sxy * dNy[a]);
            out[2 * a + 1] = out[2 * a + 1] + w * (sxy * dNx[a] + syy * dNy[a]);
        }
    }
}

ElementGeom elem_geom(const Mesh& mesh, int e) {
    const int ix = e % mesh.nx, iy = e / mesh.nx;
    return {mesh.hx, mesh.hy, mesh.origin.x + ix * mesh.hx, mesh.origin.y + iy * mesh.hy};
}

template <class Body>
void for_each_element(int n, bool parallel, Body&& body) {
#ifdef _OPENMP
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int e = 0; e < n; ++e) body(e);
        return;
    }
#endif
    for (int e = 0; e < n; ++e) body(e);
}

}  // namespace

ThermalSystem::ThermalSystem(const Mesh& mesh, const BCTable& table, InterpolationLaws laws,
                             ThermalOptions options)
    : mesh_(&mesh), laws_(laws), options_(std::move(options)) {
    const DofBC bc = apply_bcs(mesh, table);
    std::vector<std::pair<int, double>> fixed;
    for (const auto& nb : bc.fixed[int(FieldComp::T)]) fixed.emplace_back(nb.node, nb.value);
    part_ = DofPartition::build(mesh.n_nodes(), fixed);

    gamma_.assign(std::size_t(mesh.n_elems()), 0.0);
    for (int e = 0; e < mesh.n_elems(); ++e)
        if (mesh.solid_mask[std::size_t(e)]) gamma_[std::size_t(e)] = 1.0;
    velocity_.assign(std::size_t(3 * mesh.n_nodes()), 0.0);

    for (const auto& ne : table.neumann) {
        if (ne.comp != FieldComp::T)
            throw ConfigError("thermal: flux conditions support the temperature field only");
        bool found = false;
        for (const auto& be : mesh.boundary_edges)
            if (be.segment_id == ne.segment) {
                flux_edges_.push_back({be, ne.value});
                found = true;
            }
        if (!found)
            throw ConfigError("thermal: flux segment " + std::to_string(ne.segment) +
                              " has no boundary edges");
    }
}

void ThermalSystem::set_gamma(std::vector<double> gamma) {
    if (int(gamma.size()) != mesh_->n_elems())
        throw ConfigError("thermal: density field length mismatch");
    gamma_ = std::move(gamma);
}

void ThermalSystem::set_velocity(std::vector<double> flow_state) {
    if (int(flow_state.size()) != 3 * mesh_->n_nodes())
        throw ConfigError("thermal: velocity state length mismatch");
    velocity_ = std::move(flow_state);
}

std::vector<double> ThermalSystem::initial_state() const {
    std::vector<double> s(std::size_t(mesh_->n_nodes()), 0.0);
    part_.impose(s);
    return s;
}

std::vector<double> ThermalSystem::residual(const std::vector<double>& state) const {
    const int ne = mesh_->n_elems();
    std::vector<double> buf(std::size_t(ne) * 4, 0.0);
    for_each_element(ne, options_.parallel, [&](int e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        double temp[4], vel[8], out[4] = {0, 0, 0, 0};
        for (int a = 0; a < 4; ++a) {
            temp[a] = state[std::size_t(conn[a])];
            vel[2 * a] = velocity_[std::size_t(3 * conn[a])];
            vel[2 * a + 1] = velocity_[std::size_t(3 * conn[a] + 1)];
        }
        thermal_element(elem_geom(*mesh_, e), temp, vel, gamma_[std::size_t(e)], laws_.peclet,
                        options_.source, out);
        for (int a = 0; a < 4; ++a) buf[std::size_t(4 * e + a)] = out[a];
    });

    std::vector<double> r(std::size_t(part_.n_free()), 0.0);
    for (int e = 0; e < ne; ++e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        for (int a = 0; a < 4; ++a) {
            const double v = buf[std::size_t(4 * e + a)];
            if (!std::isfinite(v))
                throw SolverError("thermal assembly: non-finite entry in element " +
                                  std::to_string(e));
            const int f = part_.full_to_free[std::size_t(conn[a])];
            if (f >= 0) r[std::size_t(f)] += v;
        }
    }

    // Prescribed outward diffusive flux q = -k dT/dn enters the weak form as
    // +int(q N) once the boundary term is moved to the residual side.
    for (const auto& [be, q] : flux_edges_) {
        const auto& conn = mesh_->elem_conn[std::size_t(be.elem)];
        const double len = (be.local_edge % 2 == 0) ? mesh_->hx : mesh_->hy;
        for (int k = 0; k < 2; ++k) {
            const int f = part_.full_to_free[std::size_t(conn[kEdgeNodes[be.local_edge][k]])];
            if (f >= 0) r[std::size_t(f)] += q * len / 2.0;
        }
    }
    return r;
}

CsrMatrix ThermalSystem::jacobian(const std::vector<double>& state) const {
    const int ne = mesh_->n_elems();
    using D = DualN<4>;
    std::vector<double> blocks(std::size_t(ne) * 16, 0.0);
    for_each_element(ne, options_.parallel, [&](int e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        D temp[4], vel[8], out[4];
        for (int a = 0; a < 4; ++a) {
            temp[a] = D::seeded(state[std::size_t(conn[a])], a);
            vel[2 * a] = D{velocity_[std::size_t(3 * conn[a])]};
            vel[2 * a + 1] = D{velocity_[std::size_t(3 * conn[a] + 1)]};
        }
        thermal_element(elem_geom(*mesh_, e), temp, vel, D{gamma_[std::size_t(e)]}, laws_.peclet,
                        options_.source, out);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) blocks[std::size_t(16 * e + 4 * r + c)] = out[r].d[c];
    });

    std::vector<Triplet> ts;
    ts.reserve(std::size_t(ne) * 16);
    for (int e = 0; e < ne; ++e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        for (int r = 0; r < 4; ++r) {
            const int fr = part_.full_to_free[std::size_t(conn[r])];
            if (fr < 0) continue;
            for (int c = 0; c < 4; ++c) {
                const int fc = part_.full_to_free[std::size_t(conn[c])];
                if (fc < 0) continue;
                const double v = blocks[std::size_t(16 * e + 4 * r + c)];
                if (!std::isfinite(v))
                    throw SolverError("thermal assembly: non-finite entry in element " +
                                      std::to_string(e));
                ts.push_back({fr, fc, v});
            }
        }
    }
    return CsrMatrix::from_triplets(part_.n_free(), part_.n_free(), ts);
}

std::vector<double> ThermalSystem::design_jvp(const std::vector<double>& state,
                                              const std::vector<double>& dir) const {
    if (int(dir.size()) != mesh_->n_elems())
        throw ConfigError("thermal design_jvp: direction length mismatch");
    using D = DualN<1>;
    std::vector<double> r(std::size_t(part_.n_free()), 0.0);
    for (int e = 0; e < mesh_->n_elems(); ++e) {
        if (dir[std::size_t(e)] == 0.0) continue;
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        D temp[4], vel[8], out[4];
        for (int a = 0; a < 4; ++a) {
            temp[a] = D{state[std::size_t(conn[a])]};
            vel[2 * a] = D{velocity_[std::size_t(3 * conn[a])]};
            vel[2 * a + 1] = D{velocity_[std::size_t(3 * conn[a] + 1)]};
        }
        thermal_element(elem_geom(*mesh_, e), temp, vel, D::seeded(gamma_[std::size_t(e)], 0),
                        laws_.peclet, options_.source, out);
        for (int a = 0; a < 4; ++a) {
            const int f = part_.full_to_free[std::size_t(conn[a])];
            if (f >= 0) r[std::size_t(f)] += out[a].d[0] * dir[std::size_t(e)];
        }
    }
    return r;
}

std::vector<double> ThermalSystem::design_vjp(const std::vector<double>& state,
                                              const std::vector<double>& lambda) const {
    using D = DualN<1>;
    std::vector<double> out_v(std::size_t(mesh_->n_elems()), 0.0);
    for (int e = 0; e < mesh_->n_elems(); ++e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        D temp[4], vel[8], out[4];
        for (int a = 0; a < 4; ++a) {
            temp[a] = D{state[std::size_t(conn[a])]};
            vel[2 * a] = D{velocity_[std::size_t(3 * conn[a])]};
            vel[2 * a + 1] = D{velocity_[std::size_t(3 * conn[a] + 1)]};
        }
        thermal_element(elem_geom(*mesh_, e), temp, vel, D::seeded(gamma_[std::size_t(e)], 0),
                        laws_.peclet, options_.source, out);
        double acc = 0.0;
        for (int a = 0; a < 4; ++a) {
            const int f = part_.full_to_free[std::size_t(conn[a])];
            if (f >= 0) acc += lambda[std::size_t(f)] * out[a].d[0];
        }
        out_v[std::size_t(e)] = acc;
    }
    return out_v;
}

std::vector<double> ThermalSystem::velocity_vjp(const std::vector<double>& state,
                                                const std::vector<double>& lambda) const {
    using D = DualN<8>;
    std::vector<double> out_v(std::size_t(3 * mesh_->n_nodes()), 0.0);
    for (int e = 0; e < mesh_->n_elems(); ++e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        D temp[4], vel[8], out[4];
        for (int a = 0; a < 4; ++a) {
            temp[a] = D{state[std::size_t(conn[a])]};
            vel[2 * a] = D::seeded(velocity_[std::size_t(3 * conn[a])], 2 * a);
            vel[2 * a + 1] = D::seeded(velocity_[std::size_t(3 * conn[a] + 1)], 2 * a + 1);
        }
        thermal_element(elem_geom(*mesh_, e), temp, vel, D{gamma_[std::size_t(e)]}, laws_.peclet,
                        options_.source, out);
        for (int a = 0; a < 4; ++a) {
            const int f = part_.full_to_free[std::size_t(conn[a])];
            if (f < 0) continue;
            for (int b = 0; b < 4; ++b) {
                out_v[std::size_t(3 * conn[b])] += lambda[std::size_t(f)] * out[a].d[2 * b];
                out_v[std::size_t(3 * conn[b] + 1)] +=
                    lambda[std::size_t(f)] * out[a].d[2 * b + 1];
            }
        }
    }
    return out_v;
}

std::vector<double> compute_coupling_force(const Mesh& mesh, const std::vector<double>& gamma,
                                           const std::vector<double>& flow_state,
                                           double jump_threshold) {
    std::vector<double> f(std::size_t(2 * mesh.n_nodes()), 0.0);
    auto add_edge = [&](int n0, int n1, double nx, double ny, double len) {
        // Outward solid normal (nx, ny); shared-edge midpoint pressure.
        const double p_mid =
            0.5 * (flow_state[std::size_t(3 * n0 + 2)] + flow_state[std::size_t(3 * n1 + 2)]);
        const double fx = -p_mid * nx * len / 2.0;
        const double fy = -p_mid * ny * len / 2.0;
        f[std::size_t(2 * n0)] += fx;
        f[std::size_t(2 * n0 + 1)] += fy;
        f[std::size_t(2 * n1)] += fx;
        f[std::size_t(2 * n1 + 1)] += fy;
    };

    // Vertical faces between horizontally adjacent elements.
    for (int iy = 0; iy < mesh.ny; ++iy)
        for (int ix = 0; ix + 1 < mesh.nx; ++ix) {
            const int ea = mesh.elem_id(ix, iy), eb = mesh.elem_id(ix + 1, iy);
            const double jump = gamma[std::size_t(eb)] - gamma[std::size_t(ea)];
            if (std::fabs(jump) <= jump_threshold) continue;
            const int n0 = mesh.node_id(ix + 1, iy), n1 = mesh.node_id(ix + 1, iy + 1);
            const double dir = jump > 0 ? -1.0 : 1.0;  // outward from the solid side
            add_edge(n0, n1, dir, 0.0, mesh.hy);
        }
    // Horizontal faces between vertically adjacent elements.
    for (int iy = 0; iy + 1 < mesh.ny; ++iy)
        for (int ix = 0; ix < mesh.nx; ++ix) {
            const int ea = mesh.elem_id(ix, iy), eb = mesh.elem_id(ix, iy + 1);
            const double jump = gamma[std::size_t(eb)] - gamma[std::size_t(ea)];
            if (std::fabs(jump) <= jump_threshold) continue;
            const int n0 = mesh.node_id(ix, iy + 1), n1 = mesh.node_id(ix + 1, iy + 1);
            const double dir = jump > 0 ? -1.0 : 1.0;
            add_edge(n0, n1, 0.0, dir, mesh.hx);
        }
    return f;
}

std::vector<double> coupling_force_pressure_vjp(const Mesh& mesh,
                                                const std::vector<double>& gamma,
                                                const std::vector<double>& w,
                                                double jump_threshold) {
    std::vector<double> out(std::size_t(3 * mesh.n_nodes()), 0.0);
    auto add_edge = [&](int n0, int n1, double nx, double ny, double len) {
        const double wn = nx * (w[std::size_t(2 * n0)] + w[std::size_t(2 * n1)]) +
                          ny * (w[std::size_t(2 * n0 + 1)] + w[std::size_t(2 * n1 + 1)]);
        // d f / d p_k = -0.25 * len * n for k in {n0, n1}.
        out[std::size_t(3 * n0 + 2)] += -0.25 * len * wn;
        out[std::size_t(3 * n1 + 2)] += -0.25 * len * wn;
    };
    for (int iy = 0; iy < mesh.ny; ++iy)
        for (int ix = 0; ix + 1 < mesh.nx; ++ix) {
            const int ea = mesh.elem_id(ix, iy), eb = mesh.elem_id(ix + 1, iy);
            const double jump = gamma[std::size_t(eb)] - gamma[std::size_t(ea)];
            if (std::fabs(jump) <= jump_threshold) continue;
            add_edge(mesh.node_id(ix + 1, iy), mesh.node_id(ix + 1, iy + 1),
                     jump > 0 ? -1.0 : 1.0, 0.0, mesh.hy);
        }
    for (int iy = 0; iy + 1 < mesh.ny; ++iy)
        for (int ix = 0; ix < mesh.nx; ++ix) {
            const int ea = mesh.elem_id(ix, iy), eb = mesh.elem_id(ix, iy + 1);
            const double jump = gamma[std::size_t(eb)] - gamma[std::size_t(ea)];
            if (std::fabs(jump) <= jump_threshold) continue;
            add_edge(mesh.node_id(ix, iy + 1), mesh.node_id(ix + 1, iy + 1), 0.0,
                     jump > 0 ? -1.0 : 1.0, mesh.hx);
        }
    return out;
}

ElasticSystem::ElasticSystem(const Mesh& mesh, const BCTable& table, InterpolationLaws laws)
    : mesh_(&mesh), laws_(laws) {
    const DofBC bc = apply_bcs(mesh, table);
    std::vector<std::pair<int, double>> fixed;
    for (const auto& nb : bc.fixed[int(FieldComp::dx)]) fixed.emplace_back(dof_dx(nb.node), nb.value);
    for (const auto& nb : bc.fixed[int(FieldComp::dy)]) fixed.emplace_back(dof_dy(nb.node), nb.value);
    part_ = DofPartition::build(2 * mesh.n_nodes(), fixed);

    gamma_.assign(std::size_t(mesh.n_elems()), 0.0);
    for (int e = 0; e < mesh.n_elems(); ++e)
        if (mesh.solid_mask[std::size_t(e)]) gamma_[std::size_t(e)] = 1.0;
    force_.assign(std::size_t(2 * mesh.n_nodes()), 0.0);
}

void ElasticSystem::set_gamma(std::vector<double> gamma) {
    if (int(gamma.size()) != mesh_->n_elems())
        throw ConfigError("elastic: density field length mismatch");
    gamma_ = std::move(gamma);
}

void ElasticSystem::set_load(std::vector<double> force) {
    if (int(force.size()) != 2 * mesh_->n_nodes())
        throw ConfigError("elastic: load vector length mismatch");
    force_ = std::move(force);
}

std::vector<double> ElasticSystem::residual(const std::vector<double>& state) const {
    const int ne = mesh_->n_elems();
    std::vector<double> buf(std::size_t(ne) * 8, 0.0);
    for_each_element(ne, true, [&](int e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        double d[8], out[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        for (int a = 0; a < 4; ++a) {
            d[2 * a] = state[std::size_t(dof_dx(conn[a]))];
            d[2 * a + 1] = state[std::size_t(dof_dy(conn[a]))];
        }
        elastic_element(elem_geom(*mesh_, e), d, gamma_[std::size_t(e)], laws_.elasticity, out);
        for (int k = 0; k < 8; ++k) buf[std::size_t(8 * e + k)] = out[k];
    });

    std::vector<double> r(std::size_t(part_.n_free()), 0.0);
    for (int e = 0; e < ne; ++e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 2; ++c) {
                const double v = buf[std::size_t(8 * e + 2 * a + c)];
                if (!std::isfinite(v))
                    throw SolverError("elastic assembly: non-finite entry in element " +
                                      std::to_string(e));
                const int f = part_.full_to_free[std::size_t(2 * conn[a] + c)];
                if (f >= 0) r[std::size_t(f)] += v;
            }
    }
    for (int i = 0; i < part_.n_free(); ++i)
        r[std::size_t(i)] -= force_[std::size_t(part_.free_to_full[std::size_t(i)])];
    return r;
}

CsrMatrix ElasticSystem::jacobian(const std::vector<double>& state) const {
    const int ne = mesh_->n_elems();
    using D = DualN<8>;
    std::vector<double> blocks(std::size_t(ne) * 64, 0.0);
    for_each_element(ne, true, [&](int e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        D d[8], out[8];
        for (int a = 0; a < 4; ++a) {
            d[2 * a] = D::seeded(state[std::size_t(dof_dx(conn[a]))], 2 * a);
            d[2 * a + 1] = D::seeded(state[std::size_t(dof_dy(conn[a]))], 2 * a + 1);
        }
        elastic_element(elem_geom(*mesh_, e), d, D{gamma_[std::size_t(e)]}, laws_.elasticity,
                        out);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) blocks[std::size_t(64 * e + 8 * r + c)] = out[r].d[c];
    });

    std::vector<Triplet> ts;
    ts.reserve(std::size_t(ne) * 64);
    for (int e = 0; e < ne; ++e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        int dofs[8];
        for (int a = 0; a < 4; ++a) {
            dofs[2 * a] = 2 * conn[a];
            dofs[2 * a + 1] = 2 * conn[a] + 1;
        }
        for (int r = 0; r < 8; ++r) {
            const int fr = part_.full_to_free[std::size_t(dofs[r])];
            if (fr < 0) continue;
            for (int c = 0; c < 8; ++c) {
                const int fc = part_.full_to_free[std::size_t(dofs[c])];
                if (fc < 0) continue;
                const double v = blocks[std::size_t(64 * e + 8 * r + c)];
                if (!std::isfinite(v))
                    throw SolverError("elastic assembly: non-finite entry in element " +
                                      std::to_string(e));
                ts.push_back({fr, fc, v});
            }
        }
    }
    return CsrMatrix::from_triplets(part_.n_free(), part_.n_free(), ts);
}

std::vector<double> ElasticSystem::design_jvp(const std::vector<double>& state,
                                              const std::vector<double>& dir) const {
    if (int(dir.size()) != mesh_->n_elems())
        throw ConfigError("elastic design_jvp: direction length mismatch");
    using D = DualN<1>;
    std::vector<double> r(std::size_t(part_.n_free()), 0.0);
    for (int e = 0; e < mesh_->n_elems(); ++e) {
        if (dir[std::size_t(e)] == 0.0) continue;
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        D d[8], out[8];
        for (int a = 0; a < 4; ++a) {
            d[2 * a] = D{state[std::size_t(dof_dx(conn[a]))]};
            d[2 * a + 1] = D{state[std::size_t(dof_dy(conn[a]))]};
        }
        elastic_element(elem_geom(*mesh_, e), d, D::seeded(gamma_[std::size_t(e)], 0),
                        laws_.elasticity, out);
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 2; ++c) {
                const int f = part_.full_to_free[std::size_t(2 * conn[a] + c)];
                if (f >= 0) r[std::size_t(f)] += out[2 * a + c].d[0] * dir[std::size_t(e)];
            }
    }
    return r;
}

std::vector<double> ElasticSystem::design_vjp(const std::vector<double>& state,
                                              const std::vector<double>& lambda) const {
    using D = DualN<1>;
    std::vector<double> out_v(std::size_t(mesh_->n_elems()), 0.0);
    for (int e = 0; e < mesh_->n_elems(); ++e) {
        const auto& conn = mesh_->elem_conn[std::size_t(e)];
        D d[8], out[8];
        for (int a = 0; a < 4; ++a) {
            d[2 * a] = D{state[std::size_t(dof_dx(conn[a]))]};
            d[2 * a + 1] = D{state[std::size_t(dof_dy(conn[a]))]};
        }
        elastic_element(elem_geom(*mesh_, e), d, D::seeded(gamma_[std::size_t(e)], 0),
                        laws_.elasticity, out);
        double acc = 0.0;
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 2; ++c) {
                const int f = part_.full_to_free[std::size_t(2 * conn[a] + c)];
                if (f >= 0) acc += lambda[std::size_t(f)] * out[2 * a + c].d[0];
            }
        out_v[std::size_t(e)] = acc;
    }
    return out_v;
}

FsiResult solve_weak_fsi(FlowSystem& flow, ElasticSystem& elastic, const NewtonConfig& newton,
                         const LinearSolverOptions& lin) {
    FsiResult out;
    auto [fs, frep] = newton_solve(flow, flow.initial_state(), newton, lin);
    out.flow_state = std::move(fs);
    out.flow_report = frep;
    if (!frep.converged) return out;

    out.force = compute_coupling_force(elastic.mesh(), elastic.gamma(), out.flow_state);
    elastic.set_load(out.force);

    std::vector<double> d0(std::size_t(elastic.n_state()), 0.0);
    elastic.partition().impose(d0);
    auto [ds, erep] = newton_solve(elastic, d0, newton, lin);
    out.displacement = std::move(ds);
    out.elastic_report = erep;
    return out;
}

ChtResult solve_cht(FlowSystem& flow, ThermalSystem& thermal, const NewtonConfig& newton,
                    const LinearSolverOptions& lin) {
    ChtResult out;
    auto [fs, frep] = newton_solve(flow, flow.initial_state(), newton, lin);
    out.flow_state = std::move(fs);
    out.flow_report = frep;
    if (!frep.converged) return out;

    thermal.set_velocity(out.flow_state);
    auto [ts, trep] = newton_solve(thermal, thermal.initial_state(), newton, lin);
    out.thermal_state = std::move(ts);
    out.thermal_report = trep;
    return out;
}

ChtSensitivity cht_sensitivity(const FlowSystem& flow, const ThermalSystem& thermal,
                               const ChtResult& result, const ChtObjective& objective,
                               const LinearSolverOptions& lin) {
    const double w = objective.weight;
    if (!(w >= 0.0 && w <= 1.0))
        throw ConfigError("cht_sensitivity: weight must lie in [0, 1]");

    const Mesh& mesh = flow.mesh();
    const FunctionalEval j_f =
        dissipated_power(mesh, flow.laws(), flow.gamma(), result.flow_state);
    const ThermalPowerEval j_t = thermal_power(mesh, objective.outlet_segments, objective.rho_cp,
                                               result.flow_state, result.thermal_state);

    ChtSensitivity out;
    out.j_flow = j_f.value;
    out.j_thermal = j_t.value;
    out.value = weighted_cht_objective(j_f.value, j_t.value, w, objective.norms);

    const double s_f = (1.0 - w) / objective.norms.j_f;
    if (w == 0.0) {
        // Pure flow objective: the thermal block never enters the adjoint.
        FunctionalEval scaled;
        scaled.value = out.value;
        scaled.grad_state = j_f.grad_state;
        for (double& g : scaled.grad_state) g *= s_f;
        scaled.grad_gamma = j_f.grad_gamma;
        for (double& g : scaled.grad_gamma) g *= s_f;
        auto sens = adjoint_gradient(scaled, flow, result.flow_state, result.flow_report, lin);
        out.grad_gamma = std::move(sens.grad_gamma);
        out.linear_solves = sens.linear_solves;
        return out;
    }

    const double s_t = -w / objective.norms.j_t;
    FunctionalEval combined;
    combined.value = out.value;
    combined.grad_state = j_t.grad_thermal;
    for (double& g : combined.grad_state) g *= s_t;
    std::vector<double> grad_up = j_t.grad_flow;
    for (double& g : grad_up) g *= s_t;
    if (w < 1.0) {
        combined.grad_gamma = j_f.grad_gamma;
        for (double& g : combined.grad_gamma) g *= s_f;
        for (std::size_t i = 0; i < grad_up.size(); ++i) grad_up[i] += s_f * j_f.grad_state[i];
    }

    auto cross = [&](const std::vector<double>& lambda) {
        return thermal.velocity_vjp(result.thermal_state, lambda);
    };
    auto sens = coupled_adjoint(combined, grad_up, flow, result.flow_state, result.flow_report,
                                thermal, result.thermal_state, result.thermal_report, cross, lin);
    out.grad_gamma = std::move(sens.grad_gamma);
    out.linear_solves = sens.linear_solves;
    return out;
}

}  // namespace ftop
