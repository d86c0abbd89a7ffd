#include "ftop/flow.hpp"

#include <cmath>
#include <string>

#include "ftop/errors.hpp"

namespace ftop {

FlowSystem::FlowSystem(const Mesh& mesh, const BCTable& table, InterpolationLaws laws,
                       FluidConstants constants, FlowOptions options)
    : mesh_(&mesh), laws_(std::move(laws)), constants_(constants), options_(std::move(options)) {
    const DofBC bc = apply_bcs(mesh, table);

    std::vector<std::pair<int, double>> fixed;
    for (const auto& nb : bc.fixed[int(FieldComp::ux)]) fixed.emplace_back(dof_ux(nb.node), nb.value);
    for (const auto& nb : bc.fixed[int(FieldComp::uy)]) fixed.emplace_back(dof_uy(nb.node), nb.value);
    const auto& p_bcs = bc.fixed[int(FieldComp::p)];
    for (const auto& nb : p_bcs) fixed.emplace_back(dof_p(nb.node), nb.value);
    if (p_bcs.empty() && !options_.pressure_pin) options_.pressure_pin = {0, 0.0};
    if (options_.pressure_pin)
        fixed.emplace_back(dof_p(options_.pressure_pin->first), options_.pressure_pin->second);

    part_ = DofPartition::build(3 * mesh.n_nodes(), fixed);

    gamma_.assign(std::size_t(mesh.n_elems()), 0.0);
    for (int e = 0; e < mesh.n_elems(); ++e)
        if (mesh.solid_mask[e]) gamma_[e] = 1.0;
}

void FlowSystem::set_gamma(std::vector<double> gamma) {
    if (int(gamma.size()) != mesh_->n_elems())
        throw ConfigError("flow: gamma length does not match element count");
    gamma_ = std::move(gamma);
}

FlowElementKernel FlowSystem::element_kernel(int e) const {
    FlowElementKernel k;
    k.hx = mesh_->hx;
    k.hy = mesh_->hy;
    const int ix = e % mesh_->nx, iy = e / mesh_->nx;
    k.x0 = mesh_->origin.x + ix * mesh_->hx;
    k.y0 = mesh_->origin.y + iy * mesh_->hy;
    k.rho = constants_.rho;
    k.convection_scale = constants_.convection_scale;
    k.stab_beta = options_.stab_beta;
    k.ramp = laws_.brinkman;
    k.carreau = laws_.carreau;
    k.mu = laws_.mu;
    k.cy = laws_.cy;
    k.body_force = options_.body_force ? &options_.body_force : nullptr;
    return k;
}

std::vector<double> FlowSystem::gather_element_state(const std::vector<double>& state,
                                                     int e) const {
    std::vector<double> local(12);
    const auto& conn = mesh_->elem_conn[e];
    for (int a = 0; a < 4; ++a)
        for (int c = 0; c < 3; ++c) local[3 * a + c] = state[3 * conn[a] + c];
    return local;
}

template <class Fn>
void FlowSystem::for_each_element(Fn&& fn) const {
    const int n = mesh_->n_elems();
    if (options_.parallel) {
#pragma omp parallel for schedule(static)
        for (int e = 0; e < n; ++e) fn(e);
    } else {
        for (int e = 0; e < n; ++e) fn(e);
    }
}

std::vector<double> FlowSystem::residual(const std::vector<double>& state) const {
    const int ne = mesh_->n_elems();
    std::vector<double> buf(std::size_t(ne) * 12);
    for_each_element([&](int e) {
        const FlowElementKernel kernel = element_kernel(e);
        std::vector<double> local = gather_element_state(state, e);
        const double g = gamma_[e];
        kernel(std::span<const double>(local), std::span<const double>(&g, 1),
               std::span<double>(buf.data() + std::size_t(e) * 12, 12));
    });

    std::vector<double> r(std::size_t(part_.n_free()), 0.0);
    for (int e = 0; e < ne; ++e) {
        const auto& conn = mesh_->elem_conn[e];
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 3; ++c) {
                const double v = buf[std::size_t(e) * 12 + 3 * a + c];
                if (!std::isfinite(v))
                    throw SolverError("flow assembly: non-finite residual entry in element " +
                                      std::to_string(e));
                const int free = part_.full_to_free[3 * conn[a] + c];
                if (free >= 0) r[free] += v;
            }
    }
    return r;
}

CsrMatrix FlowSystem::jacobian(const std::vector<double>& state) const {
    const int ne = mesh_->n_elems();
    // 12x12 state block per element, row-major.
    std::vector<double> blocks(std::size_t(ne) * 144);
    for_each_element([&](int e) {
        const FlowElementKernel kernel = element_kernel(e);
        std::vector<double> local = gather_element_state(state, e);
        const double g = gamma_[e];
        KernelGradient kg = element_jacobian<13>(kernel, local, std::span<const double>(&g, 1), 12);
        std::copy(kg.d_state.begin(), kg.d_state.end(), blocks.begin() + std::size_t(e) * 144);
    });

    std::vector<Triplet> ts;
    ts.reserve(std::size_t(ne) * 144);
    for (int e = 0; e < ne; ++e) {
        const auto& conn = mesh_->elem_conn[e];
        int dofs[12];
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 3; ++c) dofs[3 * a + c] = part_.full_to_free[3 * conn[a] + c];
        const double* block = blocks.data() + std::size_t(e) * 144;
        for (int i = 0; i < 12; ++i) {
            if (dofs[i] < 0) continue;
            for (int j = 0; j < 12; ++j) {
                if (dofs[j] < 0) continue;
                const double v = block[12 * i + j];
                if (!std::isfinite(v))
                    throw SolverError("flow assembly: non-finite Jacobian entry in element " +
                                      std::to_string(e));
                ts.push_back({dofs[i], dofs[j], v});
            }
        }
    }
    return CsrMatrix::from_triplets(part_.n_free(), part_.n_free(), std::move(ts));
}

std::vector<double> FlowSystem::design_jvp(const std::vector<double>& state,
                                           const std::vector<double>& dir) const {
    if (dir.size() != gamma_.size()) throw ConfigError("flow design_jvp: direction length mismatch");
    const int ne = mesh_->n_elems();
    std::vector<double> buf(std::size_t(ne) * 12, 0.0);
    for_each_element([&](int e) {
        if (dir[e] == 0.0) return;
        const FlowElementKernel kernel = element_kernel(e);
        std::vector<DualN<1>> local(12);
        const auto& conn = mesh_->elem_conn[e];
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 3; ++c) local[3 * a + c] = state[3 * conn[a] + c];
        DualN<1> g = DualN<1>::seeded(gamma_[e], 0);
        std::vector<DualN<1>> out(12);
        kernel(std::span<const DualN<1>>(local), std::span<const DualN<1>>(&g, 1),
               std::span<DualN<1>>(out));
        for (int i = 0; i < 12; ++i) buf[std::size_t(e) * 12 + i] = out[i].d[0] * dir[e];
    });

    std::vector<double> r(std::size_t(part_.n_free()), 0.0);
    for (int e = 0; e < ne; ++e) {
        if (dir[e] == 0.0) continue;
        const auto& conn = mesh_->elem_conn[e];
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 3; ++c) {
                const int free = part_.full_to_free[3 * conn[a] + c];
                if (free >= 0) r[free] += buf[std::size_t(e) * 12 + 3 * a + c];
            }
    }
    return r;
}

std::vector<double> FlowSystem::design_vjp(const std::vector<double>& state,
                                           const std::vector<double>& lambda) const {
    const int ne = mesh_->n_elems();
    std::vector<double> out(std::size_t(ne), 0.0);
    for_each_element([&](int e) {
        const FlowElementKernel kernel = element_kernel(e);
        std::vector<DualN<1>> local(12);
        const auto& conn = mesh_->elem_conn[e];
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 3; ++c) local[3 * a + c] = state[3 * conn[a] + c];
        DualN<1> g = DualN<1>::seeded(gamma_[e], 0);
        std::vector<DualN<1>> col(12);
        kernel(std::span<const DualN<1>>(local), std::span<const DualN<1>>(&g, 1),
               std::span<DualN<1>>(col));
        double s = 0.0;
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 3; ++c) {
                const int free = part_.full_to_free[3 * conn[a] + c];
                if (free >= 0) s += lambda[free] * col[3 * a + c].d[0];
            }
        out[e] = s;
    });
    return out;
}

std::vector<double> FlowSystem::initial_state() const {
    std::vector<double> s(std::size_t(n_state()), 0.0);
    part_.impose(s);
    return s;
}

}  // namespace ftop
