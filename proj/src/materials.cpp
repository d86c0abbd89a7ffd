#include "ftop/materials.hpp"

#include <cmath>

namespace ftop {

DensityFilter::DensityFilter(const Mesh& mesh, double radius) {
    n_ = mesh.n_elems();
    design_ = mesh.design_mask;
    if (radius < mesh.hx) return;  // identity map
    active_ = true;

    const int wx = int(std::floor(radius / mesh.hx));
    const int wy = int(std::floor(radius / mesh.hy));
    row_start_.assign(std::size_t(n_) + 1, 0);

    std::vector<int> cols;
    std::vector<double> w;
    for (int e = 0; e < n_; ++e) {
        row_start_[e] = int(cols.size());
        if (!design_[e]) continue;  // identity row, stored empty
        const int ix = e % mesh.nx, iy = e / mesh.nx;
        const Vec2 c = mesh.elem_centroid(e);
        double total = 0.0;
        const std::size_t first = cols.size();
        for (int jy = std::max(0, iy - wy); jy <= std::min(mesh.ny - 1, iy + wy); ++jy)
            for (int jx = std::max(0, ix - wx); jx <= std::min(mesh.nx - 1, ix + wx); ++jx) {
                const int j = mesh.elem_id(jx, jy);
                const Vec2 cj = mesh.elem_centroid(j);
                const double d = std::hypot(cj.x - c.x, cj.y - c.y);
                const double wij = 1.0 - d / radius;
                if (wij <= 0.0) continue;
                cols.push_back(j);
                w.push_back(wij);
                total += wij;
            }
        for (std::size_t k = first; k < w.size(); ++k) w[k] /= total;
    }
    row_start_[n_] = int(cols.size());
    cols_ = std::move(cols);
    weights_ = std::move(w);
}

std::vector<double> DensityFilter::apply(const std::vector<double>& gamma) const {
    if (!active_) return gamma;
    std::vector<double> out(gamma);
    for (int e = 0; e < n_; ++e) {
        if (!design_[e]) continue;
        double s = 0.0;
        for (int k = row_start_[e]; k < row_start_[e + 1]; ++k) s += weights_[k] * gamma[cols_[k]];
        out[e] = s;
    }
    return out;
}

std::vector<double> DensityFilter::apply_transpose(const std::vector<double>& grad) const {
    if (!active_) return grad;
    std::vector<double> out(grad.size(), 0.0);
    for (int e = 0; e < n_; ++e) {
        if (!design_[e]) continue;
        for (int k = row_start_[e]; k < row_start_[e + 1]; ++k)
            out[cols_[k]] += weights_[k] * grad[e];
    }
    return out;
}

}  // namespace ftop
