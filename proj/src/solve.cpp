#include "ftop/solve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "ftop/errors.hpp"

namespace ftop {

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

DofPartition DofPartition::build(int n_full, const std::vector<std::pair<int, double>>& fixed) {
    DofPartition p;
    p.full_to_free.assign(std::size_t(n_full), 0);
    p.fixed_values.assign(std::size_t(n_full), 0.0);
    for (const auto& [dof, val] : fixed) {
        p.full_to_free[dof] = -1;
        p.fixed_values[dof] = val;
    }
    for (int i = 0; i < n_full; ++i) {
        if (p.full_to_free[i] == 0) {
            p.full_to_free[i] = int(p.free_to_full.size());
            p.free_to_full.push_back(i);
        }
    }
    return p;
}

void DofPartition::impose(std::vector<double>& full_state) const {
    for (int i = 0; i < n_full(); ++i)
        if (full_to_free[i] < 0) full_state[i] = fixed_values[i];
}

namespace {

std::vector<double> solve_direct(const CsrMatrix& A, const std::vector<double>& b) {
    using Sp = Eigen::SparseMatrix<double>;
    Sp m(A.rows(), A.cols());
    {
        std::vector<Eigen::Triplet<double>> ts;
        ts.reserve(std::size_t(A.nnz()));
        for (int r = 0; r < A.rows(); ++r)
            for (int k = A.row_start()[r]; k < A.row_start()[r + 1]; ++k)
                ts.emplace_back(r, A.col_index()[k], A.values()[k]);
        m.setFromTriplets(ts.begin(), ts.end());
    }
    m.makeCompressed();
    Eigen::SparseLU<Sp> lu;
    lu.analyzePattern(m);
    lu.factorize(m);
    if (lu.info() != Eigen::Success)
        throw SolverError("linear solve: factorization failed (singular matrix)");
    Eigen::Map<const Eigen::VectorXd> rhs(b.data(), Eigen::Index(b.size()));
    Eigen::VectorXd x = lu.solve(rhs);
    return std::vector<double>(x.data(), x.data() + x.size());
}

// ILU(0): incomplete LU on the existing sparsity pattern, unit-diagonal L.
struct Ilu0 {
    const CsrMatrix* a = nullptr;
    std::vector<double> vals;
    std::vector<int> diag_pos;

    explicit Ilu0(const CsrMatrix& A) : a(&A), vals(A.values()) {
        const int n = A.rows();
        const auto& rs = A.row_start();
        const auto& ci = A.col_index();
        diag_pos.assign(std::size_t(n), -1);
        for (int r = 0; r < n; ++r)
            for (int k = rs[r]; k < rs[r + 1]; ++k)
                if (ci[k] == r) diag_pos[r] = k;
        for (int r = 0; r < n; ++r)
            if (diag_pos[r] < 0) throw SolverError("ilu0: structurally missing diagonal");

        for (int i = 0; i < n; ++i) {
            for (int kp = rs[i]; kp < rs[i + 1]; ++kp) {
                const int k = ci[kp];
                if (k >= i) break;
                const double piv = vals[kp] / vals[diag_pos[k]];
                vals[kp] = piv;
                for (int jp = kp + 1; jp < rs[i + 1]; ++jp) {
                    const int j = ci[jp];
                    // Entry (k, j) within row k's pattern, if present.
                    const int lo = rs[k], hi = rs[k + 1];
                    auto it = std::lower_bound(ci.begin() + lo, ci.begin() + hi, j);
                    if (it != ci.begin() + hi && *it == j)
                        vals[jp] -= piv * vals[it - ci.begin()];
                }
            }
            if (vals[diag_pos[i]] == 0.0) throw SolverError("ilu0: zero pivot");
        }
    }

    std::vector<double> apply(const std::vector<double>& z) const {
        const int n = a->rows();
        const auto& rs = a->row_start();
        const auto& ci = a->col_index();
        std::vector<double> y(z);
        for (int i = 0; i < n; ++i) {
            double s = z[i];
            for (int k = rs[i]; k < rs[i + 1] && ci[k] < i; ++k) s -= vals[k] * y[ci[k]];
            y[i] = s;
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = y[i];
            for (int k = rs[i + 1] - 1; k >= rs[i] && ci[k] > i; --k) s -= vals[k] * y[ci[k]];
            y[i] = s / vals[diag_pos[i]];
        }
        return y;
    }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> solve_bicgstab(const CsrMatrix& A, const std::vector<double>& b,
                                   const LinearSolverOptions& opts) {
    const std::size_t n = b.size();
    const Ilu0 M(A);
    const double bnorm = l2_norm(b);
    if (bnorm == 0.0) return std::vector<double>(n, 0.0);

    std::vector<double> x(n, 0.0), r(b), rhat(b), p(n, 0.0), v(n, 0.0);
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    for (int it = 0; it < opts.max_iter; ++it) {
        const double rho1 = dot(rhat, r);
        if (std::fabs(rho1) < 1e-300) throw SolverError("bicgstab: breakdown (rho)");
        if (it == 0) {
            p = r;
        } else {
            const double beta = (rho1 / rho) * (alpha / omega);
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        const std::vector<double> phat = M.apply(p);
        v = A.matvec(phat);
        alpha = rho1 / dot(rhat, v);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (l2_norm(s) <= opts.tol * bnorm) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * phat[i];
            return x;
        }
        const std::vector<double> shat = M.apply(s);
        const std::vector<double> t = A.matvec(shat);
        const double tt = dot(t, t);
        if (tt == 0.0) throw SolverError("bicgstab: breakdown (t)");
        omega = dot(t, s) / tt;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if (l2_norm(r) <= opts.tol * bnorm) return x;
        if (omega == 0.0) throw SolverError("bicgstab: breakdown (omega)");
        rho = rho1;
    }
    throw SolverError("bicgstab: no convergence within iteration cap");
}

}  // namespace

std::vector<double> linear_solve(const CsrMatrix& A, const std::vector<double>& b,
                                 const LinearSolverOptions& opts) {
    if (A.rows() != int(b.size())) throw SolverError("linear solve: dimension mismatch");
    if (opts.method == LinearSolverOptions::Method::direct) return solve_direct(A, b);
    return solve_bicgstab(A, b, opts);
}

std::pair<std::vector<double>, SolveReport> newton_solve(const ResidualSystem& system,
                                                         std::vector<double> state,
                                                         const NewtonConfig& config,
                                                         const LinearSolverOptions& lin) {
    const DofPartition& part = system.partition();
    part.impose(state);

    SolveReport report;
    std::vector<double> r = system.residual(state);
    double norm = l2_norm(r);
    const double norm0 = norm;
    report.residual_history.push_back(norm);

    int growth_streak = 0;
    const double target = std::max(config.tol_abs, config.tol_rel * norm0);
    while (report.iterations < config.max_iter) {
        if (norm <= target) {
            report.converged = true;
            break;
        }
        CsrMatrix J = system.jacobian(state);
        std::vector<double> dx = linear_solve(J, r, lin);
        ++report.linear_solves;

        // Step scaling: halve on residual growth, at most 4 times.
        double scale = config.damping;
        std::vector<double> trial(state);
        std::vector<double> r_trial;
        double norm_trial = 0.0;
        for (int attempt = 0;; ++attempt) {
            trial = state;
            for (int i = 0; i < part.n_free(); ++i)
                trial[part.free_to_full[i]] -= scale * dx[i];
            r_trial = system.residual(trial);
            norm_trial = l2_norm(r_trial);
            if (norm_trial < norm || attempt >= 4) break;
            scale *= 0.5;
        }
        state = std::move(trial);
        r = std::move(r_trial);
        growth_streak = norm_trial >= norm ? growth_streak + 1 : 0;
        norm = norm_trial;
        report.residual_history.push_back(norm);
        ++report.iterations;
        if (norm <= target) {
            report.converged = true;
            break;
        }
        if (growth_streak >= 3) break;  // divergence: reported, not thrown
    }
    return {std::move(state), std::move(report)};
}

}  // namespace ftop
