#include "ftop/mma.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ftop/errors.hpp"

namespace ftop {

namespace {

constexpr double kAsyInit = 0.5;
constexpr double kAsyIncr = 1.2;
constexpr double kAsyDecr = 0.7;
constexpr double kAlbefa = 0.1;
constexpr double kRaa0 = 1e-5;
constexpr double kSlackPenalty = 1000.0;  // elastic constraint price
constexpr double kDualTol = 1e-9;

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw ConfigError(std::string("mma_step: non-finite ") + what);
}

// Primal minimizer of the separable subproblem for fixed multipliers.
std::vector<double> primal_of_dual(const MmaApprox& a, const std::vector<double>& lambda) {
    const std::size_t n = a.p0.size();
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) {
        double p = a.p0[j], q = a.q0[j];
        for (std::size_t i = 0; i < lambda.size(); ++i) {
            p += lambda[i] * a.pc[i][j];
            q += lambda[i] * a.qc[i][j];
        }
        const double sp = std::sqrt(p), sq = std::sqrt(q);
        const double xj = (sp * a.low[j] + sq * a.upp[j]) / (sp + sq);
        x[j] = std::clamp(xj, a.alfa[j], a.beta[j]);
    }
    return x;
}

// Gradient of the dual function in one multiplier: the modeled constraint
// value at the current primal minimizer, minus the elastic slack.
double dual_slope(const MmaApprox& a, const std::vector<double>& x,
                  const std::vector<double>& lambda, std::size_t i) {
    double g = -a.b[i];
    for (std::size_t j = 0; j < x.size(); ++j)
        g += a.pc[i][j] / (a.upp[j] - x[j]) + a.qc[i][j] / (x[j] - a.low[j]);
    const double y = std::max(0.0, lambda[i] - kSlackPenalty);
    return g - y;
}

}  // namespace

MmaState mma_init(std::vector<double> x0) {
    if (x0.empty()) throw ConfigError("mma_init: empty design vector");
    for (double v : x0)
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError("mma_init: design variables must start inside [0, 1]");
    MmaState s;
    s.x = std::move(x0);
    s.x_prev = s.x;
    s.x_prev2 = s.x;
    s.low.resize(s.x.size());
    s.upp.resize(s.x.size());
    for (std::size_t j = 0; j < s.x.size(); ++j) {
        s.low[j] = s.x[j] - kAsyInit;
        s.upp[j] = s.x[j] + kAsyInit;
    }
    return s;
}

MmaApprox mma_build_approximation(const MmaState& state, double obj_value,
                                  const std::vector<double>& obj_grad,
                                  const std::vector<double>& cons_values,
                                  const std::vector<std::vector<double>>& cons_grads) {
    const std::size_t n = state.x.size();
    if (obj_grad.size() != n) throw ConfigError("mma: objective gradient size mismatch");
    if (cons_values.size() != cons_grads.size())
        throw ConfigError("mma: constraint value/gradient count mismatch");
    for (const auto& g : cons_grads)
        if (g.size() != n) throw ConfigError("mma: constraint gradient size mismatch");

    const std::size_t m = cons_values.size();
    MmaApprox a;
    a.low = state.low;
    a.upp = state.upp;
    a.alfa.resize(n);
    a.beta.resize(n);
    a.p0.resize(n);
    a.q0.resize(n);
    a.pc.assign(m, std::vector<double>(n, 0.0));
    a.qc.assign(m, std::vector<double>(n, 0.0));
    a.b.assign(m, 0.0);

    a.r0 = obj_value;
    for (std::size_t i = 0; i < m; ++i) a.b[i] = -cons_values[i];
    for (std::size_t j = 0; j < n; ++j) {
        const double xj = state.x[j];
        a.alfa[j] = std::max({0.0, a.low[j] + kAlbefa * (xj - a.low[j]), xj - state.move_limit});
        a.beta[j] = std::min({1.0, a.upp[j] - kAlbefa * (a.upp[j] - xj), xj + state.move_limit});

        const double ux1 = a.upp[j] - xj, xl1 = xj - a.low[j];
        const double ux2 = ux1 * ux1, xl2 = xl1 * xl1;

        const double dplus = std::max(obj_grad[j], 0.0), dminus = std::max(-obj_grad[j], 0.0);
        const double reg = 0.001 * (dplus + dminus) + kRaa0;
        a.p0[j] = (dplus + reg) * ux2;
        a.q0[j] = (dminus + reg) * xl2;
        a.r0 -= a.p0[j] / ux1 + a.q0[j] / xl1;

        for (std::size_t i = 0; i < m; ++i) {
            const double cplus = std::max(cons_grads[i][j], 0.0);
            const double cminus = std::max(-cons_grads[i][j], 0.0);
            const double creg = 0.001 * (cplus + cminus) + kRaa0;
            a.pc[i][j] = (cplus + creg) * ux2;
            a.qc[i][j] = (cminus + creg) * xl2;
            a.b[i] += a.pc[i][j] / ux1 + a.qc[i][j] / xl1;
        }
    }
    return a;
}

std::vector<double> mma_step(MmaState& state, double obj_value,
                             const std::vector<double>& obj_grad,
                             const std::vector<double>& cons_values,
                             const std::vector<std::vector<double>>& cons_grads) {
    const std::size_t n = state.x.size();
    check_finite(obj_grad, "objective gradient");
    check_finite(cons_values, "constraint value");
    for (const auto& g : cons_grads) check_finite(g, "constraint gradient");
    if (!std::isfinite(obj_value)) throw ConfigError("mma_step: non-finite objective");

    state.outer_iter += 1;
    if (state.outer_iter <= 2) {
        for (std::size_t j = 0; j < n; ++j) {
            state.low[j] = state.x[j] - kAsyInit;
            state.upp[j] = state.x[j] + kAsyInit;
        }
    } else {
        for (std::size_t j = 0; j < n; ++j) {
            const double trend =
                (state.x[j] - state.x_prev[j]) * (state.x_prev[j] - state.x_prev2[j]);
            const double factor = trend > 0.0 ? kAsyIncr : (trend < 0.0 ? kAsyDecr : 1.0);
            double low = state.x[j] - factor * (state.x_prev[j] - state.low[j]);
            double upp = state.x[j] + factor * (state.upp[j] - state.x_prev[j]);
            // Keep the asymptotes a sane distance from the iterate.
            low = std::max(low, state.x[j] - 10.0);
            low = std::min(low, state.x[j] - 0.01);
            upp = std::min(upp, state.x[j] + 10.0);
            upp = std::max(upp, state.x[j] + 0.01);
            state.low[j] = low;
            state.upp[j] = upp;
        }
    }

    const MmaApprox a =
        mma_build_approximation(state, obj_value, obj_grad, cons_values, cons_grads);
    const std::size_t m = cons_values.size();

    std::vector<double> lambda(m, 0.0);
    std::vector<double> x = primal_of_dual(a, lambda);
    if (m > 0) {
        // Cyclic per-multiplier bisection on the concave dual; each scalar
        // slope is monotone in its own multiplier.
        for (int sweep = 0; sweep < 100; ++sweep) {
            double shift = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double before = lambda[i];
                lambda[i] = 0.0;
                x = primal_of_dual(a, lambda);
                if (dual_slope(a, x, lambda, i) > 0.0) {
                    double lo = 0.0, hi = std::max(1.0, 2.0 * before);
                    lambda[i] = hi;
                    x = primal_of_dual(a, lambda);
                    while (dual_slope(a, x, lambda, i) > 0.0 && hi < 1e12) {
                        hi *= 2.0;
                        lambda[i] = hi;
                        x = primal_of_dual(a, lambda);
                    }
                    while (hi - lo > kDualTol * std::max(1.0, hi)) {
                        const double mid = 0.5 * (lo + hi);
                        lambda[i] = mid;
                        x = primal_of_dual(a, lambda);
                        (dual_slope(a, x, lambda, i) > 0.0 ? lo : hi) = mid;
                    }
                    lambda[i] = 0.5 * (lo + hi);
                }
                shift = std::max(shift, std::fabs(lambda[i] - before));
            }
            if (shift <= kDualTol * 10.0) break;
        }
        x = primal_of_dual(a, lambda);
    }

    state.feasibility_restored = false;
    for (double li : lambda)
        if (li > kSlackPenalty) state.feasibility_restored = true;

    state.x_prev2 = std::move(state.x_prev);
    state.x_prev = std::move(state.x);
    state.x = x;
    return state.x;
}

std::vector<double> adam_step(AdamState& state, const std::vector<double>& params,
                              const std::vector<double>& grad) {
    if (grad.size() != params.size()) throw ConfigError("adam_step: gradient size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size())
        throw ConfigError("adam_step: moment accumulators sized for a different vector");

    for (double g : grad)
        if (!std::isfinite(g)) {
            state.last_step_rejected = true;
            return params;
        }
    state.last_step_rejected = false;

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, state.step);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step);
    std::vector<double> out(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) {
        state.m[j] = state.beta1 * state.m[j] + (1.0 - state.beta1) * grad[j];
        state.v[j] = state.beta2 * state.v[j] + (1.0 - state.beta2) * grad[j] * grad[j];
        const double mh = state.m[j] / bc1;
        const double vh = state.v[j] / bc2;
        out[j] = params[j] - state.learning_rate * mh / (std::sqrt(vh) + state.epsilon);
    }
    return out;
}

}  // namespace ftop
