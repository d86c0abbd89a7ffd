#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace ftop {

// Forward-mode dual number with a K-wide tangent block. K > 1 propagates
// several directional derivatives through one kernel evaluation.
template <int K>
struct DualN {
    double v = 0.0;
    std::array<double, K> d{};

    DualN() = default;
    DualN(double value) : v(value) {}  // constants carry zero tangent
    DualN(double value, const std::array<double, K>& tangent) : v(value), d(tangent) {}

    static DualN seeded(double value, int lane) {
        DualN x(value);
        x.d[lane] = 1.0;
        return x;
    }
};

using Dual = DualN<1>;

template <int K>
inline DualN<K> operator+(const DualN<K>& a, const DualN<K>& b) {
    DualN<K> r(a.v + b.v);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
}
template <int K>
inline DualN<K> operator+(const DualN<K>& a, double b) {
    DualN<K> r = a;
    r.v += b;
    return r;
}
template <int K>
inline DualN<K> operator+(double a, const DualN<K>& b) { return b + a; }

template <int K>
inline DualN<K> operator-(const DualN<K>& a) {
    DualN<K> r(-a.v);
    for (int i = 0; i < K; ++i) r.d[i] = -a.d[i];
    return r;
}
template <int K>
inline DualN<K> operator-(const DualN<K>& a, const DualN<K>& b) {
    DualN<K> r(a.v - b.v);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
}
template <int K>
inline DualN<K> operator-(const DualN<K>& a, double b) {
    DualN<K> r = a;
    r.v -= b;
    return r;
}
template <int K>
inline DualN<K> operator-(double a, const DualN<K>& b) {
    DualN<K> r(a - b.v);
    for (int i = 0; i < K; ++i) r.d[i] = -b.d[i];
    return r;
}

template <int K>
inline DualN<K> operator*(const DualN<K>& a, const DualN<K>& b) {
    DualN<K> r(a.v * b.v);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
}
template <int K>
inline DualN<K> operator*(const DualN<K>& a, double b) {
    DualN<K> r(a.v * b);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] * b;
    return r;
}
template <int K>
inline DualN<K> operator*(double a, const DualN<K>& b) { return b * a; }

template <int K>
inline DualN<K> operator/(const DualN<K>& a, const DualN<K>& b) {
    const double inv = 1.0 / b.v;
    DualN<K> r(a.v * inv);
    for (int i = 0; i < K; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
    return r;
}
template <int K>
inline DualN<K> operator/(const DualN<K>& a, double b) {
    const double inv = 1.0 / b;
    DualN<K> r(a.v * inv);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] * inv;
    return r;
}
template <int K>
inline DualN<K> operator/(double a, const DualN<K>& b) {
    const double inv = 1.0 / b.v;
    DualN<K> r(a * inv);
    for (int i = 0; i < K; ++i) r.d[i] = -r.v * inv * b.d[i];
    return r;
}

template <int K>
inline DualN<K>& operator+=(DualN<K>& a, const DualN<K>& b) { a = a + b; return a; }
template <int K>
inline DualN<K>& operator-=(DualN<K>& a, const DualN<K>& b) { a = a - b; return a; }
template <int K>
inline DualN<K>& operator*=(DualN<K>& a, const DualN<K>& b) { a = a * b; return a; }

template <int K>
inline bool operator<(const DualN<K>& a, const DualN<K>& b) { return a.v < b.v; }
template <int K>
inline bool operator>(const DualN<K>& a, const DualN<K>& b) { return a.v > b.v; }

template <int K>
inline DualN<K> sqrt(const DualN<K>& a) {
    const double s = std::sqrt(a.v);
    DualN<K> r(s);
    const double g = 0.5 / s;
    for (int i = 0; i < K; ++i) r.d[i] = g * a.d[i];
    return r;
}
template <int K>
inline DualN<K> exp(const DualN<K>& a) {
    const double e = std::exp(a.v);
    DualN<K> r(e);
    for (int i = 0; i < K; ++i) r.d[i] = e * a.d[i];
    return r;
}
template <int K>
inline DualN<K> log(const DualN<K>& a) {
    DualN<K> r(std::log(a.v));
    const double g = 1.0 / a.v;
    for (int i = 0; i < K; ++i) r.d[i] = g * a.d[i];
    return r;
}
template <int K>
inline DualN<K> pow(const DualN<K>& a, double p) {
    DualN<K> r(std::pow(a.v, p));
    const double g = p * std::pow(a.v, p - 1.0);
    for (int i = 0; i < K; ++i) r.d[i] = g * a.d[i];
    return r;
}
template <int K>
inline DualN<K> pow(const DualN<K>& a, const DualN<K>& b) {
    return exp(b * log(a));
}

// Ties take the first argument's tangent (deterministic subgradient).
template <int K>
inline DualN<K> min(const DualN<K>& a, const DualN<K>& b) { return a.v <= b.v ? a : b; }
template <int K>
inline DualN<K> max(const DualN<K>& a, const DualN<K>& b) { return a.v >= b.v ? a : b; }

using std::exp;
using std::log;
using std::max;
using std::min;
using std::pow;
using std::sqrt;

template <int K>
inline double value(const DualN<K>& a) { return a.v; }
inline double value(double a) { return a; }

/// Value and directional derivative of a scalar kernel at `x` along `dir`.
/// The kernel must be callable as f(std::span<const Dual>) -> Dual.
template <class F>
std::pair<double, double> jvp(F&& f, std::span<const double> x, std::span<const double> dir) {
    std::vector<Dual> xs(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i].v = x[i];
        xs[i].d[0] = dir[i];
    }
    Dual out = f(std::span<const Dual>(xs));
    return {out.v, out.d[0]};
}

// Dense local Jacobians of a vector kernel with separate state/design inputs.
struct KernelGradient {
    int m = 0;
    int n_state = 0;
    int n_design = 0;
    std::vector<double> d_state;   // m x n_state, row-major
    std::vector<double> d_design;  // m x n_design, row-major

    double state(int row, int col) const { return d_state[std::size_t(row) * n_state + col]; }
    double design(int row, int col) const { return d_design[std::size_t(row) * n_design + col]; }
};

namespace detail {

// One forward pass over a block of tangent lanes. Columns [col0, col0+lanes)
// index the concatenated (state, design) input vector.
template <int B, class F>
void jacobian_block(F&& kernel, std::span<const double> state, std::span<const double> design,
                    int m, int col0, int lanes, KernelGradient& out) {
    const int ns = int(state.size());
    std::vector<DualN<B>> xs(state.size());
    std::vector<DualN<B>> gs(design.size());
    for (int i = 0; i < ns; ++i) xs[i].v = state[i];
    for (std::size_t i = 0; i < design.size(); ++i) gs[i].v = design[i];
    for (int l = 0; l < lanes; ++l) {
        const int c = col0 + l;
        if (c < ns)
            xs[c].d[l] = 1.0;
        else
            gs[c - ns].d[l] = 1.0;
    }
    std::vector<DualN<B>> r(m);
    kernel(std::span<const DualN<B>>(xs), std::span<const DualN<B>>(gs), std::span<DualN<B>>(r));
    for (int row = 0; row < m; ++row) {
        for (int l = 0; l < lanes; ++l) {
            const int c = col0 + l;
            if (c < ns)
                out.d_state[std::size_t(row) * out.n_state + c] = r[row].d[l];
            else
                out.d_design[std::size_t(row) * out.n_design + (c - ns)] = r[row].d[l];
        }
    }
}

}  // namespace detail

/// Dense m x n_state and m x n_design Jacobians of an element kernel.
/// `kernel` must be callable for any DualN width:
///   kernel(span<const T> state, span<const T> design, span<T> out)
/// `B` is the tangent width of a batched pass; any width yields identical
/// entries, and `batch = false` forces one direction per pass.
template <int B = 8, class F>
KernelGradient element_jacobian(F&& kernel, std::span<const double> state,
                                std::span<const double> design, int m, bool batch = true) {
    KernelGradient out;
    out.m = m;
    out.n_state = int(state.size());
    out.n_design = int(design.size());
    out.d_state.assign(std::size_t(m) * out.n_state, 0.0);
    out.d_design.assign(std::size_t(m) * out.n_design, 0.0);
    const int n = out.n_state + out.n_design;
    if (batch) {
        for (int c0 = 0; c0 < n; c0 += B)
            detail::jacobian_block<B>(kernel, state, design, m, c0, std::min(B, n - c0), out);
    } else {
        for (int c0 = 0; c0 < n; ++c0)
            detail::jacobian_block<1>(kernel, state, design, m, c0, 1, out);
    }
    return out;
}

}  // namespace ftop
