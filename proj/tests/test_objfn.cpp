#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ftop/errors.hpp"
#include "ftop/objfn.hpp"

using namespace ftop;

namespace {

const char* kUnitSquare = R"({
  "vertices": [[0,0],[1,0],[1,1],[0,1]],
  "segments": [
    {"id":1,"start_vertex":0,"end_vertex":1},
    {"id":2,"start_vertex":1,"end_vertex":2},
    {"id":3,"start_vertex":2,"end_vertex":3},
    {"id":4,"start_vertex":3,"end_vertex":0}
  ]
})";

const char* kChannel4x1 = R"({
  "vertices": [[0,0],[4,0],[4,1],[0,1]],
  "segments": [
    {"id":1,"start_vertex":0,"end_vertex":1},
    {"id":2,"start_vertex":1,"end_vertex":2},
    {"id":3,"start_vertex":2,"end_vertex":3},
    {"id":4,"start_vertex":3,"end_vertex":0}
  ]
})";

Mesh unit_mesh(int n) { return build_mesh(parse_geometry(kUnitSquare), n, n); }

std::vector<double> nodal_flow(const Mesh& mesh,
                               double (*fx)(double, double),
                               double (*fy)(double, double),
                               double (*fp)(double, double)) {
    std::vector<double> s(std::size_t(3 * mesh.n_nodes()), 0.0);
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        const auto c = mesh.node_coords[std::size_t(n)];
        s[std::size_t(3 * n)] = fx(c.x, c.y);
        s[std::size_t(3 * n + 1)] = fy(c.x, c.y);
        s[std::size_t(3 * n + 2)] = fp(c.x, c.y);
    }
    return s;
}

double zero_fn(double, double) { return 0.0; }

}  // namespace

TEST_CASE("dissipated power vanishes for rest and rigid rotation") {
    auto mesh = unit_mesh(6);
    InterpolationLaws laws;
    std::vector<double> gamma(std::size_t(mesh.n_elems()), 0.0);

    std::vector<double> rest(std::size_t(3 * mesh.n_nodes()), 0.0);
    CHECK(dissipated_power(mesh, laws, gamma, rest).value == 0.0);

    auto spin = nodal_flow(
        mesh, [](double, double y) { return -y; }, [](double x, double) { return x; }, zero_fn);
    CHECK(std::fabs(dissipated_power(mesh, laws, gamma, spin).value) <= 1e-12);
}

TEST_CASE("dissipated power is nonnegative on random states") {
    auto mesh = unit_mesh(4);
    InterpolationLaws laws;
    laws.brinkman = {0.0, 1e4, 8.0};
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> s(std::size_t(3 * mesh.n_nodes()));
        std::vector<double> g(std::size_t(mesh.n_elems()));
        for (auto& v : s) v = U(rng);
        for (auto& v : g) v = 0.5 + 0.25 * U(rng) / 2.0;
        CHECK(dissipated_power(mesh, laws, g, s).value >= 0.0);
    }
}

TEST_CASE("dissipated power matches the closed-form Poiseuille integral") {
    // u = U(1 - (2y-1)^2) on a 4x1 channel: Phi = integral mu u'^2 = 64/3.
    auto mesh = build_mesh(parse_geometry(kChannel4x1), 64, 16);
    InterpolationLaws laws;
    std::vector<double> gamma(std::size_t(mesh.n_elems()), 0.0);
    auto state = nodal_flow(
        mesh, [](double, double y) { return 1.0 - (2 * y - 1) * (2 * y - 1); }, zero_fn, zero_fn);
    const double exact = 64.0 / 3.0;
    const double phi = dissipated_power(mesh, laws, gamma, state).value;
    CHECK(std::fabs(phi - exact) / exact <= 0.01);
}

TEST_CASE("point velocity samples nodal and interpolated values") {
    auto mesh = unit_mesh(4);
    auto state = nodal_flow(
        mesh, [](double x, double y) { return x + 2 * y; }, [](double x, double) { return x; },
        zero_fn);

    SUBCASE("probe on a node returns the nodal value exactly") {
        const auto c = mesh.node_coords[std::size_t(mesh.node_id(2, 3))];
        auto ev = point_velocity(mesh, state, c, 0);
        CHECK(ev.value == state[std::size_t(3 * mesh.node_id(2, 3))]);
    }
    SUBCASE("uniform field is reproduced anywhere") {
        auto uni = nodal_flow(
            mesh, zero_fn, [](double, double) { return 0.875; }, zero_fn);
        auto ev = point_velocity(mesh, uni, {0.3137, 0.777}, 1);
        CHECK(ev.value == doctest::Approx(0.875).epsilon(1e-14));
    }
    SUBCASE("linear field at an element center matches the bilinear average") {
        const Vec2 center{0.375, 0.625};
        auto ev = point_velocity(mesh, state, center, 1);
        CHECK(ev.value == doctest::Approx(0.375).epsilon(1e-14));
        double dot = 0.0;
        for (std::size_t i = 0; i < state.size(); ++i) dot += ev.grad_state[i] * state[i];
        CHECK(dot == doctest::Approx(ev.value).epsilon(1e-14));
    }
    SUBCASE("probe outside the domain is rejected") {
        CHECK_THROWS_AS(point_velocity(mesh, state, {1.5, 0.5}, 0), ConfigError);
        CHECK_THROWS_AS(point_velocity(mesh, state, {0.5, -0.2}, 1), ConfigError);
    }
}

TEST_CASE("drag reduces to alpha * U * area for uniform fields") {
    auto mesh = unit_mesh(4);
    InterpolationLaws laws;
    laws.brinkman = {0.0, 1e4, 8.0};

    SUBCASE("empty design carries no drag") {
        std::vector<double> gamma(16, 0.0);
        auto state = nodal_flow(
            mesh, [](double, double) { return 1.3; }, zero_fn, zero_fn);
        CHECK(drag(mesh, laws, gamma, state).value == 0.0);
    }
    SUBCASE("uniform density, uniform velocity") {
        std::vector<double> gamma(16, 0.5);  // alpha = 1e4 * 0.5 / 5 = 1e3
        auto state = nodal_flow(
            mesh, [](double, double) { return 0.7; }, zero_fn, zero_fn);
        CHECK(drag(mesh, laws, gamma, state).value == doctest::Approx(700.0).epsilon(1e-9));
    }
    SUBCASE("drag is odd under flow reversal") {
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        std::vector<double> gamma(16), state(std::size_t(3 * mesh.n_nodes()));
        for (auto& v : gamma) v = 0.5 + 0.4 * U(rng);
        for (auto& v : state) v = U(rng);
        auto flipped = state;
        for (auto& v : flipped) v = -v;
        CHECK(drag(mesh, laws, gamma, state).value ==
              doctest::Approx(-drag(mesh, laws, gamma, flipped).value).epsilon(1e-14));
    }
}

TEST_CASE("compliance is the load-displacement inner product") {
    CHECK(compliance(std::vector<double>{0.0, 0.0}, std::vector<double>{3.0, -1.0}).value == 0.0);
    // Spring k=2 loaded with f=4 deflects d=2.
    CHECK(compliance(std::vector<double>{4.0}, std::vector<double>{2.0}).value == 8.0);
    CHECK_THROWS_AS(compliance(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                    ConfigError);
}

TEST_CASE("thermal power integrates convective flux through segments") {
    auto mesh = unit_mesh(4);
    const double rho_cp = 5.0;

    SUBCASE("zero temperature carries no power") {
        auto flow = nodal_flow(
            mesh, [](double, double) { return 2.0; }, zero_fn, zero_fn);
        std::vector<double> T(std::size_t(mesh.n_nodes()), 0.0);
        CHECK(thermal_power(mesh, {2}, rho_cp, flow, T).value == 0.0);
    }
    SUBCASE("plug flow through the heated outlet") {
        auto flow = nodal_flow(
            mesh, [](double, double) { return 2.0; }, zero_fn, zero_fn);
        std::vector<double> T(std::size_t(mesh.n_nodes()), 3.0);
        auto ev = thermal_power(mesh, {2}, rho_cp, flow, T);
        CHECK(ev.value == doctest::Approx(rho_cp * 2.0 * 1.0 * 3.0).epsilon(1e-12));
    }
    SUBCASE("uniform temperature nets to zero over inlet plus outlet") {
        auto flow = nodal_flow(
            mesh, [](double, double) { return 1.7; }, zero_fn, zero_fn);
        std::vector<double> T(std::size_t(mesh.n_nodes()), 4.2);
        auto ev = thermal_power(mesh, {2, 4}, rho_cp, flow, T);
        CHECK(std::fabs(ev.value) <= 1e-12);
    }
    SUBCASE("unknown segment is rejected") {
        std::vector<double> flow(std::size_t(3 * mesh.n_nodes()), 0.0);
        std::vector<double> T(std::size_t(mesh.n_nodes()), 0.0);
        CHECK_THROWS_AS(thermal_power(mesh, {99}, rho_cp, flow, T), ConfigError);
    }
}

TEST_CASE("volume constraint arithmetic and affinity") {
    auto mesh = unit_mesh(4);

    SUBCASE("boundary of feasibility gives zero in both senses") {
        std::vector<double> gamma(16, 0.67);
        CHECK(volume_constraint(mesh, gamma, 0.67, VolumeSense::lower_bound).value == 0.0);
        CHECK(volume_constraint(mesh, gamma, 0.67, VolumeSense::upper_bound).value == 0.0);
    }
    SUBCASE("full material is feasible for the lower-bound sense") {
        std::vector<double> gamma(16, 1.0);
        const double g = volume_constraint(mesh, gamma, 0.67, VolumeSense::lower_bound).value;
        CHECK(g == doctest::Approx(1.0 - 1.0 / 0.67).epsilon(1e-12));
        CHECK(g < 0.0);
    }
    SUBCASE("empty design violates the lower bound") {
        std::vector<double> gamma(16, 0.0);
        CHECK(volume_constraint(mesh, gamma, 0.4, VolumeSense::lower_bound).value == 1.0);
    }
    SUBCASE("constraint is affine in the densities") {
        std::mt19937 rng(12);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        std::vector<double> g1(16), g2(16), mix(16);
        for (int i = 0; i < 16; ++i) {
            g1[std::size_t(i)] = U(rng);
            g2[std::size_t(i)] = U(rng);
        }
        const double a = 0.3;
        for (int i = 0; i < 16; ++i)
            mix[std::size_t(i)] = a * g1[std::size_t(i)] + (1 - a) * g2[std::size_t(i)];
        for (auto sense : {VolumeSense::lower_bound, VolumeSense::upper_bound}) {
            const double lhs = volume_constraint(mesh, mix, 0.5, sense).value;
            const double rhs = a * volume_constraint(mesh, g1, 0.5, sense).value +
                               (1 - a) * volume_constraint(mesh, g2, 0.5, sense).value;
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
        }
    }
    SUBCASE("gradient is the scaled element volume") {
        std::vector<double> gamma(16, 0.3);
        auto ev = volume_constraint(mesh, gamma, 0.5, VolumeSense::lower_bound);
        for (double gg : ev.grad_gamma)
            CHECK(gg == doctest::Approx(-mesh.elem_volume[0] / 0.5).epsilon(1e-12));
    }
    SUBCASE("design-region reference counts only design elements") {
        const char* with_region = R"({
          "vertices": [[0,0],[1,0],[1,1],[0,1]],
          "segments": [
            {"id":1,"start_vertex":0,"end_vertex":1},
            {"id":2,"start_vertex":1,"end_vertex":2},
            {"id":3,"start_vertex":2,"end_vertex":3},
            {"id":4,"start_vertex":3,"end_vertex":0}
          ],
          "design_region": [[0,0],[0.52,0],[0.52,1],[0,1]]
        })";
        auto m = build_mesh(parse_geometry(with_region), 4, 4);
        std::vector<double> gamma(16, 1.0);
        // Half the columns are design: material = 0.5, reference = 0.5.
        auto ev = volume_constraint(m, gamma, 1.0, VolumeSense::upper_bound,
                                    VolumeReference::design_region);
        CHECK(ev.value == doctest::Approx(0.0).epsilon(1e-12));
        for (int e = 0; e < 16; ++e) {
            if (m.design_mask[std::size_t(e)])
                CHECK(ev.grad_gamma[std::size_t(e)] > 0.0);
            else
                CHECK(ev.grad_gamma[std::size_t(e)] == 0.0);
        }
    }
}

TEST_CASE("dissipation budget constraint") {
    auto mesh = unit_mesh(4);
    InterpolationLaws laws;
    std::vector<double> gamma(16, 0.0);
    auto state = nodal_flow(
        mesh, [](double, double y) { return y * (1 - y); }, zero_fn, zero_fn);
    const double phi0 = dissipated_power(mesh, laws, gamma, state).value;
    REQUIRE(phi0 > 0.0);

    CHECK(dissipation_constraint(mesh, laws, gamma, state, phi0, 1.0).value == 0.0);
    CHECK(dissipation_constraint(mesh, laws, gamma, state, phi0, 5.0).value ==
          doctest::Approx(-4.0 * phi0).epsilon(1e-12));
    CHECK_THROWS_AS(
        dissipation_constraint(mesh, laws, gamma, state, std::nan(""), 5.0), ConfigError);
    CHECK_THROWS_AS(dissipation_constraint(mesh, laws, gamma, state, -1.0, 5.0), ConfigError);
}

TEST_CASE("weighted objective honors the weight and normalizers") {
    ChtNormalizers norms{2.0, 4.0};
    CHECK(weighted_cht_objective(3.0, 7.0, 0.0, norms) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(weighted_cht_objective(3.0, 7.0, 1.0, norms) == doctest::Approx(-1.75).epsilon(1e-14));
    CHECK(weighted_cht_objective(2.0, 4.0, 0.5, norms) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(weighted_cht_objective(1.0, 1.0, 0.5, ChtNormalizers{0.0, 1.0}), ConfigError);
}

TEST_CASE("functional partials match central finite differences") {
    auto mesh = unit_mesh(3);
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> U(-0.8, 0.8);
    std::vector<double> state(std::size_t(3 * mesh.n_nodes()));
    std::vector<double> gamma(std::size_t(mesh.n_elems()));
    for (auto& v : state) v = U(rng);
    for (auto& v : gamma) v = 0.5 + 0.5 * U(rng) / 0.8 * 0.45;

    const double h = 1e-6;
    auto check_fd = [&](auto&& eval) {
        auto base = eval(gamma, state);
        for (std::size_t i = 0; i < state.size(); ++i) {
            auto sp = state, sm = state;
            sp[i] += h;
            sm[i] -= h;
            const double fd = (eval(gamma, sp).value - eval(gamma, sm).value) / (2 * h);
            CHECK(std::fabs(base.grad_state[i] - fd) <= 1e-6 * std::max(1.0, std::fabs(fd)));
        }
        for (std::size_t e = 0; e < gamma.size(); ++e) {
            auto gp = gamma, gm = gamma;
            gp[e] += h;
            gm[e] -= h;
            const double fd = (eval(gp, state).value - eval(gm, state).value) / (2 * h);
            CHECK(std::fabs(base.grad_gamma[e] - fd) <= 1e-6 * std::max(1.0, std::fabs(fd)));
        }
    };

    SUBCASE("dissipated power, constant viscosity") {
        InterpolationLaws laws;
        laws.brinkman = {0.0, 1e2, 8.0};
        check_fd([&](const std::vector<double>& g, const std::vector<double>& s) {
            return dissipated_power(mesh, laws, g, s);
        });
    }
    SUBCASE("dissipated power, shear-thinning viscosity") {
        InterpolationLaws laws;
        laws.brinkman = {0.0, 1e2, 8.0};
        laws.carreau = true;
        check_fd([&](const std::vector<double>& g, const std::vector<double>& s) {
            return dissipated_power(mesh, laws, g, s);
        });
    }
    SUBCASE("drag") {
        InterpolationLaws laws;
        laws.brinkman = {0.0, 1e2, 8.0};
        check_fd([&](const std::vector<double>& g, const std::vector<double>& s) {
            return drag(mesh, laws, g, s);
        });
    }
    SUBCASE("thermal power, both state families") {
        std::vector<double> T(std::size_t(mesh.n_nodes()));
        for (auto& v : T) v = U(rng);
        auto base = thermal_power(mesh, {1, 2, 3, 4}, 2.5, state, T);
        for (std::size_t i = 0; i < state.size(); ++i) {
            auto sp = state, sm = state;
            sp[i] += h;
            sm[i] -= h;
            const double fd = (thermal_power(mesh, {1, 2, 3, 4}, 2.5, sp, T).value -
                               thermal_power(mesh, {1, 2, 3, 4}, 2.5, sm, T).value) /
                              (2 * h);
            CHECK(std::fabs(base.grad_flow[i] - fd) <= 1e-6 * std::max(1.0, std::fabs(fd)));
        }
        for (std::size_t i = 0; i < T.size(); ++i) {
            auto tp = T, tm = T;
            tp[i] += h;
            tm[i] -= h;
            const double fd = (thermal_power(mesh, {1, 2, 3, 4}, 2.5, state, tp).value -
                               thermal_power(mesh, {1, 2, 3, 4}, 2.5, state, tm).value) /
                              (2 * h);
            CHECK(std::fabs(base.grad_thermal[i] - fd) <= 1e-6 * std::max(1.0, std::fabs(fd)));
        }
    }
}
