#include "thinlayer/errors.hpp"
#include "thinlayer/macro_darcy.hpp"

#include <doctest.h>

#include <cmath>

using namespace thinlayer;

namespace {

EffectiveLaw scalar_law(double k) {
    EffectiveLaw law;
    law.regime.alpha = 1.0;
    law.regime.gamma = -2.0;
    law.regime.gamma_class = GammaClass::BelowMinusOne;
    law.K_avg = Mat2::Identity() * k;
    law.K_sym = law.K_avg / 2;
    return law;
}

CellGeometry slabs() {
    CellGeometry g;
    g.solid = Slabs{0.25, std::nullopt};
    return g;
}

double max_nodal(const DarcySolution& s, auto&& fn) {
    double m = 0;
    for (double x : s.mesh.x) m = std::max(m, std::abs(fn(x)));
    return m;
}

}  // namespace

TEST_SUITE("darcy") {

TEST_CASE("linear boundary pressure gives a linear p0 and constant flux") {
    const double k = 0.37, mu = 2.0;
    MacroData d;
    d.mu = mu;
    d.p_b = [](double x) { return x; };
    const DarcySolution s = solve_darcy(scalar_law(k), d, SigmaMesh::uniform(1.0, 10));
    CHECK(max_nodal(s, [&](double x) { return s.p0_at(x) - x; }) <= 1e-12);
    CHECK(max_nodal(s, [&](double x) { return s.u_bar(x).x() + k / mu; }) <= 1e-12);
}

TEST_CASE("constant force without pressure data") {
    const double k = 0.5;
    MacroData d;
    d.f0 = [](double) { return Vec2(1, 0); };
    const DarcySolution s = solve_darcy(scalar_law(k), d, SigmaMesh::uniform(1.0, 8));
    CHECK(s.p0.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(max_nodal(s, [&](double x) { return s.u_bar(x).x() - k; }) <= 1e-12);
}

TEST_CASE("Poiseuille law flux") {
    const EffectiveLaw law = compute_effective_law(slabs(), 1.0 / 16, 1.0, -2.0);
    MacroData d;
    d.p_b = [](double x) { return x; };
    const DarcySolution s = solve_darcy(law, d, SigmaMesh::uniform(1.0, 16));
    CHECK(std::abs(s.u_bar(0.5).x()) == doctest::Approx(0.28125).epsilon(1e-2));
}

TEST_CASE("degenerate tensor is rejected") {
    MacroData d;
    try {
        solve_darcy(scalar_law(0.0), d, SigmaMesh::uniform(1.0, 4));
        FAIL("expected DegenerateTensor");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateTensor);
    }
}

TEST_CASE("two-scale reconstruction") {
    auto mesh = std::make_shared<const Mesh>(build_cell_mesh(slabs(), 0.125));
    const auto regime = RegimeDescriptor::classify(1.0, -2.0, *mesh);
    const CellSolutionSet cells = solve_cell_problems(mesh, regime);
    const EffectiveLaw law = assemble_effective_law(cells);
    const int probe = mesh->num_triangles() / 2;
    const Vec3 bary(0.2, 0.3, 0.5);

    SUBCASE("force balanced by the pressure gradient gives u0 = 0") {
        MacroData d;
        d.f0 = [](double) { return Vec2(1, 0); };
        d.p_b = [](double x) { return x; };
        const auto rec = reconstruct_two_scale(solve_darcy(law, d, SigmaMesh::uniform(1.0, 8)), cells);
        for (double x : {0.1, 0.5, 0.9}) CHECK(rec.u0_coefficients(x).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("linearity in the force") {
        MacroData d1, d2;
        d1.f0 = [](double x) { return Vec2(1 + x, 0); };
        d2.f0 = [](double x) { return Vec2(2 + 2 * x, 0); };
        const auto r1 = reconstruct_two_scale(solve_darcy(law, d1, SigmaMesh::uniform(1.0, 8)), cells);
        const auto r2 = reconstruct_two_scale(solve_darcy(law, d2, SigmaMesh::uniform(1.0, 8)), cells);
        for (double x : {0.2, 0.7}) CHECK((r2.u0(x, probe, bary) - 2 * r1.u0(x, probe, bary)).norm() <= 1e-12);
    }
    SUBCASE("S_N empty: no vertical mean velocity") {
        MacroData d;
        d.f0 = [](double) { return Vec2(1, 0.5); };
        const DarcySolution s = solve_darcy(law, d, SigmaMesh::uniform(1.0, 8));
        for (double x : {0.25, 0.75}) CHECK(std::abs(s.u_bar(x).y()) <= 1e-10);
    }
}

TEST_CASE("two-pressure weak form") {
    auto mesh = std::make_shared<const Mesh>(build_cell_mesh(slabs(), 0.125));
    const auto regime = RegimeDescriptor::classify(1.0, -2.0, *mesh);
    const CellSolutionSet cells = solve_cell_problems(mesh, regime);
    MacroData d;
    d.mu = 1.5;
    d.f0 = [](double) { return Vec2(1, 0); };
    d.p_b = [](double x) { return 1 - x; };
    const DarcySolution s = solve_darcy(assemble_effective_law(cells), d, SigmaMesh::uniform(1.0, 8));
    const TwoScaleReconstruction rec(s, cells);
    const double c1 = s.coefficients(0.5)[0] / d.mu;

    TwoScaleTestField zero{[](double) { return 0.0; }, [](double) { return 0.0; },
                           Eigen::VectorXd::Zero(cells.w[0].u.size())};
    TwoScaleTestField self{[c1](double) { return c1; }, [](double) { return 0.0; }, cells.w[0].u};
    const auto r = verify_two_pressure_residual(rec, {zero, self});
    CHECK(r.residual[0] == 0.0);
    CHECK(r.relative[1] <= 1e-8);
    // w_1 is divergence free in y and its amplitude is constant in x
    CHECK(std::abs(r.p1_term[1]) <= 1e-10);
    CHECK(std::abs(r.p0_term[1]) <= 1e-12);
    CHECK(r.darcy_constraint <= 1e-10);
}

}
