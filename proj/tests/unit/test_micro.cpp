#include "thinlayer/errors.hpp"
#include "thinlayer/micro_verify.hpp"

#include <doctest.h>

#include <cmath>
#include <array>
#include <numbers>

using namespace thinlayer;

namespace {

CellGeometry slabs() {
    CellGeometry g;
    g.solid = Slabs{0.25, std::nullopt};
    return g;
}

LayerGeometry layer_of(const CellGeometry& cell, double eps) {
    LayerGeometry l;
    l.cell = cell;
    l.eps = eps;
    return l;
}

}  // namespace

TEST_SUITE("micro") {

TEST_CASE("unfolding") {
    const Vec2 y = unfold_point(Vec2(0.3, -0.05), 0.25);
    CHECK(y.x() == doctest::Approx(0.2));
    CHECK(y.y() == doctest::Approx(-0.2));
    CHECK(unfold_point(Vec2(0.5, 0.0), 0.25).x() == doctest::Approx(0.0));
}

TEST_CASE("zero data gives the zero solution") {
    MicroData d;
    d.eps = 0.5;
    const StokesField u = solve_micro(layer_of(CellGeometry{}, 0.5), d, 0.25);
    CHECK(u.u.cwiseAbs().maxCoeff() == 0.0);
    CHECK(u.p.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hydrostatic pressure and its extension") {
    const double c = 0.75;
    MicroData d;
    d.eps = 0.5;
    d.p_b = [c](const Vec2&) { return c; };
    const StokesField u = solve_micro(layer_of(CellGeometry{}, 0.5), d, 0.25);
    CHECK(u.u.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((u.p.array() - c).abs().maxCoeff() <= 1e-12);

    // p - p_b = c with p_b = 0
    const ExtendedPressure P = extend_pressure(u, nullptr);
    for (double a : P.cell_average) CHECK(a == doctest::Approx(c).epsilon(1e-12));
    CHECK(P.l2 == doctest::Approx(c * std::sqrt(2 * 0.5 * 1.0)).epsilon(1e-12));
    CHECK(P.solid_cell_area == doctest::Approx(std::numbers::pi * 0.125 * 0.125).epsilon(5e-2));
}

TEST_CASE("solid cell value is the fluid average") {
    MicroData d;
    d.eps = 0.5;
    d.f = [](const Vec2& x) { return Vec2(1 + x.x(), 0); };
    const StokesField u = solve_micro(layer_of(CellGeometry{}, 0.5), d, 0.25);
    const ExtendedPressure P = extend_pressure(u, nullptr);
    const Mesh& m = u.mesh();
    std::vector<double> sum(m.cell_count, 0.0), area(m.cell_count, 0.0);
    for (int t = 0; t < m.num_triangles(); ++t) {
        const ElementMap em(m, t);
        for (int q = 0; q < TriangleQuadrature::size; ++q) {
            const double w = em.area * TriangleQuadrature::weights()[q];
            sum[m.element_cell[t]] += w * u.pressure(t, TriangleQuadrature::points()[q]);
            area[m.element_cell[t]] += w;
        }
    }
    for (int k = 0; k < m.cell_count; ++k) CHECK(std::abs(P.cell_average[k] - sum[k] / area[k]) <= 1e-12);
}

TEST_CASE("interpolated limit field has small two-scale error") {
    const double eps = 0.25, h = 0.125;
    auto cell = std::make_shared<const Mesh>(build_cell_mesh(slabs(), h));
    const auto regime = RegimeDescriptor::classify(1.0, -2.0, *cell);
    const CellSolutionSet cells = solve_cell_problems(cell, regime);
    MacroData macro;
    macro.f0 = [](double) { return Vec2(1, 0); };
    macro.p_b = [](double x) { return std::sin(std::numbers::pi * x); };
    const TwoScaleReconstruction rec(solve_darcy(assemble_effective_law(cells), macro, SigmaMesh::uniform(1.0, 64)),
                                     cells);

    auto layer = std::make_shared<const Mesh>(build_layer_mesh(layer_of(slabs(), eps), h));
    ConstraintSet cs;
    cs.periodic = false;
    StokesField f;
    f.disc = make_discretization(layer, cs, PressureGauge::Ungauged);
    f.u = Eigen::VectorXd::Zero(f.disc->velocity_size());
    f.p = Eigen::VectorXd::Zero(f.disc->pressure_size());
    const std::array<Vec3, 6> node_bary{Vec3(1, 0, 0), Vec3(0, 1, 0),     Vec3(0, 0, 1),
                                        Vec3(.5, .5, 0), Vec3(0, .5, .5), Vec3(.5, 0, .5)};
    for (int t = 0; t < layer->num_triangles(); ++t) {
        for (int a = 0; a < 6; ++a) {
            const int n = f.disc->layout.element_nodes[t][a];
            const double x1 = f.disc->layout.node_coords[n].x();
            const Vec2 v = eps * eps * rec.u0(x1, layer->element_reference[t], node_bary[a]);
            f.u.segment<2>(2 * n) = v;
        }
    }
    const TwoScaleError e = two_scale_error(f, rec);
    CHECK(e.unfolded_measure == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(e.velocity <= 0.05 * e.velocity_reference);
}

TEST_CASE("small sweep on the slab layer") {
    SweepSetup s;
    s.cell = slabs();
    s.h_cell = 0.125;
    s.eps = {0.25, 0.125};
    s.alpha = 1.0;
    s.gamma = -2.0;
    s.macro.f0 = [](double) { return Vec2(1, 0); };
    s.macro.p_b = [](double x) { return 1 - x; };
    s.sigma_elements = 16;
    s.jobs = 2;
    const SweepReport r = run_sweep(s);
    REQUIRE(r.entries.size() == 2);
    CHECK(r.velocity_error_decreasing());
    CHECK(r.entries[1].trace_scaled < r.entries[0].trace_scaled);
    for (const auto& e : r.entries) {
        CHECK(e.energy_defect <= 1e-10);
        CHECK(e.error.unfolded_measure == doctest::Approx(1.5 * e.eps).epsilon(1e-12));
    }
    s.eps = {0.125, 0.25};
    CHECK_THROWS_AS(run_sweep(s), Error);
}

TEST_CASE("disk layer with pure slip has a nonzero field") {
    MicroData d;
    d.eps = 0.25;
    d.f = [](const Vec2&) { return Vec2(1, 0); };
    const StokesField u = solve_micro(layer_of(CellGeometry{}, 0.25), d, 0.125);
    const double ratio = l2_norm_velocity(u) / std::pow(0.25, 2.5);
    CHECK(ratio > 0.01);
    CHECK(std::isfinite(ratio));
}

}
