#include "thinlayer/analysis_tools.hpp"
#include "thinlayer/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace thinlayer;

namespace {

CellGeometry slabs() {
    CellGeometry g;
    g.solid = Slabs{0.25, std::nullopt};
    return g;
}

std::shared_ptr<const Mesh> mesh_of(const CellGeometry& g, double h) {
    return std::make_shared<const Mesh>(build_cell_mesh(g, h));
}

LayerVelocity scaled(const LayerVelocity& v, double a) {
    return {[=](const Vec2& x) { return Vec2(a * v.value(x)); }, [=](const Vec2& x) { return Mat2(a * v.gradient(x)); }};
}

LayerVelocity combine(const LayerVelocity& v, double a, const LayerVelocity& w, double b) {
    return {[=](const Vec2& x) { return Vec2(a * v.value(x) + b * w.value(x)); },
            [=](const Vec2& x) { return Mat2(a * v.gradient(x) + b * w.gradient(x)); }};
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("Korn constant") {
    SUBCASE("slab cell: translation kernel") {
        const auto est = estimate_korn_constant(mesh_of(slabs(), 0.125), KornConstraint::PeriodicNormalZero);
        CHECK(est.eigenvalue <= 1e-8);
        CHECK(std::isinf(est.value));
        CHECK(cosine_to_constant(est, 0) > 0.999);
    }
    SUBCASE("disk cell: bounded below") {
        const auto a = estimate_korn_constant(mesh_of(CellGeometry{}, 0.125), KornConstraint::PeriodicNormalZero);
        const auto b = estimate_korn_constant(mesh_of(CellGeometry{}, 0.0625), KornConstraint::PeriodicNormalZero);
        CHECK(a.eigenvalue > 0.5);
        CHECK(std::abs(a.eigenvalue - b.eigenvalue) < 0.2 * b.eigenvalue);
        // the extremal field is a genuine (nonzero) field
        CHECK(a.field.norm() > 0);
    }
}

TEST_CASE("Poincare constant") {
    SUBCASE("slab cell: zero with constant e1") {
        const auto est = estimate_poincare_constant(mesh_of(slabs(), 0.125));
        CHECK(est.eigenvalue <= 1e-8);
        CHECK(cosine_to_constant(est, 0) > 0.999);
    }
    SUBCASE("disk cell: subspace restriction raises the eigenvalue") {
        auto m = mesh_of(CellGeometry{}, 0.125);
        const auto free = estimate_poincare_constant(m);
        const auto constrained = estimate_poincare_constant(m, true);
        CHECK(free.eigenvalue > 0.1);
        CHECK(constrained.eigenvalue >= free.eigenvalue * (1 - 1e-10));
    }
}

TEST_CASE("trace constant is finite on the disk cell") {
    const auto est = estimate_trace_constant(mesh_of(CellGeometry{}, 0.125), {BoundaryTag::GammaD});
    CHECK(est.value > 0);
    CHECK(std::isfinite(est.value));
}

TEST_CASE("discrete Bogovskii operator") {
    auto mesh = mesh_of(slabs(), 0.125);
    const BogovskiiSolver solver(mesh);
    SUBCASE("zero source") {
        const auto r = solver.solve([](const Vec2&) { return 0.0; });
        CHECK(r.field.u.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("nonzero mean") {
        try {
            solver.solve([&](const Vec2&) { return 0.1 / mesh->area(); });
            FAIL("expected MeanNotZero");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MeanNotZero);
        }
    }
    SUBCASE("least norm against a feasible field") {
        const auto& disc = solver.discretization();
        Rng rng(5);
        StokesField v;
        v.disc = disc;
        v.u = disc->space.T * rng.vector(disc->space.T.cols());
        const Eigen::VectorXd moments = -(divergence_matrix(*disc) * v.u);
        const auto r = solver.solve_moments(moments, 1.0);
        CHECK(r.divergence_residual <= 1e-10);
        CHECK(r.grad_norm <= h1_seminorm_velocity(v) * (1 + 1e-12));
    }
    SUBCASE("analytic source") {
        // div of y1(1-y1)(a^2-y2^2) e1 with a = 3/4
        const auto r = solver.solve([](const Vec2& y) { return (1 - 2 * y.x()) * (0.5625 - y.y() * y.y()); });
        CHECK(r.divergence_residual <= 1e-10);
        CHECK(r.constant() > 0);
    }
}

TEST_CASE("restriction operator") {
    const RestrictionSetup setup = make_restriction_setup(slabs(), 0.125);
    for (double d : setup.invariant_defects()) CHECK(d <= 1e-10);
    Rng rng(3);
    const double eps = 0.25;
    const LayerVelocity v = random_polynomial_field(rng, eps), w = random_polynomial_field(rng, eps);

    SUBCASE("divergence identity") {
        const RestrictedField r = build_restriction(setup, v, eps);
        CHECK(r.divergence_residual <= 1e-10);
        CHECK(r.cell_velocity.size() == 4);
    }
    SUBCASE("zero field") {
        const LayerVelocity zero = scaled(v, 0.0);
        const RestrictedField r = build_restriction(setup, zero, eps);
        for (const auto& c : r.cell_velocity) CHECK(c.cwiseAbs().maxCoeff() == 0.0);
        const auto entry = restriction_norm_entry(setup, eps, {zero, v});
        CHECK(entry.ratios.size() == 1);
    }
    SUBCASE("homogeneity and linearity") {
        const RestrictedField r1 = build_restriction(setup, v, eps), r2 = build_restriction(setup, scaled(v, 2.0), eps);
        CHECK(std::abs(r2.ratio() - r1.ratio()) <= 1e-12 * r1.ratio());
        const RestrictedField rw = build_restriction(setup, w, eps);
        const RestrictedField rc = build_restriction(setup, combine(v, 0.3, w, -1.7), eps);
        double worst = 0, scale = 0;
        for (std::size_t k = 0; k < rc.cell_velocity.size(); ++k) {
            worst = std::max(worst,
                             (rc.cell_velocity[k] - 0.3 * r1.cell_velocity[k] + 1.7 * rw.cell_velocity[k]).cwiseAbs().maxCoeff());
            scale = std::max(scale, rc.cell_velocity[k].cwiseAbs().maxCoeff());
        }
        CHECK(worst <= 1e-12 * scale);
    }
    SUBCASE("divergence free field in the fluid stays divergence free") {
        // (phi(x2/eps), 0), phi vanishing for |s| >= 3/4
        auto phi = [](double s) { return std::abs(s) < 0.75 ? std::pow(0.5625 - s * s, 2) : 0.0; };
        auto dphi = [](double s) { return std::abs(s) < 0.75 ? -4 * s * (0.5625 - s * s) : 0.0; };
        LayerVelocity u{[=](const Vec2& x) { return Vec2(phi(x.y() / eps), 0.0); },
                        [=](const Vec2& x) {
                            Mat2 g = Mat2::Zero();
                            g(0, 1) = dphi(x.y() / eps) / eps;
                            return g;
                        }};
        const RestrictedField r = build_restriction(setup, u, eps);
        const SpMat B = divergence_matrix(*setup.bogovskii->discretization());
        for (const auto& c : r.cell_velocity) {
            const double scale = std::max(1e-300, c.cwiseAbs().maxCoeff());
            CHECK((B * c).cwiseAbs().maxCoeff() <= 1e-10 * scale);
        }
    }
    SUBCASE("field not vanishing on the layer faces") {
        LayerVelocity bad{[](const Vec2&) { return Vec2(1, 0); }, [](const Vec2&) { return Mat2::Zero().eval(); }};
        CHECK_THROWS_AS(build_restriction(setup, bad, eps), Error);
    }
    SUBCASE("ratio is stable in eps") {
        const auto sweep = restriction_norm_sweep(setup, {0.25, 0.125}, 5, 9);
        REQUIRE(sweep.size() == 2);
        const double lo = std::min(sweep[0].max_ratio, sweep[1].max_ratio);
        const double hi = std::max(sweep[0].max_ratio, sweep[1].max_ratio);
        CHECK(hi < 2 * lo);
    }
}

}
