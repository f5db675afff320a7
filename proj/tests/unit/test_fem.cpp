#include "thinlayer/cell_problems.hpp"
#include "thinlayer/errors.hpp"
#include "thinlayer/micro_verify.hpp"

#include <doctest.h>

#include <array>
#include <set>
#include <cmath>

using namespace thinlayer;

namespace {

// Quadratic polynomial in (x, y): c[a][b] multiplies x^a y^b.
struct Poly {
    double c[3][3] = {};
    Poly dx() const {
        Poly r;
        for (int a = 1; a < 3; ++a)
            for (int b = 0; a + b < 3; ++b) r.c[a - 1][b] += a * c[a][b];
        return r;
    }
    Poly dy() const {
        Poly r;
        for (int a = 0; a < 3; ++a)
            for (int b = 1; a + b < 3; ++b) r.c[a][b - 1] += b * c[a][b];
        return r;
    }
};

double fact(int n) { return n <= 1 ? 1.0 : n * fact(n - 1); }

// Integral over the reference triangle of p * q, both of degree <= 1.
double integrate_product(const Poly& p, const Poly& q) {
    double s = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; a + b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                for (int d = 0; c + d < 2; ++d) {
                    const int i = a + c, j = b + d;
                    s += p.c[a][b] * q.c[c][d] * fact(i) * fact(j) / fact(i + j + 2);
                }
    return s;
}

// P2 basis on (0,0), (1,0), (0,1): vertices then midpoints of (0,1), (1,2), (2,0).
std::array<Poly, 6> reference_basis() {
    std::array<Poly, 6> p;
    // l0 = 1 - x - y, l1 = x, l2 = y
    p[0].c[0][0] = 1; p[0].c[1][0] = -3; p[0].c[0][1] = -3; p[0].c[2][0] = 2; p[0].c[1][1] = 4; p[0].c[0][2] = 2;
    p[1].c[1][0] = -1; p[1].c[2][0] = 2;
    p[2].c[0][1] = -1; p[2].c[0][2] = 2;
    p[3].c[1][0] = 4; p[3].c[2][0] = -4; p[3].c[1][1] = -4;  // 4 l0 l1
    p[4].c[1][1] = 4;                                          // 4 l1 l2
    p[5].c[0][1] = 4; p[5].c[0][2] = -4; p[5].c[1][1] = -4;  // 4 l2 l0
    return p;
}

std::shared_ptr<const Mesh> reference_triangle() {
    auto m = std::make_shared<Mesh>();
    m->vertices = {{0, 0}, {1, 0}, {0, 1}};
    m->triangles = {{0, 1, 2}};
    m->boundary_edges = {{{0, 1}, BoundaryTag::GammaN, -1}, {{1, 2}, BoundaryTag::GammaN, -1},
                         {{2, 0}, BoundaryTag::GammaN, -1}};
    m->periodic_partner = {-1, -1, -1};
    m->h = 1;
    return m;
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::ComputeFailed;
}

CellGeometry slabs() {
    CellGeometry g;
    g.solid = Slabs{0.25, std::nullopt};
    return g;
}

}  // namespace

TEST_SUITE("fem") {

TEST_CASE("P2 symmetric-gradient stiffness matches exact integration") {
    const double mu = 0.7;
    ConstraintSet cs;
    cs.periodic = false;
    auto disc = make_discretization(reference_triangle(), cs, PressureGauge::Ungauged);
    const Eigen::MatrixXd K = Eigen::MatrixXd(viscous_matrix(*disc, ViscousForm::SymmetricGradient, mu));

    const auto basis = reference_basis();
    const std::array<Vec2, 6> where{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1), Vec2(0.5, 0), Vec2(0.5, 0.5), Vec2(0, 0.5)};
    std::array<int, 6> node{};
    for (int a = 0; a < 6; ++a)
        for (int n = 0; n < disc->layout.num_nodes(); ++n)
            if ((disc->layout.node_coords[n] - where[a]).norm() < 1e-14) node[a] = n;

    double worst = 0;
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) {
            const Poly ga[2] = {basis[a].dx(), basis[a].dy()}, gb[2] = {basis[b].dx(), basis[b].dy()};
            for (int c = 0; c < 2; ++c)
                for (int d = 0; d < 2; ++d) {
                    // 2 mu int D(phi_a e_c) : D(phi_b e_d)
                    double v = mu * integrate_product(ga[d], gb[c]);
                    if (c == d) v += mu * (integrate_product(ga[0], gb[0]) + integrate_product(ga[1], gb[1]));
                    worst = std::max(worst, std::abs(K(2 * node[a] + c, 2 * node[b] + d) - v));
                }
        }
    CHECK(worst <= 1e-12);
}

TEST_CASE("zero data gives a zero right side") {
    auto mesh = std::make_shared<const Mesh>(build_cell_mesh(CellGeometry{}, 0.125));
    ConstraintSet cs;
    cs.normal_zero = {BoundaryTag::GammaD};
    const SaddleSystem sys = assemble(make_discretization(mesh, cs, PressureGauge::Ungauged), StokesProblemData{});
    CHECK(sys.rhs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("strong zero on Gamma_D removes two unknowns per node") {
    auto mesh = std::make_shared<const Mesh>(build_cell_mesh(slabs(), 0.125));
    ConstraintSet free, fixed;
    free.periodic = fixed.periodic = false;
    fixed.strong_zero = {BoundaryTag::GammaD};
    auto d0 = make_discretization(mesh, free, PressureGauge::Ungauged);
    auto d1 = make_discretization(mesh, fixed, PressureGauge::Ungauged);
    std::set<int> nodes;
    for (std::size_t k = 0; k < mesh->boundary_edges.size(); ++k) {
        const auto& e = mesh->boundary_edges[k];
        if (e.tag != BoundaryTag::GammaD) continue;
        nodes.insert(e.v[0]);
        nodes.insert(e.v[1]);
        nodes.insert(d0->layout.boundary_edge_node[k]);
    }
    CHECK(d0->space.T.cols() - d1->space.T.cols() == 2 * static_cast<long>(nodes.size()));
}

TEST_CASE("pure slip slab cell is singular with a translation kernel") {
    auto mesh = std::make_shared<const Mesh>(build_cell_mesh(slabs(), 0.125));
    const auto regime = RegimeDescriptor::classify(0.0, 0.0, *mesh);
    try {
        solve_unit_force_cell(mesh, regime, 0);
        FAIL("expected SingularSystem");
    } catch (const SingularSystemError& e) {
        CHECK(e.kind() == ErrorKind::SingularSystem);
        REQUIRE(e.has_near_null_vector());
        auto disc = make_cell_discretization(mesh, regime);
        // the near-null vector is expanded to [u_full; p_full]
        const Eigen::VectorXd u = e.near_null_vector().head(disc->velocity_size());
        const SpMat M = velocity_mass_matrix(*disc);
        Eigen::VectorXd e1 = Eigen::VectorXd::Zero(u.size());
        for (Eigen::Index i = 0; i < u.size(); i += 2) e1[i] = 1;
        const double cosine = std::abs(u.dot(M * e1)) / std::sqrt(u.dot(M * u) * e1.dot(M * e1));
        CHECK(cosine > 0.99);
    }
}

TEST_CASE("disk cell with pure slip converges") {
    auto mesh = std::make_shared<const Mesh>(build_cell_mesh(CellGeometry{}, 0.125));
    const StokesField w = solve_unit_force_cell(mesh, RegimeDescriptor::classify(0.0, 0.0, *mesh), 0);
    CHECK(w.residual <= 1e-10);
}

TEST_CASE("ungauged pressure without traction boundary is singular") {
    auto mesh = std::make_shared<const Mesh>(build_cell_mesh(slabs(), 0.125));
    ConstraintSet cs;
    cs.strong_zero = {BoundaryTag::GammaD};
    StokesProblemData data;
    data.f = [](const Vec2&) { return Vec2(1, 0); };
    auto disc = make_discretization(mesh, cs, PressureGauge::Ungauged);
    CHECK(kind_of([&] { solve(assemble(disc, data)); }) == ErrorKind::SingularSystem);
}

TEST_CASE("cell solution energy equals its mean velocity") {
    auto mesh = std::make_shared<const Mesh>(build_cell_mesh(CellGeometry{}, 0.125));
    const auto regime = RegimeDescriptor::classify(0.0, 0.0, *mesh);
    const StokesField w = solve_unit_force_cell(mesh, regime, 0);
    StokesProblemData data = cell_problem_data(regime);
    data.f = [](const Vec2&) { return Vec2(1, 0); };
    const EnergyReport e = energy(w, data);
    CHECK(e.viscous == doctest::Approx(integrate_velocity(w).x()).epsilon(1e-10));
    CHECK(e.balance_defect() < 1e-10);
}

TEST_CASE("strong trace in the micro problem has no slip work") {
    MicroData d;
    d.eps = 0.25;
    d.alpha = 1.0;
    d.gamma = -2.0;
    d.trace_mode = MicroTraceMode::StrongZero;
    d.f = [](const Vec2&) { return Vec2(1, 0); };
    d.p_b = [](const Vec2& x) { return 1 - x.x(); };
    LayerGeometry layer;
    layer.cell = slabs();
    layer.eps = 0.25;
    const StokesField u = solve_micro(layer, d, 0.125);
    const EnergyReport e = energy(u, micro_problem_data(d));
    CHECK(e.slip == 0.0);
    CHECK(boundary_l2_norm_velocity(u, BoundaryTag::GammaD) == 0.0);
}

TEST_CASE("discrete inf-sup constant is positive on the disk cell") {
    auto mesh = std::make_shared<const Mesh>(build_cell_mesh(CellGeometry{}, 0.125));
    ConstraintSet cs;
    cs.normal_zero = {BoundaryTag::GammaD};
    CHECK(estimate_inf_sup(make_discretization(mesh, cs, PressureGauge::ZeroMean)) > 0.05);
}

}
