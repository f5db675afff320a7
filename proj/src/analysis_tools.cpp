#include "thinlayer/analysis_tools.hpp"

#include "thinlayer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace thinlayer {

std::string_view to_string(InequalityId id) {
    switch (id) {
        case InequalityId::KornNormalTrace: return "korn_normal_trace";
        case InequalityId::PoincareHn: return "poincare_Hn";
        case InequalityId::TraceScaled: return "trace_scaled";
    }
    return "?";
}

namespace {

SpMat reduce(const SpMat& T, const SpMat& A) { return SpMat(SpMat(T.transpose()) * A * T); }

ConstantEstimate smallest_constant(InequalityId id, DiscretizationPtr disc, const SpMat& A) {
    const SpMat& T = disc->space.T;
    const SpMat M = velocity_mass_matrix(*disc);
    const EigenPairs ep = smallest_eigenpairs(reduce(T, A), reduce(T, M), 1, 1.0);
    ConstantEstimate est;
    est.id = id;
    est.disc = disc;
    est.h = disc->mesh->h;
    est.eigenvalue = std::max(0.0, ep.values[0]);
    est.value = est.eigenvalue > kKernelEigenvalue ? 1.0 / std::sqrt(est.eigenvalue)
                                                   : std::numeric_limits<double>::infinity();
    est.field = T * ep.vectors.col(0);
    return est;
}

bool is_strict_inside(double v, double lo, double hi) { return v > lo + 1e-9 && v < hi - 1e-9; }

}  // namespace

ConstantEstimate estimate_korn_constant(std::shared_ptr<const Mesh> mesh, KornConstraint constraint) {
    ConstraintSet cs;
    cs.normal_zero = {BoundaryTag::GammaD};
    cs.periodic = constraint == KornConstraint::PeriodicNormalZero;
    auto disc = make_discretization(std::move(mesh), cs, PressureGauge::Ungauged, false);
    // 2 * 0.5 * int D:D
    return smallest_constant(InequalityId::KornNormalTrace, disc,
                             viscous_matrix(*disc, ViscousForm::SymmetricGradient, 0.5));
}

ConstantEstimate estimate_poincare_constant(std::shared_ptr<const Mesh> mesh, bool normal_zero) {
    ConstraintSet cs;
    if (normal_zero) cs.normal_zero = {BoundaryTag::GammaD};
    auto disc = make_discretization(std::move(mesh), cs, PressureGauge::Ungauged, false);
    const SpMat A = viscous_matrix(*disc, ViscousForm::FullGradient, 1.0) +
                    boundary_normal_mass_matrix(*disc, {BoundaryTag::GammaD});
    return smallest_constant(InequalityId::PoincareHn, disc, A);
}

ConstantEstimate estimate_trace_constant(std::shared_ptr<const Mesh> mesh, const std::vector<BoundaryTag>& tags) {
    ConstraintSet cs;
    cs.periodic = false;
    const double eps = mesh->eps;
    auto disc = make_discretization(std::move(mesh), cs, PressureGauge::Ungauged, false);
    const SpMat P = eps * boundary_mass_matrix(*disc, tags);
    const SpMat Q = velocity_mass_matrix(*disc) + eps * eps * viscous_matrix(*disc, ViscousForm::FullGradient, 1.0);
    const EigenPairs ep = largest_eigenpairs(P, Q, 1);
    ConstantEstimate est;
    est.id = InequalityId::TraceScaled;
    est.disc = disc;
    est.h = disc->mesh->h;
    est.eigenvalue = std::max(0.0, ep.values[0]);
    est.value = std::sqrt(est.eigenvalue);
    est.field = ep.vectors.col(0);
    return est;
}

double cosine_to_constant(const ConstantEstimate& est, int axis) {
    const SpMat M = velocity_mass_matrix(*est.disc);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(est.field.size());
    for (Eigen::Index i = axis; i < e.size(); i += 2) e[i] = 1.0;
    const double num = est.field.dot(M * e);
    return std::abs(num) / std::sqrt(est.field.dot(M * est.field) * e.dot(M * e));
}

BogovskiiSolver::BogovskiiSolver(std::shared_ptr<const Mesh> mesh) {
    ConstraintSet cs;
    cs.periodic = false;
    cs.strong_zero = {BoundaryTag::GammaD, BoundaryTag::SNPlus, BoundaryTag::SNMinus, BoundaryTag::LateralPeriodic,
                      BoundaryTag::GammaN};
    disc_ = make_discretization(std::move(mesh), cs, PressureGauge::ZeroMean);
    StokesProblemData data;
    data.form = ViscousForm::FullGradient;
    data.slip_tags.clear();
    data.traction_tags.clear();
    solver_ = std::make_shared<const StokesSolver>(assemble(disc_, data));
    weights_ = pressure_mass_matrix(*disc_) * Eigen::VectorXd::Ones(disc_->pressure_size());
}

BogovskiiResult BogovskiiSolver::solve(const ScalarFn& f) const {
    const Mesh& mesh = *disc_->mesh;
    Eigen::VectorXd moments = Eigen::VectorXd::Zero(disc_->pressure_size());
    double abs_int = 0, sq = 0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const ElementMap em(mesh, t);
        for (int q = 0; q < TriangleQuadrature::size; ++q) {
            const Vec3& l = TriangleQuadrature::points()[q];
            const double w = em.area * TriangleQuadrature::weights()[q];
            const double v = f ? f(em.point(l)) : 0.0;
            for (int i = 0; i < 3; ++i) moments[mesh.triangles[t][i]] += w * l[i] * v;
            abs_int += w * std::abs(v);
            sq += w * v * v;
        }
    }
    const double mean = moments.sum();
    if (std::abs(mean) > 1e-10 * std::max(abs_int, 1e-300) && std::abs(mean) > 1e-300) {
        throw Error(ErrorKind::MeanNotZero, "source integral " + std::to_string(mean) + " is not zero");
    }
    return solve_moments(moments, std::sqrt(sq));
}

BogovskiiResult BogovskiiSolver::solve_moments(const Eigen::VectorXd& moments, double f_norm) const {
    BogovskiiResult r;
    r.f_norm = f_norm;
    const Eigen::VectorXd G = -moments;
    r.field = solver_->solve(Eigen::VectorXd::Zero(disc_->velocity_size()), G);
    const Eigen::VectorXd Bu = solver_->system().B * r.field.u;
    const double scale = std::max(G.norm(), 1e-300);
    r.divergence_residual = G.norm() == 0 ? (Bu).norm() : (Bu - G).norm() / scale;
    if (r.divergence_residual > 1e-8 && G.norm() > 0) {
        throw Error(ErrorKind::BogovskiiFailure,
                    "divergence equation not satisfied (relative residual " + std::to_string(r.divergence_residual) + ")");
    }
    r.grad_norm = h1_seminorm_velocity(r.field);
    return r;
}

BogovskiiResult discrete_bogovskii(std::shared_ptr<const Mesh> mesh, const ScalarFn& f) {
    return BogovskiiSolver(std::move(mesh)).solve(f);
}

LayerVelocity random_polynomial_field(Rng& rng, double eps, int degree) {
    struct Term {
        int i, j;
        Vec2 c;
    };
    std::vector<Term> terms;
    for (int i = 0; i <= degree; ++i)
        for (int j = 0; i + j <= degree; ++j) {
            const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
            terms.push_back({i, j, Vec2(a, b)});
        }
    auto poly = [terms](double x, double s, Vec2& P, Vec2& Px, Vec2& Ps) {
        P.setZero();
        Px.setZero();
        Ps.setZero();
        for (const auto& t : terms) {
            const double xi = std::pow(x, t.i), sj = std::pow(s, t.j);
            P += xi * sj * t.c;
            if (t.i > 0) Px += t.i * std::pow(x, t.i - 1) * sj * t.c;
            if (t.j > 0) Ps += t.j * xi * std::pow(s, t.j - 1) * t.c;
        }
    };
    LayerVelocity v;
    v.value = [poly, eps](const Vec2& x) {
        const double s = x.y() / eps;
        Vec2 P, Px, Ps;
        poly(x.x(), s, P, Px, Ps);
        return Vec2((1 - s * s) * P);
    };
    v.gradient = [poly, eps](const Vec2& x) {
        const double s = x.y() / eps;
        Vec2 P, Px, Ps;
        poly(x.x(), s, P, Px, Ps);
        Mat2 g;
        g.col(0) = (1 - s * s) * Px;
        g.col(1) = (-2 * s * P + (1 - s * s) * Ps) / eps;
        return g;
    };
    return v;
}

std::array<double, 4> RestrictionSetup::invariant_defects() const {
    const Mesh& mesh = *cell_mesh;
    const P2Layout& layout = bogovskii->discretization()->layout;
    std::array<double, 4> d{0, 0, 0, 0};
    std::array<double, 2> flux{0, 0};
    for (std::size_t k = 0; k < mesh.boundary_edges.size(); ++k) {
        const auto& be = mesh.boundary_edges[k];
        const std::array<int, 3> nodes{be.v[0], be.v[1], layout.boundary_edge_node[k]};
        if (be.tag == BoundaryTag::GammaD) {
            for (int f = 0; f < 2; ++f)
                for (int a : nodes) d[0] = std::max(d[0], std::abs(phi[f][a]));
        }
        if (be.tag == BoundaryTag::LateralPeriodic) {
            const int other = 1 - be.face;
            for (int a : nodes) d[1] = std::max(d[1], std::abs(phi[other][a]));
            const double len = (mesh.vertices[be.v[1]] - mesh.vertices[be.v[0]]).norm();
            for (int q = 0; q < EdgeQuadrature::size; ++q) {
                const auto s = p2_edge_values(EdgeQuadrature::points()[q]);
                double v = 0;
                for (int a = 0; a < 3; ++a) v += s[a] * phi[be.face][nodes[a]];
                flux[be.face] += len * EdgeQuadrature::weights()[q] * v;
            }
        }
    }
    d[2] = std::max(std::abs(flux[0] - 1), std::abs(flux[1] - 1));
    for (int a = 0; a < layout.num_nodes(); ++a) {
        const int b = layout.node_partner[a];
        if (b < 0) continue;
        const bool a_left = layout.node_coords[a].x() < 0.5;
        const int left = a_left ? a : b, right = a_left ? b : a;
        d[3] = std::max(d[3], std::abs(phi[0][left] - phi[1][right]));
    }
    return d;
}

RestrictionSetup make_restriction_setup(const CellGeometry& geom, double h) {
    RestrictionSetup s;
    s.cell_mesh = std::make_shared<const Mesh>(build_cell_mesh(geom, h));
    s.bogovskii = std::make_shared<const BogovskiiSolver>(s.cell_mesh);
    const Mesh& mesh = *s.cell_mesh;
    s.fluid_area = mesh.area();

    double lo = -1.0, hi = 1.0;
    if (const auto* slabs = std::get_if<Slabs>(&geom.solid)) {
        lo = -1.0 + slabs->delta;
        hi = 1.0 - slabs->delta;
    }
    double gap = 1.0;
    for (const auto& be : mesh.boundary_edges) {
        if (be.tag != BoundaryTag::GammaD) continue;
        for (int v : be.v) {
            const Vec2& y = mesh.vertices[v];
            if (is_strict_inside(y.y(), lo, hi)) gap = std::min({gap, y.x(), 1.0 - y.x()});
        }
    }
    s.strip_width = std::min(0.45, 0.9 * gap);
    if (!(s.strip_width > 0)) throw Error(ErrorKind::BogovskiiFailure, "no fluid strip along the lateral faces");
    const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo), d = s.strip_width;
    auto bump = [&](const Vec2& y, int face) {
        const double t = (y.y() - c) / r;
        if (std::abs(t) >= 1) return 0.0;
        const double dist = face == 0 ? y.x() : 1.0 - y.x();
        if (dist >= d) return 0.0;
        const double z = dist / d;
        return (1 - t * t) * (1 - t * t) * (1 - z) * (1 - z) * (1 + 2 * z);
    };
    const P2Layout& layout = s.bogovskii->discretization()->layout;
    for (int f = 0; f < 2; ++f) {
        s.phi[f].resize(layout.num_nodes());
        for (int a = 0; a < layout.num_nodes(); ++a) s.phi[f][a] = bump(layout.node_coords[a], f);
    }
    std::array<double, 2> flux{0, 0};
    for (std::size_t k = 0; k < mesh.boundary_edges.size(); ++k) {
        const auto& be = mesh.boundary_edges[k];
        if (be.tag != BoundaryTag::LateralPeriodic) continue;
        const std::array<int, 3> nodes{be.v[0], be.v[1], layout.boundary_edge_node[k]};
        const double len = (mesh.vertices[be.v[1]] - mesh.vertices[be.v[0]]).norm();
        for (int q = 0; q < EdgeQuadrature::size; ++q) {
            const auto sh = p2_edge_values(EdgeQuadrature::points()[q]);
            double v = 0;
            for (int a = 0; a < 3; ++a) v += sh[a] * s.phi[be.face][nodes[a]];
            flux[be.face] += len * EdgeQuadrature::weights()[q] * v;
        }
    }
    for (int f = 0; f < 2; ++f) s.phi[f] /= flux[f];
    return s;
}

namespace {

// Composite 3-point Gauss on [a, b] with `panels` panels.
template <class Fn>
void gauss_line(double a, double b, int panels, Fn&& fn) {
    const double len = (b - a) / panels;
    for (int p = 0; p < panels; ++p)
        for (int q = 0; q < EdgeQuadrature::size; ++q)
            fn(a + len * (p + EdgeQuadrature::points()[q]), len * EdgeQuadrature::weights()[q]);
}

}  // namespace

RestrictedField build_restriction(const RestrictionSetup& setup, const LayerVelocity& v, double eps, double L1) {
    const double cells_real = L1 / eps;
    const int cells = static_cast<int>(std::lround(cells_real));
    if (cells < 1 || std::abs(cells - cells_real) > 1e-9) {
        throw Error(ErrorKind::MeshingFailed, "L1 / eps must be a positive integer");
    }
    double vmax = 0, edge = 0;
    for (int i = 0; i <= 64; ++i) {
        const double x1 = L1 * i / 64.0;
        vmax = std::max(vmax, v.value(Vec2(x1, 0.0)).norm());
        edge = std::max({edge, v.value(Vec2(x1, eps)).norm(), v.value(Vec2(x1, -eps)).norm()});
    }
    if (edge > 1e-12 * std::max(vmax, 1.0)) {
        throw Error(ErrorKind::BogovskiiFailure, "the field must vanish on the top and bottom of the layer");
    }

    const Mesh& mesh = *setup.cell_mesh;
    const auto& disc = setup.bogovskii->discretization();
    const P2Layout& layout = disc->layout;
    const SpMat B = divergence_matrix(*disc);
    RestrictedField out;
    out.eps = eps;
    double l2 = 0, g2 = 0;
    for (int k = 0; k < cells; ++k) {
        auto to_x = [&](const Vec2& y) { return Vec2(eps * (y.x() + k), eps * y.y()); };
        auto div_y = [&](const Vec2& y) { return eps * v.gradient(to_x(y)).trace(); };

        double f0 = 0, f1 = 0;
        gauss_line(-1.0, 1.0, 8, [&](double y2, double w) {
            f0 -= w * v.value(to_x(Vec2(0.0, y2))).x();
            f1 += w * v.value(to_x(Vec2(1.0, y2))).x();
        });
        Eigen::VectorXd moments = Eigen::VectorXd::Zero(disc->pressure_size());
        double fluid_div = 0;
        for (int t = 0; t < mesh.num_triangles(); ++t) {
            const ElementMap em(mesh, t);
            for (int q = 0; q < TriangleQuadrature::size; ++q) {
                const Vec3& l = TriangleQuadrature::points()[q];
                const double w = em.area * TriangleQuadrature::weights()[q];
                const double dv = div_y(em.point(l));
                fluid_div += w * dv;
                for (int i = 0; i < 3; ++i) moments[mesh.triangles[t][i]] += w * l[i] * dv;
            }
        }
        const double shift = (f0 + f1 - fluid_div) / setup.fluid_area;
        const Eigen::VectorXd weights = pressure_mass_matrix(*disc) * Eigen::VectorXd::Ones(disc->pressure_size());
        moments += shift * weights;  // int (div v + shift) psi

        // Flux field on the faces; face 0 has outward normal -e1.
        Eigen::VectorXd vhat = Eigen::VectorXd::Zero(disc->velocity_size());
        for (int a = 0; a < layout.num_nodes(); ++a) vhat[2 * a] = -f0 * setup.phi[0][a] + f1 * setup.phi[1][a];
        const Eigen::VectorXd div_vhat = -(B * vhat);  // int div(vhat) psi
        const Eigen::VectorXd rhs = moments - div_vhat;

        double f_sq = 0;
        for (int t = 0; t < mesh.num_triangles(); ++t) {
            const ElementMap em(mesh, t);
            for (int q = 0; q < TriangleQuadrature::size; ++q) {
                const Vec3& l = TriangleQuadrature::points()[q];
                const double w = em.area * TriangleQuadrature::weights()[q];
                const double fv = div_y(em.point(l)) + shift - eval_velocity_gradient(layout, em, vhat, t, l).trace();
                f_sq += w * fv * fv;
            }
        }
        const BogovskiiResult bog = setup.bogovskii->solve_moments(rhs, std::sqrt(f_sq));
        Eigen::VectorXd rv = vhat + bog.field.u;

        const Eigen::VectorXd div_rv = -(B * rv);
        const double scale = std::max(moments.norm() + div_vhat.norm(), 1e-300);
        out.divergence_residual = std::max(out.divergence_residual, (div_rv - moments).norm() / scale);

        StokesField rf;
        rf.disc = disc;
        rf.u = rv;
        l2 += eps * eps * std::pow(l2_norm_velocity(rf), 2);
        g2 += grad_inner(rf, rf);
        out.cell_velocity.push_back(std::move(rv));
    }
    out.l2 = std::sqrt(l2);
    out.grad_l2 = std::sqrt(g2);

    double s2 = 0;
    gauss_line(0.0, L1, 4 * cells, [&](double x1, double w1) {
        gauss_line(-eps, eps, 8, [&](double x2, double w2) {
            s2 += w1 * w2 * v.gradient(Vec2(x1, x2)).squaredNorm();
        });
    });
    out.source_grad_l2 = std::sqrt(s2);
    return out;
}

RestrictionNormEntry restriction_norm_entry(const RestrictionSetup& setup, double eps,
                                            const std::vector<LayerVelocity>& fields, double L1) {
    RestrictionNormEntry entry;
    entry.eps = eps;
    for (const auto& v : fields) {
        const RestrictedField r = build_restriction(setup, v, eps, L1);
        if (!(r.source_grad_l2 > 0)) continue;
        entry.ratios.push_back(r.ratio());
        entry.max_ratio = std::max(entry.max_ratio, r.ratio());
        entry.max_divergence_residual = std::max(entry.max_divergence_residual, r.divergence_residual);
    }
    return entry;
}

std::vector<RestrictionNormEntry> restriction_norm_sweep(const RestrictionSetup& setup, const std::vector<double>& eps,
                                                         int fields, std::uint64_t seed, double L1) {
    std::vector<RestrictionNormEntry> out;
    for (double e : eps) {
        Rng rng(seed);
        std::vector<LayerVelocity> vs;
        for (int i = 0; i < fields; ++i) vs.push_back(random_polynomial_field(rng, e));
        out.push_back(restriction_norm_entry(setup, e, vs, L1));
    }
    return out;
}

}  // namespace thinlayer
