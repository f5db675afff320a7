#include "thinlayer/stokes_fem.hpp"

#include "thinlayer/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

namespace thinlayer {

namespace {

bool in(const std::vector<BoundaryTag>& tags, BoundaryTag t) {
    return std::find(tags.begin(), tags.end(), t) != tags.end();
}

SpMat from_triplets(int rows, int cols, const Triplets& t) {
    SpMat m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

// Calls fn(k, t, x, n, w_len, shape) for every edge quadrature point of the
// boundary edges carrying one of `tags`; shape = P2 values at (start, end, mid).
template <class Fn>
void for_boundary_points(const StokesDiscretization& disc, const std::vector<BoundaryTag>& tags, Fn&& fn) {
    const Mesh& mesh = *disc.mesh;
    for (std::size_t k = 0; k < mesh.boundary_edges.size(); ++k) {
        const auto& be = mesh.boundary_edges[k];
        if (!in(tags, be.tag)) continue;
        const Vec2 a = mesh.vertices[be.v[0]], b = mesh.vertices[be.v[1]];
        const double len = (b - a).norm();
        const Vec2 n = mesh.edge_normal(be);
        const std::array<int, 3> nodes{be.v[0], be.v[1], disc.layout.boundary_edge_node[k]};
        for (int q = 0; q < EdgeQuadrature::size; ++q) {
            const double t = EdgeQuadrature::points()[q];
            fn(nodes, a + t * (b - a), n, len * EdgeQuadrature::weights()[q], p2_edge_values(t));
        }
    }
}

template <class Fn>
void for_element_points(const Mesh& mesh, Fn&& fn) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const ElementMap em(mesh, t);
        for (int q = 0; q < TriangleQuadrature::size; ++q) {
            const Vec3& l = TriangleQuadrature::points()[q];
            fn(t, em, l, em.area * TriangleQuadrature::weights()[q]);
        }
    }
}

}  // namespace

DiscretizationPtr make_discretization(std::shared_ptr<const Mesh> mesh, const ConstraintSet& constraints,
                                      PressureGauge gauge, bool with_pressure) {
    if (!mesh || mesh->num_triangles() == 0) throw Error(ErrorKind::InconsistentMesh, "empty mesh");
    if (constraints.periodic && mesh->periodic_partner.size() != mesh->vertices.size()) {
        throw Error(ErrorKind::InconsistentMesh, "periodic constraints need a periodic pairing");
    }
    auto d = std::make_shared<StokesDiscretization>();
    d->mesh = std::move(mesh);
    d->layout = build_p2_layout(*d->mesh);
    d->constraints = constraints;
    d->space = build_constrained_space(*d->mesh, d->layout, constraints);
    d->gauge = gauge;
    d->with_pressure = with_pressure;
    return d;
}

SpMat viscous_matrix(const StokesDiscretization& disc, ViscousForm form, double mu) {
    Triplets trip;
    trip.reserve(static_cast<std::size_t>(disc.mesh->num_triangles()) * 144);
    for (int t = 0; t < disc.mesh->num_triangles(); ++t) {
        const ElementMap em(*disc.mesh, t);
        Eigen::Matrix<double, 12, 12> Ke = Eigen::Matrix<double, 12, 12>::Zero();
        for (int q = 0; q < TriangleQuadrature::size; ++q) {
            const auto v = p2_values(em, TriangleQuadrature::points()[q]);
            const double w = mu * em.area * TriangleQuadrature::weights()[q];
            for (int a = 0; a < 6; ++a) {
                for (int b = 0; b < 6; ++b) {
                    const double gg = v.grad[a].dot(v.grad[b]);
                    for (int c = 0; c < 2; ++c) {
                        Ke(2 * a + c, 2 * b + c) += w * gg;
                        if (form == ViscousForm::SymmetricGradient) {
                            for (int d = 0; d < 2; ++d) Ke(2 * a + c, 2 * b + d) += w * v.grad[a][d] * v.grad[b][c];
                        }
                    }
                }
            }
        }
        const auto& nodes = disc.layout.element_nodes[t];
        for (int a = 0; a < 6; ++a)
            for (int c = 0; c < 2; ++c)
                for (int b = 0; b < 6; ++b)
                    for (int d = 0; d < 2; ++d)
                        trip.emplace_back(2 * nodes[a] + c, 2 * nodes[b] + d, Ke(2 * a + c, 2 * b + d));
    }
    return from_triplets(disc.velocity_size(), disc.velocity_size(), trip);
}

SpMat velocity_mass_matrix(const StokesDiscretization& disc) {
    Triplets trip;
    for_element_points(*disc.mesh, [&](int t, const ElementMap& em, const Vec3& l, double w) {
        const auto v = p2_values(em, l);
        const auto& nodes = disc.layout.element_nodes[t];
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b)
                for (int c = 0; c < 2; ++c)
                    trip.emplace_back(2 * nodes[a] + c, 2 * nodes[b] + c, w * v.phi[a] * v.phi[b]);
    });
    return from_triplets(disc.velocity_size(), disc.velocity_size(), trip);
}

SpMat pressure_mass_matrix(const StokesDiscretization& disc) {
    Triplets trip;
    for (int t = 0; t < disc.mesh->num_triangles(); ++t) {
        const double a = disc.mesh->triangle_area(t);
        const auto& tri = disc.mesh->triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trip.emplace_back(tri[i], tri[j], a * (i == j ? 2.0 : 1.0) / 12.0);
    }
    return from_triplets(disc.pressure_size(), disc.pressure_size(), trip);
}

SpMat boundary_mass_matrix(const StokesDiscretization& disc, const std::vector<BoundaryTag>& tags) {
    Triplets trip;
    for_boundary_points(disc, tags, [&](const std::array<int, 3>& nodes, const Vec2&, const Vec2&, double w,
                                        const std::array<double, 3>& s) {
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 2; ++c) trip.emplace_back(2 * nodes[a] + c, 2 * nodes[b] + c, w * s[a] * s[b]);
    });
    return from_triplets(disc.velocity_size(), disc.velocity_size(), trip);
}

SpMat boundary_normal_mass_matrix(const StokesDiscretization& disc, const std::vector<BoundaryTag>& tags) {
    Triplets trip;
    for_boundary_points(disc, tags, [&](const std::array<int, 3>& nodes, const Vec2&, const Vec2& n, double w,
                                        const std::array<double, 3>& s) {
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 2; ++c)
                    for (int d = 0; d < 2; ++d)
                        trip.emplace_back(2 * nodes[a] + c, 2 * nodes[b] + d, w * s[a] * s[b] * n[c] * n[d]);
    });
    return from_triplets(disc.velocity_size(), disc.velocity_size(), trip);
}

SpMat divergence_matrix(const StokesDiscretization& disc) {
    Triplets trip;
    for_element_points(*disc.mesh, [&](int t, const ElementMap& em, const Vec3& l, double w) {
        const auto v = p2_values(em, l);
        const auto& nodes = disc.layout.element_nodes[t];
        const auto& tri = disc.mesh->triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int a = 0; a < 6; ++a)
                for (int c = 0; c < 2; ++c) trip.emplace_back(tri[i], 2 * nodes[a] + c, -w * l[i] * v.grad[a][c]);
    });
    return from_triplets(disc.pressure_size(), disc.velocity_size(), trip);
}

Eigen::VectorXd assemble_velocity_load(const StokesDiscretization& disc, const StokesProblemData& data) {
    Eigen::VectorXd F = Eigen::VectorXd::Zero(disc.velocity_size());
    if (data.f) {
        for_element_points(*disc.mesh, [&](int t, const ElementMap& em, const Vec3& l, double w) {
            const auto v = p2_values(em, l);
            const Vec2 f = data.f(em.point(l));
            const auto& nodes = disc.layout.element_nodes[t];
            for (int a = 0; a < 6; ++a) {
                F[2 * nodes[a]] += w * v.phi[a] * f.x();
                F[2 * nodes[a] + 1] += w * v.phi[a] * f.y();
            }
        });
    }
    if (data.g) {
        for_boundary_points(disc, data.slip_tags, [&](const std::array<int, 3>& nodes, const Vec2& x, const Vec2& n,
                                                      double w, const std::array<double, 3>& s) {
            Vec2 g = data.g(x, n);
            g -= g.dot(n) * n;
            for (int a = 0; a < 3; ++a) {
                F[2 * nodes[a]] += w * s[a] * g.x();
                F[2 * nodes[a] + 1] += w * s[a] * g.y();
            }
        });
    }
    if (data.p_b) {
        for_boundary_points(disc, data.traction_tags, [&](const std::array<int, 3>& nodes, const Vec2& x,
                                                          const Vec2& n, double w, const std::array<double, 3>& s) {
            const double pb = data.p_b(x);
            for (int a = 0; a < 3; ++a) {
                F[2 * nodes[a]] -= w * s[a] * pb * n.x();
                F[2 * nodes[a] + 1] -= w * s[a] * pb * n.y();
            }
        });
    }
    return F;
}

namespace {

Eigen::VectorXd assemble_pressure_load(const StokesDiscretization& disc, const StokesProblemData& data) {
    Eigen::VectorXd G = Eigen::VectorXd::Zero(disc.pressure_size());
    if (!data.div_rhs) return G;
    for_element_points(*disc.mesh, [&](int t, const ElementMap& em, const Vec3& l, double w) {
        const double f = data.div_rhs(em.point(l));
        const auto& tri = disc.mesh->triangles[t];
        for (int i = 0; i < 3; ++i) G[tri[i]] -= w * l[i] * f;
    });
    return G;
}

Eigen::VectorXd pressure_weights(const StokesDiscretization& disc) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(disc.pressure_size());
    for (int t = 0; t < disc.mesh->num_triangles(); ++t) {
        const double a = disc.mesh->triangle_area(t) / 3.0;
        for (int v : disc.mesh->triangles[t]) m[v] += a;
    }
    return m;
}

void append_block(Triplets& trip, const SpMat& M, int r0, int c0, bool transpose = false) {
    for (int c = 0; c < M.outerSize(); ++c)
        for (SpMat::InnerIterator it(M, c); it; ++it) {
            if (transpose) trip.emplace_back(c0 + static_cast<int>(it.col()), r0 + static_cast<int>(it.row()), it.value());
            else trip.emplace_back(r0 + static_cast<int>(it.row()), c0 + static_cast<int>(it.col()), it.value());
        }
}

}  // namespace

SaddleSystem assemble(DiscretizationPtr disc, const StokesProblemData& data) {
    if (!(data.mu > 0) || !std::isfinite(data.c_slip) || data.c_slip < 0) {
        throw Error(ErrorKind::InconsistentMesh, "viscosity must be positive and c_slip finite and >= 0");
    }
    for (auto t : data.slip_tags) {
        if (in(data.traction_tags, t) || (in(disc->constraints.strong_zero, t) && data.c_slip > 0)) {
            throw Error(ErrorKind::InconsistentMesh, "a boundary tag carries two boundary conditions");
        }
    }
    SaddleSystem S;
    S.disc = disc;
    const auto& sp = disc->space;
    S.A_visc = viscous_matrix(*disc, data.form, data.mu);
    S.A_slip = data.c_slip > 0 ? SpMat(data.c_slip * boundary_mass_matrix(*disc, data.slip_tags))
                               : SpMat(disc->velocity_size(), disc->velocity_size());
    S.F = assemble_velocity_load(*disc, data);
    S.nu = static_cast<int>(sp.T.cols());
    const SpMat Ar = SpMat(sp.T.transpose()) * (S.A_visc + S.A_slip) * sp.T;

    Triplets trip;
    append_block(trip, Ar, 0, 0);
    if (disc->with_pressure) {
        S.B = divergence_matrix(*disc);
        S.G = assemble_pressure_load(*disc, data);
        S.np = static_cast<int>(sp.Tp.cols());
        const SpMat Br = SpMat(sp.Tp.transpose()) * S.B * sp.T;
        append_block(trip, Br, S.nu, 0);
        append_block(trip, Br, S.nu, 0, true);
        if (disc->gauge == PressureGauge::ZeroMean) {
            S.gauge_row = true;
            const Eigen::VectorXd m = sp.Tp.transpose() * pressure_weights(*disc);
            for (int i = 0; i < S.np; ++i) {
                trip.emplace_back(S.nu + S.np, S.nu + i, m[i]);
                trip.emplace_back(S.nu + i, S.nu + S.np, m[i]);
            }
        }
    }
    const int n = S.nu + S.np + (S.gauge_row ? 1 : 0);
    S.K = from_triplets(n, n, trip);
    S.rhs = S.reduce_rhs(S.F, S.G);
    return S;
}

Eigen::VectorXd SaddleSystem::reduce_rhs(const Eigen::VectorXd& F_full, const Eigen::VectorXd& G_full) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(K.rows());
    r.head(nu) = disc->space.T.transpose() * F_full;
    if (np > 0 && G_full.size() > 0) r.segment(nu, np) = disc->space.Tp.transpose() * G_full;
    return r;
}

Eigen::VectorXd SaddleSystem::expand(const Eigen::VectorXd& x) const {
    const auto& sp = disc->space;
    Eigen::VectorXd out(disc->velocity_size() + (np > 0 ? disc->pressure_size() : 0));
    out.head(disc->velocity_size()) = sp.T * x.head(nu);
    if (np > 0) out.tail(disc->pressure_size()) = sp.Tp * x.segment(nu, np);
    return out;
}

StokesSolver::StokesSolver(const SaddleSystem& sys) : sys_(std::make_shared<SaddleSystem>(sys)) {
    try {
        lu_ = std::make_shared<KktFactorization>(sys_->K, sys_->nu);
    } catch (const SingularSystemError& e) {
        Eigen::VectorXd null_full;
        if (e.has_near_null_vector()) null_full = sys_->expand(e.near_null_vector());
        throw SingularSystemError(e.detail(), null_full);
    }
}

StokesField StokesSolver::finish(const Eigen::VectorXd& rhs) const {
    double res = 0;
    const Eigen::VectorXd x = lu_->solve(rhs, res);
    StokesField f;
    f.disc = sys_->disc;
    const Eigen::VectorXd full = sys_->expand(x);
    f.u = full.head(sys_->disc->velocity_size());
    if (sys_->np > 0) f.p = full.tail(sys_->disc->pressure_size());
    f.residual = res;
    return f;
}

StokesField StokesSolver::solve() const { return finish(sys_->rhs); }

StokesField StokesSolver::solve(const Eigen::VectorXd& F_full, const Eigen::VectorXd& G_full) const {
    return finish(sys_->reduce_rhs(F_full, G_full));
}

StokesField solve(const SaddleSystem& sys) { return StokesSolver(sys).solve(); }

double EnergyReport::balance_defect() const {
    const double lhs = viscous + slip, rhs = external_work();
    const double scale = std::max({std::abs(lhs), std::abs(rhs)});
    return scale == 0 ? 0.0 : std::abs(lhs - rhs) / scale;
}

EnergyReport energy(const StokesField& field, const StokesProblemData& data) {
    const auto& disc = *field.disc;
    EnergyReport r;
    r.viscous = field.u.dot(viscous_matrix(disc, data.form, data.mu) * field.u);
    if (data.c_slip > 0) r.slip = data.c_slip * field.u.dot(boundary_mass_matrix(disc, data.slip_tags) * field.u);
    StokesProblemData part = data;
    part.g = nullptr;
    part.p_b = nullptr;
    r.work_force = assemble_velocity_load(disc, part).dot(field.u);
    part = data;
    part.f = nullptr;
    part.p_b = nullptr;
    r.work_stress = assemble_velocity_load(disc, part).dot(field.u);
    part = data;
    part.f = nullptr;
    part.g = nullptr;
    r.work_traction = assemble_velocity_load(disc, part).dot(field.u);
    return r;
}

Vec2 integrate_velocity(const StokesField& field) {
    Vec2 s = Vec2::Zero();
    for_element_points(field.mesh(), [&](int t, const ElementMap&, const Vec3& l, double w) {
        s += w * field.velocity(t, l);
    });
    return s;
}

double integrate_pressure(const StokesField& field) {
    double s = 0;
    if (!field.p.size()) return 0;
    for (int t = 0; t < field.mesh().num_triangles(); ++t) {
        const auto& tri = field.mesh().triangles[t];
        s += field.mesh().triangle_area(t) * (field.p[tri[0]] + field.p[tri[1]] + field.p[tri[2]]) / 3.0;
    }
    return s;
}

double l2_norm_velocity(const StokesField& field) {
    double s = 0;
    for_element_points(field.mesh(), [&](int t, const ElementMap&, const Vec3& l, double w) {
        s += w * field.velocity(t, l).squaredNorm();
    });
    return std::sqrt(s);
}

double h1_seminorm_velocity(const StokesField& field) { return std::sqrt(std::max(0.0, grad_inner(field, field))); }

double boundary_l2_norm_velocity(const StokesField& field, BoundaryTag tag) {
    double s = 0;
    for_boundary_points(*field.disc, {tag}, [&](const std::array<int, 3>& nodes, const Vec2&, const Vec2&, double w,
                                                const std::array<double, 3>& sh) {
        Vec2 u = Vec2::Zero();
        for (int a = 0; a < 3; ++a) u += sh[a] * Vec2(field.u[2 * nodes[a]], field.u[2 * nodes[a] + 1]);
        s += w * u.squaredNorm();
    });
    return std::sqrt(s);
}

double symgrad_inner(const StokesField& a, const StokesField& b) {
    double s = 0;
    for_element_points(a.mesh(), [&](int t, const ElementMap& em, const Vec3& l, double w) {
        const Eigen::Matrix2d ga = eval_velocity_gradient(a.disc->layout, em, a.u, t, l);
        const Eigen::Matrix2d gb = eval_velocity_gradient(b.disc->layout, em, b.u, t, l);
        const Eigen::Matrix2d da = 0.5 * (ga + ga.transpose()), db = 0.5 * (gb + gb.transpose());
        s += w * da.cwiseProduct(db).sum();
    });
    return s;
}

double grad_inner(const StokesField& a, const StokesField& b) {
    double s = 0;
    for_element_points(a.mesh(), [&](int t, const ElementMap& em, const Vec3& l, double w) {
        const Eigen::Matrix2d ga = eval_velocity_gradient(a.disc->layout, em, a.u, t, l);
        const Eigen::Matrix2d gb = eval_velocity_gradient(b.disc->layout, em, b.u, t, l);
        s += w * ga.cwiseProduct(gb).sum();
    });
    return s;
}

double max_normal_violation(const StokesField& field) {
    const auto& sp = field.disc->space;
    double m = 0;
    for (std::size_t i = 0; i < sp.kind.size(); ++i) {
        const Vec2 u(field.u[2 * i], field.u[2 * i + 1]);
        if (sp.kind[i] == NodeKind::NormalZero) m = std::max(m, std::abs(u.dot(sp.node_normal[i])));
        else if (sp.kind[i] == NodeKind::StrongZero) m = std::max(m, u.norm());
    }
    return m;
}

double divergence_residual(const StokesField& field) {
    const auto& disc = *field.disc;
    const Eigen::VectorXd r = disc.space.Tp.transpose() * (divergence_matrix(disc) * field.u);
    return r.norm();
}

double estimate_inf_sup(DiscretizationPtr disc) {
    StokesProblemData data;
    const SaddleSystem sys = assemble(disc, data);
    const KktFactorization lu(sys.K, sys.nu);
    const auto& sp = disc->space;
    const SpMat Ar = SpMat(sp.T.transpose()) * sys.A_visc * sp.T;
    const SpMat Br = SpMat(sp.Tp.transpose()) * sys.B * sp.T;
    const SpMat Mp = SpMat(sp.Tp.transpose()) * pressure_mass_matrix(*disc) * sp.Tp;
    Eigen::SimplicialLDLT<SpMat> ldlt(Ar);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(sys.np);
    auto project = [&](Eigen::VectorXd x) {
        if (sys.gauge_row) x -= (ones.dot(Mp * x) / ones.dot(Mp * ones)) * ones;
        return x;
    };
    Rng rng(3);
    Eigen::VectorXd x = project(rng.vector(sys.np));
    double lambda = 0;
    for (int it = 0; it < 300; ++it) {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.K.rows());
        rhs.segment(sys.nu, sys.np) = Mp * x;
        const Eigen::VectorXd sol = lu.solve(rhs);
        x = project(-sol.segment(sys.nu, sys.np));
        x /= std::sqrt(x.dot(Mp * x));
        const Eigen::VectorXd Sx = Br * ldlt.solve(Eigen::VectorXd(Br.transpose() * x));
        const double next = x.dot(Sx);
        if (it > 0 && std::abs(next - lambda) < 1e-12 * std::abs(next)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace thinlayer
