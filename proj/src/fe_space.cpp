#include "thinlayer/fe_space.hpp"

#include "thinlayer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace thinlayer {

P2Layout build_p2_layout(const Mesh& mesh) {
    P2Layout L;
    L.num_vertices = mesh.num_vertices();
    std::map<std::pair<int, int>, int> edge_id;
    auto edge_of = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto [it, inserted] = edge_id.try_emplace({key.first, key.second}, L.num_edges);
        if (inserted) {
            L.edge_vertices.push_back({key.first, key.second});
            ++L.num_edges;
        }
        return L.num_vertices + it->second;
    };
    L.element_nodes.reserve(mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
        L.element_nodes.push_back(
            {t[0], t[1], t[2], edge_of(t[0], t[1]), edge_of(t[1], t[2]), edge_of(t[2], t[0])});
    }
    L.node_coords = mesh.vertices;
    for (const auto& e : L.edge_vertices) {
        L.node_coords.push_back(0.5 * (mesh.vertices[e[0]] + mesh.vertices[e[1]]));
    }
    for (const auto& be : mesh.boundary_edges) {
        auto it = edge_id.find({std::min(be.v[0], be.v[1]), std::max(be.v[0], be.v[1])});
        if (it == edge_id.end()) throw Error(ErrorKind::InconsistentMesh, "boundary edge not in mesh");
        L.boundary_edge_node.push_back(L.num_vertices + it->second);
    }

    L.node_partner.assign(L.num_nodes(), -1);
    if (mesh.periodic_partner.size() == mesh.vertices.size()) {
        for (int v = 0; v < L.num_vertices; ++v) L.node_partner[v] = mesh.periodic_partner[v];
        for (std::size_t k = 0; k < mesh.boundary_edges.size(); ++k) {
            const auto& be = mesh.boundary_edges[k];
            if (be.tag != BoundaryTag::LateralPeriodic || be.face != 0) continue;
            const int pa = mesh.periodic_partner[be.v[0]], pb = mesh.periodic_partner[be.v[1]];
            if (pa < 0 || pb < 0) throw Error(ErrorKind::InconsistentMesh, "unpaired lateral vertex");
            auto it = edge_id.find({std::min(pa, pb), std::max(pa, pb)});
            if (it == edge_id.end()) throw Error(ErrorKind::InconsistentMesh, "lateral edge has no image");
            const int a = L.boundary_edge_node[k], b = L.num_vertices + it->second;
            L.node_partner[a] = b;
            L.node_partner[b] = a;
        }
    }
    return L;
}

const std::array<Vec3, 6>& TriangleQuadrature::points() {
    static const std::array<Vec3, 6> pts = [] {
        const double a1 = 0.108103018168070, b1 = 0.445948490915965;
        const double a2 = 0.816847572980459, b2 = 0.091576213509771;
        return std::array<Vec3, 6>{Vec3(a1, b1, b1), Vec3(b1, a1, b1), Vec3(b1, b1, a1),
                                   Vec3(a2, b2, b2), Vec3(b2, a2, b2), Vec3(b2, b2, a2)};
    }();
    return pts;
}

const std::array<double, 6>& TriangleQuadrature::weights() {
    static const std::array<double, 6> w{0.223381589678011, 0.223381589678011, 0.223381589678011,
                                         0.109951743655322, 0.109951743655322, 0.109951743655322};
    return w;
}

const std::array<double, 3>& EdgeQuadrature::points() {
    static const std::array<double, 3> p{0.5 - std::sqrt(0.15), 0.5, 0.5 + std::sqrt(0.15)};
    return p;
}

const std::array<double, 3>& EdgeQuadrature::weights() {
    static const std::array<double, 3> w{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    return w;
}

ElementMap::ElementMap(const Mesh& mesh, int t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) x[k] = mesh.vertices[tri[k]];
    const double det = (x[1] - x[0]).x() * (x[2] - x[0]).y() - (x[1] - x[0]).y() * (x[2] - x[0]).x();
    area = 0.5 * det;
    for (int k = 0; k < 3; ++k) {
        const Vec2& a = x[(k + 1) % 3];
        const Vec2& b = x[(k + 2) % 3];
        grad_lambda[k] = Vec2(a.y() - b.y(), b.x() - a.x()) / det;
    }
}

P2Values p2_values(const ElementMap& em, const Vec3& l) {
    P2Values v;
    for (int i = 0; i < 3; ++i) {
        v.phi[i] = l[i] * (2 * l[i] - 1);
        v.grad[i] = (4 * l[i] - 1) * em.grad_lambda[i];
    }
    static constexpr int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
    for (int k = 0; k < 3; ++k) {
        const int i = ea[k], j = eb[k];
        v.phi[3 + k] = 4 * l[i] * l[j];
        v.grad[3 + k] = 4 * (l[i] * em.grad_lambda[j] + l[j] * em.grad_lambda[i]);
    }
    return v;
}

std::array<double, 3> p2_edge_values(double t) {
    return {(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)};
}

ConstrainedSpace build_constrained_space(const Mesh& mesh, const P2Layout& layout,
                                         const ConstraintSet& cs) {
    ConstrainedSpace S;
    const int nn = layout.num_nodes();
    S.kind.assign(nn, NodeKind::Free);
    S.node_normal.assign(nn, Vec2::Zero());
    S.vertex_normals =
        compute_normals(mesh, cs.normal_zero, cs.corner_threshold_deg, cs.periodic);

    auto has = [](const std::vector<BoundaryTag>& v, BoundaryTag t) {
        return std::find(v.begin(), v.end(), t) != v.end();
    };
    for (std::size_t k = 0; k < mesh.boundary_edges.size(); ++k) {
        const auto& be = mesh.boundary_edges[k];
        const int mid = layout.boundary_edge_node[k];
        if (has(cs.strong_zero, be.tag)) {
            S.kind[be.v[0]] = S.kind[be.v[1]] = S.kind[mid] = NodeKind::StrongZero;
        } else if (has(cs.normal_zero, be.tag)) {
            if (S.kind[mid] == NodeKind::Free) {
                S.kind[mid] = NodeKind::NormalZero;
                S.node_normal[mid] = mesh.edge_normal(be);
            }
        }
    }
    for (int v = 0; v < layout.num_vertices; ++v) {
        if (S.kind[v] != NodeKind::Free || !S.vertex_normals.on_boundary[v]) continue;
        S.kind[v] = S.vertex_normals.corner[v] ? NodeKind::StrongZero : NodeKind::NormalZero;
        S.node_normal[v] = S.vertex_normals.normal[v];
    }

    // Periodic classes: the node with the smaller index is the master.
    std::vector<int> master(nn);
    for (int i = 0; i < nn; ++i) {
        const int p = cs.periodic ? layout.node_partner[i] : -1;
        master[i] = (p >= 0 && p < i) ? p : i;
    }
    for (int i = 0; i < nn; ++i) {
        const int m = master[i];
        if (m == i) continue;
        const auto stronger = std::max(S.kind[i], S.kind[m]);
        if (S.kind[i] == NodeKind::NormalZero && S.kind[m] == NodeKind::NormalZero &&
            (S.node_normal[i] - S.node_normal[m]).norm() > 1e-10) {
            throw Error(ErrorKind::InconsistentMesh, "periodic images carry different normals");
        }
        if (S.node_normal[m].isZero()) S.node_normal[m] = S.node_normal[i];
        S.node_normal[i] = S.node_normal[m];
        S.kind[i] = S.kind[m] = stronger;
    }

    std::vector<int> first(nn, -1);
    Triplets trip;
    int nr = 0;
    for (int i = 0; i < nn; ++i) {
        const int m = master[i];
        if (first[m] < 0) {
            first[m] = nr;
            if (S.kind[m] == NodeKind::Free) nr += 2;
            else if (S.kind[m] == NodeKind::NormalZero) nr += 1;
        }
        const int r = first[m];
        switch (S.kind[i]) {
            case NodeKind::Free:
                trip.emplace_back(2 * i, r, 1.0);
                trip.emplace_back(2 * i + 1, r + 1, 1.0);
                break;
            case NodeKind::NormalZero: {
                const Vec2& n = S.node_normal[i];
                trip.emplace_back(2 * i, r, -n.y());
                trip.emplace_back(2 * i + 1, r, n.x());
                break;
            }
            case NodeKind::StrongZero:
                break;
        }
    }
    S.T.resize(2 * nn, nr);
    S.T.setFromTriplets(trip.begin(), trip.end());

    trip.clear();
    std::vector<int> pfirst(layout.num_vertices, -1);
    int np = 0;
    for (int v = 0; v < layout.num_vertices; ++v) {
        const int m = master[v];
        if (pfirst[m] < 0) pfirst[m] = np++;
        trip.emplace_back(v, pfirst[m], 1.0);
    }
    S.Tp.resize(layout.num_vertices, np);
    S.Tp.setFromTriplets(trip.begin(), trip.end());
    return S;
}

Vec2 eval_velocity(const P2Layout& layout, const Eigen::VectorXd& u, int elem, const Vec3& l) {
    static constexpr int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
    std::array<double, 6> phi;
    for (int i = 0; i < 3; ++i) phi[i] = l[i] * (2 * l[i] - 1);
    for (int k = 0; k < 3; ++k) phi[3 + k] = 4 * l[ea[k]] * l[eb[k]];
    Vec2 out = Vec2::Zero();
    const auto& nodes = layout.element_nodes[elem];
    for (int a = 0; a < 6; ++a) out += phi[a] * Vec2(u[2 * nodes[a]], u[2 * nodes[a] + 1]);
    return out;
}

Eigen::Matrix2d eval_velocity_gradient(const P2Layout& layout, const ElementMap& em,
                                       const Eigen::VectorXd& u, int elem, const Vec3& bary) {
    const auto v = p2_values(em, bary);
    Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
    const auto& nodes = layout.element_nodes[elem];
    for (int a = 0; a < 6; ++a) {
        g.row(0) += u[2 * nodes[a]] * v.grad[a].transpose();
        g.row(1) += u[2 * nodes[a] + 1] * v.grad[a].transpose();
    }
    return g;
}

double eval_pressure(const Mesh& mesh, const Eigen::VectorXd& p, int elem, const Vec3& bary) {
    const auto& t = mesh.triangles[elem];
    return bary[0] * p[t[0]] + bary[1] * p[t[1]] + bary[2] * p[t[2]];
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh) {
    lo_ = Vec2::Constant(1e300);
    hi_ = Vec2::Constant(-1e300);
    for (const auto& v : mesh.vertices) {
        lo_ = lo_.cwiseMin(v);
        hi_ = hi_.cwiseMax(v);
    }
    const double cell = std::max(mesh.h, 1e-6);
    nx_ = std::max(1, static_cast<int>(std::ceil((hi_.x() - lo_.x()) / cell)));
    ny_ = std::max(1, static_cast<int>(std::ceil((hi_.y() - lo_.y()) / cell)));
    buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
    auto clampi = [](double v, int n) { return std::clamp(static_cast<int>(std::floor(v)), 0, n - 1); };
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        Vec2 a = Vec2::Constant(1e300), b = Vec2::Constant(-1e300);
        for (int k : mesh.triangles[t]) {
            a = a.cwiseMin(mesh.vertices[k]);
            b = b.cwiseMax(mesh.vertices[k]);
        }
        const int i0 = clampi((a.x() - lo_.x()) / cell, nx_), i1 = clampi((b.x() - lo_.x()) / cell, nx_);
        const int j0 = clampi((a.y() - lo_.y()) / cell, ny_), j1 = clampi((b.y() - lo_.y()) / cell, ny_);
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(t);
    }
}

bool PointLocator::locate(const Vec2& x, int& elem, Vec3& bary) const {
    const double cell = std::max(mesh_->h, 1e-6);
    const int i = std::clamp(static_cast<int>(std::floor((x.x() - lo_.x()) / cell)), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor((x.y() - lo_.y()) / cell)), 0, ny_ - 1);
    double best = -1e300;
    for (int t : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
        const ElementMap em(*mesh_, t);
        Vec3 l;
        for (int k = 0; k < 3; ++k) l[k] = 1.0 / 3.0 + em.grad_lambda[k].dot(x - (em.x[0] + em.x[1] + em.x[2]) / 3.0);
        const double m = l.minCoeff();
        if (m > best) {
            best = m;
            elem = t;
            bary = l;
        }
    }
    return best > -1e-8;
}

}  // namespace thinlayer
