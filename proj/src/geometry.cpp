#include "thinlayer/geometry.hpp"

#include "thinlayer/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace thinlayer {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MeshingFailed: return "MeshingFailed";
        case ErrorKind::TagAmbiguity: return "TagAmbiguity";
        case ErrorKind::EmptyGammaD: return "EmptyGammaD";
        case ErrorKind::InconsistentMesh: return "InconsistentMesh";
        case ErrorKind::SingularSystem: return "SingularSystem";
        case ErrorKind::RegimeMismatch: return "RegimeMismatch";
        case ErrorKind::DegenerateTensor: return "DegenerateTensor";
        case ErrorKind::BogovskiiFailure: return "BogovskiiFailure";
        case ErrorKind::MeanNotZero: return "MeanNotZero";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
        case ErrorKind::ComputeFailed: return "ComputeFailed";
    }
    return "Unknown";
}

Vec2 Polygon::centroid() const {
    Vec2 c = Vec2::Zero();
    for (const auto& v : vertices) c += v;
    return c / static_cast<double>(vertices.size());
}

Polygon Polygon::regular(Vec2 center, double circumradius, int sides, double phase) {
    Polygon p;
    for (int k = 0; k < sides; ++k) {
        const double a = phase + 2 * std::numbers::pi * k / sides;
        p.vertices.push_back(center + circumradius * Vec2(std::cos(a), std::sin(a)));
    }
    return p;
}

namespace {

double polygon_area(const Polygon& p) {
    double a = 0;
    const auto& v = p.vertices;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const auto& q = v[(k + 1) % v.size()];
        a += v[k].x() * q.y() - q.x() * v[k].y();
    }
    return 0.5 * a;
}

void validate_inside(bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::MeshingFailed, what);
}

void validate_disk(const Disk& d, double ylo, double yhi) {
    validate_inside(d.radius > 0, "disk radius must be positive");
    validate_inside(d.center.x() - d.radius > 0 && d.center.x() + d.radius < 1,
                    "disk leaves the cell laterally (periodic closure is not supported)");
    validate_inside(d.center.y() - d.radius > ylo && d.center.y() + d.radius < yhi,
                    "disk leaves the fluid channel");
}

void validate_polygon(const Polygon& p, double ylo, double yhi) {
    validate_inside(p.vertices.size() >= 3, "polygon needs at least three vertices");
    validate_inside(polygon_area(p) > 0, "polygon vertices must be counter-clockwise");
    const Vec2 c = p.centroid();
    for (std::size_t k = 0; k < p.vertices.size(); ++k) {
        const Vec2 a = p.vertices[k], b = p.vertices[(k + 1) % p.vertices.size()];
        validate_inside(a.x() > 0 && a.x() < 1 && a.y() > ylo && a.y() < yhi,
                        "polygon leaves the fluid channel");
        const Vec2 e = b - a, r = c - a;
        validate_inside(e.x() * r.y() - e.y() * r.x() > 0,
                        "polygon is not star-shaped with respect to its centroid");
    }
}

}  // namespace

void CellGeometry::validate() const {
    if (dim != 2) throw Error(ErrorKind::MeshingFailed, "only dim = 2 is supported");
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Disk>) {
                validate_disk(s, -1, 1);
            } else if constexpr (std::is_same_v<T, Polygon>) {
                validate_polygon(s, -1, 1);
            } else if constexpr (std::is_same_v<T, Slabs>) {
                validate_inside(s.delta > 0 && s.delta < 1, "slab thickness must lie in (0,1)");
                if (s.inclusion) {
                    const double lo = -1 + s.delta, hi = 1 - s.delta;
                    std::visit(
                        [&](const auto& inc) {
                            using I = std::decay_t<decltype(inc)>;
                            if constexpr (std::is_same_v<I, Disk>) validate_disk(inc, lo, hi);
                            else validate_polygon(inc, lo, hi);
                        },
                        *s.inclusion);
                }
            }
        },
        solid);
}

double CellGeometry::exact_fluid_area() const {
    auto inclusion_area = [](const std::variant<Disk, Polygon>& inc) {
        if (const auto* d = std::get_if<Disk>(&inc)) return std::numbers::pi * d->radius * d->radius;
        return polygon_area(std::get<Polygon>(inc));
    };
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Disk>) return 2.0 - inclusion_area(s);
            else if constexpr (std::is_same_v<T, Polygon>) return 2.0 - inclusion_area(s);
            else if constexpr (std::is_same_v<T, Slabs>)
                return 2.0 - 2.0 * s.delta - (s.inclusion ? inclusion_area(*s.inclusion) : 0.0);
            else return 2.0;
        },
        solid);
}

bool CellGeometry::touches_horizontal_faces() const {
    return !std::holds_alternative<Slabs>(solid);
}

int LayerGeometry::cells_per_row() const {
    if (!(eps > 0 && eps <= 1)) throw Error(ErrorKind::MeshingFailed, "eps must lie in (0,1]");
    const double inv = 1.0 / eps;
    if (std::abs(inv - std::round(inv)) > 1e-9) {
        throw Error(ErrorKind::MeshingFailed, "1/eps must be a positive integer");
    }
    if (sigma_lengths.size() != 1 || sigma_lengths[0] <= 0) {
        throw Error(ErrorKind::MeshingFailed, "expected a single positive length L1 (n = 2)");
    }
    return sigma_lengths[0] * static_cast<int>(std::lround(inv));
}

double Mesh::triangle_area(int t) const {
    const auto& tri = triangles[t];
    const Vec2 a = vertices[tri[1]] - vertices[tri[0]];
    const Vec2 b = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

double Mesh::area() const {
    double s = 0;
    for (int t = 0; t < num_triangles(); ++t) s += triangle_area(t);
    return s;
}

bool Mesh::has_tag(BoundaryTag tag) const {
    for (const auto& e : boundary_edges)
        if (e.tag == tag) return true;
    return false;
}

double Mesh::tagged_length(BoundaryTag tag) const {
    double s = 0;
    for (const auto& e : boundary_edges)
        if (e.tag == tag) s += (vertices[e.v[1]] - vertices[e.v[0]]).norm();
    return s;
}

Vec2 Mesh::edge_normal(const BoundaryEdge& e) const {
    const Vec2 d = vertices[e.v[1]] - vertices[e.v[0]];
    return Vec2(d.y(), -d.x()).normalized();
}

NormalField compute_normals(const Mesh& mesh, const std::vector<BoundaryTag>& tags,
                            double corner_threshold_deg, bool merge_periodic) {
    const int nv = mesh.num_vertices();
    NormalField nf;
    nf.normal.assign(nv, Vec2::Zero());
    nf.on_boundary.assign(nv, false);
    nf.corner.assign(nv, false);
    std::vector<std::vector<Vec2>> incident(nv);

    auto wanted = [&](BoundaryTag t) {
        return std::find(tags.begin(), tags.end(), t) != tags.end();
    };
    for (const auto& e : mesh.boundary_edges) {
        if (!wanted(e.tag)) continue;
        const Vec2 d = mesh.vertices[e.v[1]] - mesh.vertices[e.v[0]];
        const Vec2 weighted(d.y(), -d.x());  // length-weighted outward normal
        for (int v : e.v) {
            nf.normal[v] += weighted;
            nf.on_boundary[v] = true;
            incident[v].push_back(weighted.normalized());
        }
    }
    // Merge the two sides of a periodic pair so both carry the same normal.
    if (merge_periodic && !mesh.periodic_partner.empty()) {
        for (int v = 0; v < nv; ++v) {
            const int p = mesh.periodic_partner[v];
            if (p < 0 || p < v || !(nf.on_boundary[v] || nf.on_boundary[p])) continue;
            const Vec2 sum = nf.normal[v] + nf.normal[p];
            nf.normal[v] = nf.normal[p] = sum;
            nf.on_boundary[v] = nf.on_boundary[p] = true;
            auto merged = incident[v];
            merged.insert(merged.end(), incident[p].begin(), incident[p].end());
            incident[v] = incident[p] = merged;
        }
    }
    const double cos_thr = std::cos(corner_threshold_deg * std::numbers::pi / 180.0);
    for (int v = 0; v < nv; ++v) {
        if (!nf.on_boundary[v]) continue;
        for (std::size_t a = 0; a < incident[v].size(); ++a)
            for (std::size_t b = a + 1; b < incident[v].size(); ++b)
                if (incident[v][a].dot(incident[v][b]) < cos_thr) nf.corner[v] = true;
        const double len = nf.normal[v].norm();
        if (len > 0) nf.normal[v] /= len;
        else nf.corner[v] = true;
    }
    return nf;
}

Mesh build_layer_mesh(const LayerGeometry& layer, double h) {
    const int ncells = layer.cells_per_row();
    const Mesh cell = build_cell_mesh(layer.cell, h);
    const double eps = layer.eps;
    const int nv = cell.num_vertices();

    std::vector<bool> on_left(nv, false);
    for (int v = 0; v < nv; ++v) on_left[v] = std::abs(cell.vertices[v].x()) < 1e-12;

    Mesh m;
    m.h = h * eps;
    m.eps = eps;
    m.cell_count = ncells;
    // id[k][v]: layer vertex of reference vertex v in cell k. Left-face vertices of
    // cell k > 0 coincide with the right-face partners of cell k-1.
    std::vector<std::vector<int>> id(ncells, std::vector<int>(nv, -1));
    for (int k = 0; k < ncells; ++k) {
        for (int v = 0; v < nv; ++v) {
            if (k > 0 && on_left[v]) {
                id[k][v] = id[k - 1][cell.periodic_partner[v]];
                continue;
            }
            id[k][v] = m.num_vertices();
            const Vec2& y = cell.vertices[v];
            m.vertices.emplace_back(eps * (y.x() + k), eps * y.y());
        }
        for (int t = 0; t < cell.num_triangles(); ++t) {
            const auto& tri = cell.triangles[t];
            m.triangles.push_back({id[k][tri[0]], id[k][tri[1]], id[k][tri[2]]});
            m.element_cell.push_back(k);
            m.element_reference.push_back(t);
        }
        for (const auto& e : cell.boundary_edges) {
            BoundaryEdge be;
            be.v = {id[k][e.v[0]], id[k][e.v[1]]};
            switch (e.tag) {
                case BoundaryTag::GammaD:
                    be.tag = BoundaryTag::GammaD;
                    break;
                case BoundaryTag::SNPlus:
                case BoundaryTag::SNMinus:
                case BoundaryTag::GammaN:
                    be.tag = BoundaryTag::GammaN;
                    break;
                case BoundaryTag::LateralPeriodic:
                    if ((e.face == 0 && k == 0) || (e.face == 1 && k == ncells - 1)) {
                        be.tag = BoundaryTag::GammaN;
                        break;
                    }
                    continue;  // interior face between two cells
            }
            m.boundary_edges.push_back(be);
        }
    }
    m.periodic_partner.assign(m.vertices.size(), -1);
    return m;
}

A4Report check_assumption_a4(const Mesh& mesh) {
    A4Report r;
    bool any = false;
    for (const auto& e : mesh.boundary_edges) {
        if (e.tag != BoundaryTag::GammaD) continue;
        any = true;
        const double len = (mesh.vertices[e.v[1]] - mesh.vertices[e.v[0]]).norm();
        const Vec2 n = mesh.edge_normal(e);
        r.moment_matrix += len * n * n.transpose();
    }
    if (!any) throw Error(ErrorKind::EmptyGammaD, "mesh has no Gamma_D edges");
    Eigen::SelfAdjointEigenSolver<Mat2> es(r.moment_matrix);
    const double tol = 1e-8 * r.moment_matrix.trace();
    for (int k = 0; k < 2; ++k)
        if (es.eigenvalues()[k] > tol) ++r.rank;
    r.satisfied = es.eigenvalues()[0] > tol;
    return r;
}

}  // namespace thinlayer
