#include "thinlayer/errors.hpp"
#include "thinlayer/geometry.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <limits>
#include <optional>

namespace thinlayer {

namespace {

constexpr double kTagTol = 1e-10;

// Point store that merges coordinates closer than `kMergeTol`.
class PointPool {
public:
    int add(const Vec2& p) {
        const auto key = quantize(p);
        for (long dx = -1; dx <= 1; ++dx) {
            for (long dy = -1; dy <= 1; ++dy) {
                auto it = buckets_.find({key.first + dx, key.second + dy});
                if (it == buckets_.end()) continue;
                for (int id : it->second) {
                    if ((points_[id] - p).norm() < kMergeTol) return id;
                }
            }
        }
        const int id = static_cast<int>(points_.size());
        points_.push_back(p);
        buckets_[key].push_back(id);
        return id;
    }

    const std::vector<Vec2>& points() const { return points_; }

private:
    static constexpr double kMergeTol = 1e-11;
    static constexpr double kBucket = 1e-9;

    static std::pair<long, long> quantize(const Vec2& p) {
        return {std::lround(p.x() / kBucket), std::lround(p.y() / kBucket)};
    }

    std::vector<Vec2> points_;
    std::map<std::pair<long, long>, std::vector<int>> buckets_;
};

class TriangleSoup {
public:
    void add(const Vec2& a, const Vec2& b, const Vec2& c) {
        std::array<int, 3> t{pool_.add(a), pool_.add(b), pool_.add(c)};
        const auto& pts = pool_.points();
        const Vec2 e1 = pts[t[1]] - pts[t[0]];
        const Vec2 e2 = pts[t[2]] - pts[t[0]];
        const double cross = e1.x() * e2.y() - e1.y() * e2.x();
        if (std::abs(cross) < 1e-14) {
            throw Error(ErrorKind::MeshingFailed, "degenerate triangle produced");
        }
        if (cross < 0) std::swap(t[1], t[2]);
        tris_.push_back(t);
    }

    // Quad a-b-c-d (any orientation), split along the shorter diagonal.
    void add_quad(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
        if ((a - c).norm() <= (b - d).norm()) {
            add(a, b, c);
            add(a, c, d);
        } else {
            add(a, b, d);
            add(b, c, d);
        }
    }

    const std::vector<Vec2>& points() const { return pool_.points(); }
    const std::vector<std::array<int, 3>>& triangles() const { return tris_; }

private:
    PointPool pool_;
    std::vector<std::array<int, 3>> tris_;
};

int divisions(double length, double h) {
    return std::max(1, static_cast<int>(std::ceil(length / h - 1e-9)));
}

double grid_coord(double lo, double hi, int i, int n) {
    if (i == 0) return lo;
    if (i == n) return hi;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
}

void structured_block(TriangleSoup& soup, double x0, double x1, int nx, double y0, double y1,
                      int ny) {
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const double xa = grid_coord(x0, x1, i, nx), xb = grid_coord(x0, x1, i + 1, nx);
            const double ya = grid_coord(y0, y1, j, ny), yb = grid_coord(y0, y1, j + 1, ny);
            soup.add_quad({xa, ya}, {xb, ya}, {xb, yb}, {xa, yb});
        }
    }
}

struct Inclusion {
    Vec2 center;
    std::optional<Disk> disk;
    std::optional<Polygon> polygon;

    // First boundary point along the ray center + t*dir.
    Vec2 ray_hit(const Vec2& dir) const {
        const Vec2 d = dir.normalized();
        if (disk) return disk->center + disk->radius * d;
        double best = std::numeric_limits<double>::infinity();
        const auto& v = polygon->vertices;
        for (std::size_t k = 0; k < v.size(); ++k) {
            const Vec2 a = v[k], b = v[(k + 1) % v.size()];
            const Vec2 e = b - a;
            Mat2 m;
            m << d.x(), -e.x(), d.y(), -e.y();
            const double det = m.determinant();
            if (std::abs(det) < 1e-15) continue;
            const Vec2 ts = m.inverse() * (a - center);
            if (ts[0] > 0 && ts[1] >= -1e-12 && ts[1] <= 1 + 1e-12) best = std::min(best, ts[0]);
        }
        if (!std::isfinite(best)) throw Error(ErrorKind::MeshingFailed, "ray misses polygon");
        return center + best * d;
    }

    double max_extent_y() const {
        if (disk) return disk->radius;
        double m = 0;
        for (const auto& p : polygon->vertices) m = std::max(m, std::abs(p.y() - center.y()));
        return m;
    }
};

std::optional<Inclusion> inclusion_of(const CellGeometry& g) {
    auto from = [](const auto& shape) -> std::optional<Inclusion> {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, Disk>) {
            return Inclusion{shape.center, shape, std::nullopt};
        } else if constexpr (std::is_same_v<T, Polygon>) {
            return Inclusion{shape.centroid(), std::nullopt, shape};
        } else {
            return std::nullopt;
        }
    };
    if (const auto* s = std::get_if<Slabs>(&g.solid)) {
        if (!s->inclusion) return std::nullopt;
        return std::visit(from, *s->inclusion);
    }
    return std::visit(from, g.solid);
}

// Fluid channel (0,1) x (ylo, yhi).
std::pair<double, double> channel_of(const CellGeometry& g) {
    if (const auto* s = std::get_if<Slabs>(&g.solid)) return {-1.0 + s->delta, 1.0 - s->delta};
    return {-1.0, 1.0};
}

// Counter-clockwise nodes on the boundary of [0,1] x [y0,y1], starting at (0,y0).
std::vector<Vec2> box_nodes(double y0, double y1, int nh, int nv) {
    std::vector<Vec2> out;
    for (int i = 0; i < nh; ++i) out.emplace_back(grid_coord(0, 1, i, nh), y0);
    for (int j = 0; j < nv; ++j) out.emplace_back(1.0, grid_coord(y0, y1, j, nv));
    for (int i = nh; i > 0; --i) out.emplace_back(grid_coord(0, 1, i, nh), y1);
    for (int j = nv; j > 0; --j) out.emplace_back(0.0, grid_coord(y0, y1, j, nv));
    return out;
}

double angle_of(const Vec2& v) { return std::atan2(v.y(), v.x()); }

double angle_dist(double a, double b) {
    double d = std::fmod(std::abs(a - b), 2 * std::numbers::pi);
    return std::min(d, 2 * std::numbers::pi - d);
}

struct InclusionLayout {
    Inclusion inc;
    std::vector<Vec2> box;     // outer ring
    std::vector<Vec2> inner;   // matching nodes on the inclusion boundary
    double box_y0 = 0, box_y1 = 0;
    int nh = 0, nv = 0;
};

InclusionLayout layout_inclusion(const Inclusion& inc, double ylo, double yhi, double h) {
    InclusionLayout lay{inc, {}, {}, 0, 0, 0, 0};
    const double c2 = inc.center.y();
    double hb = std::min({0.5, yhi - c2, c2 - ylo});
    if (hb <= inc.max_extent_y() + 1e-3) {
        throw Error(ErrorKind::MeshingFailed, "inclusion does not fit inside the fluid channel");
    }
    lay.box_y0 = std::max(ylo, c2 - hb);
    lay.box_y1 = std::min(yhi, c2 + hb);
    lay.nh = divisions(1.0, h);
    lay.nv = divisions(lay.box_y1 - lay.box_y0, h);
    lay.box = box_nodes(lay.box_y0, lay.box_y1, lay.nh, lay.nv);
    for (const auto& b : lay.box) lay.inner.push_back(inc.ray_hit(b - inc.center));

    if (inc.polygon) {
        // Polygon corners must be mesh nodes: move the angularly closest node onto each corner.
        std::vector<int> taken(lay.inner.size(), 0);
        for (const auto& corner : inc.polygon->vertices) {
            const double a = angle_of(corner - inc.center);
            std::size_t best = 0;
            double bd = 1e300;
            for (std::size_t j = 0; j < lay.inner.size(); ++j) {
                const double d = angle_dist(a, angle_of(lay.inner[j] - inc.center));
                if (d < bd) bd = d, best = j;
            }
            if (taken[best]++) {
                throw Error(ErrorKind::MeshingFailed, "mesh too coarse to resolve polygon corners");
            }
            lay.inner[best] = corner;
        }
        // Angular order must survive the snapping.
        const std::size_t n = lay.inner.size();
        for (std::size_t j = 0; j < n; ++j) {
            const Vec2 a = lay.inner[j] - inc.center, b = lay.inner[(j + 1) % n] - inc.center;
            if (a.x() * b.y() - a.y() * b.x() <= 0) {
                throw Error(ErrorKind::MeshingFailed, "polygon corner snapping broke node order");
            }
        }
    }
    return lay;
}

void add_ring(TriangleSoup& soup, const std::vector<Vec2>& inner, const std::vector<Vec2>& outer,
              int layers) {
    const std::size_t n = inner.size();
    auto node = [&](std::size_t j, int k) -> Vec2 {
        j %= n;
        if (k == 0) return inner[j];
        if (k == layers) return outer[j];
        const double t = static_cast<double>(k) / layers;
        return inner[j] + t * (outer[j] - inner[j]);
    };
    for (std::size_t j = 0; j < n; ++j) {
        for (int k = 0; k < layers; ++k) {
            soup.add_quad(node(j, k), node(j + 1, k), node(j + 1, k + 1), node(j, k + 1));
        }
    }
}

int ring_layers(const std::vector<Vec2>& inner, const std::vector<Vec2>& outer, double h) {
    double mean = 0;
    for (std::size_t j = 0; j < inner.size(); ++j) mean += (outer[j] - inner[j]).norm();
    mean /= static_cast<double>(inner.size());
    return divisions(mean, h);
}

void check_h(double h) {
    if (!(h > 0 && h < 0.5)) throw Error(ErrorKind::MeshingFailed, "mesh size must lie in (0, 0.5)");
}

bool near(double a, double b) { return std::abs(a - b) < kTagTol; }

// Distance from p to the solid boundary; used to validate Gamma_D tags.
double distance_to_solid_boundary(const CellGeometry& g, const Vec2& p) {
    double d = std::numeric_limits<double>::infinity();
    if (const auto* s = std::get_if<Slabs>(&g.solid)) {
        d = std::min(std::abs(p.y() - (1 - s->delta)), std::abs(p.y() + (1 - s->delta)));
    }
    if (auto inc = inclusion_of(g)) {
        if (inc->disk) {
            d = std::min(d, std::abs((p - inc->disk->center).norm() - inc->disk->radius));
        } else {
            const auto& v = inc->polygon->vertices;
            for (std::size_t k = 0; k < v.size(); ++k) {
                const Vec2 a = v[k], b = v[(k + 1) % v.size()];
                const double t = std::clamp((p - a).dot(b - a) / (b - a).squaredNorm(), 0.0, 1.0);
                d = std::min(d, (a + t * (b - a) - p).norm());
            }
        }
    }
    return d;
}

Mesh finalize(const TriangleSoup& soup, double h) {
    Mesh m;
    m.vertices = soup.points();
    m.triangles = soup.triangles();
    m.h = h;
    m.element_cell.assign(m.triangles.size(), 0);
    m.element_reference.resize(m.triangles.size());
    for (std::size_t t = 0; t < m.triangles.size(); ++t) m.element_reference[t] = static_cast<int>(t);
    return m;
}

// Directed boundary edges (fluid on the left) of a triangle set.
std::vector<std::array<int, 2>> boundary_of(const Mesh& m) {
    std::map<std::pair<int, int>, int> count;
    for (const auto& t : m.triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            count[{std::min(a, b), std::max(a, b)}]++;
        }
    }
    std::vector<std::array<int, 2>> out;
    for (const auto& t : m.triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            if (count[{std::min(a, b), std::max(a, b)}] == 1) out.push_back({a, b});
        }
    }
    return out;
}

void tag_cell_boundary(Mesh& m, const CellGeometry& g) {
    for (const auto& e : boundary_of(m)) {
        const Vec2 a = m.vertices[e[0]], b = m.vertices[e[1]];
        BoundaryEdge be;
        be.v = e;
        if (near(a.x(), 0) && near(b.x(), 0)) {
            be.tag = BoundaryTag::LateralPeriodic;
            be.face = 0;
        } else if (near(a.x(), 1) && near(b.x(), 1)) {
            be.tag = BoundaryTag::LateralPeriodic;
            be.face = 1;
        } else if (near(a.y(), 1) && near(b.y(), 1)) {
            be.tag = BoundaryTag::SNPlus;
        } else if (near(a.y(), -1) && near(b.y(), -1)) {
            be.tag = BoundaryTag::SNMinus;
        } else {
            const double scale = 2.0;  // diameter of Y in the y2 direction
            if (distance_to_solid_boundary(g, a) > kTagTol * scale ||
                distance_to_solid_boundary(g, b) > kTagTol * scale) {
                throw Error(ErrorKind::TagAmbiguity, "boundary edge matches no tag");
            }
            be.tag = BoundaryTag::GammaD;
        }
        m.boundary_edges.push_back(be);
    }
}

void pair_lateral_faces(Mesh& m) {
    m.periodic_partner.assign(m.vertices.size(), -1);
    std::vector<int> left, right;
    for (int v = 0; v < m.num_vertices(); ++v) {
        if (near(m.vertices[v].x(), 0)) left.push_back(v);
        if (near(m.vertices[v].x(), 1)) right.push_back(v);
    }
    auto by_y = [&](int a, int b) { return m.vertices[a].y() < m.vertices[b].y(); };
    std::sort(left.begin(), left.end(), by_y);
    std::sort(right.begin(), right.end(), by_y);
    if (left.size() != right.size()) {
        throw Error(ErrorKind::MeshingFailed, "lateral faces are not meshed identically");
    }
    for (std::size_t k = 0; k < left.size(); ++k) {
        const Vec2 d = m.vertices[right[k]] - m.vertices[left[k]];
        if (std::abs(d.x() - 1.0) > 1e-12 || std::abs(d.y()) > 1e-12) {
            throw Error(ErrorKind::MeshingFailed, "lateral face nodes do not match");
        }
        m.periodic_partner[left[k]] = right[k];
        m.periodic_partner[right[k]] = left[k];
    }
}

}  // namespace

Mesh build_cell_mesh(const CellGeometry& geom, double h) {
    check_h(h);
    geom.validate();
    const auto [ylo, yhi] = channel_of(geom);
    const int nh = divisions(1.0, h);
    TriangleSoup soup;

    if (auto inc = inclusion_of(geom)) {
        const auto lay = layout_inclusion(*inc, ylo, yhi, h);
        add_ring(soup, lay.inner, lay.box, ring_layers(lay.inner, lay.box, h));
        if (lay.box_y1 < yhi - 1e-12) {
            structured_block(soup, 0, 1, lay.nh, lay.box_y1, yhi, divisions(yhi - lay.box_y1, h));
        }
        if (lay.box_y0 > ylo + 1e-12) {
            structured_block(soup, 0, 1, lay.nh, ylo, lay.box_y0, divisions(lay.box_y0 - ylo, h));
        }
    } else {
        structured_block(soup, 0, 1, nh, ylo, yhi, divisions(yhi - ylo, h));
    }

    Mesh m = finalize(soup, h);
    tag_cell_boundary(m, geom);
    pair_lateral_faces(m);
    return m;
}

Mesh build_solid_mesh(const CellGeometry& geom, double h) {
    check_h(h);
    geom.validate();
    TriangleSoup soup;
    const int nh = divisions(1.0, h);
    if (const auto* s = std::get_if<Slabs>(&geom.solid)) {
        const int ns = divisions(s->delta, h);
        structured_block(soup, 0, 1, nh, 1 - s->delta, 1, ns);
        structured_block(soup, 0, 1, nh, -1, -1 + s->delta, ns);
    }
    if (auto inc = inclusion_of(geom)) {
        const auto [ylo, yhi] = channel_of(geom);
        const auto lay = layout_inclusion(*inc, ylo, yhi, h);
        double mean_r = 0;
        for (const auto& p : lay.inner) mean_r += (p - inc->center).norm();
        mean_r /= static_cast<double>(lay.inner.size());
        const int rings = divisions(mean_r, h);
        auto scaled = [&](double s) {
            std::vector<Vec2> out;
            for (const auto& p : lay.inner) out.push_back(inc->center + s * (p - inc->center));
            return out;
        };
        for (int k = rings; k > 1; --k) {
            add_ring(soup, scaled(static_cast<double>(k - 1) / rings),
                     scaled(static_cast<double>(k) / rings), 1);
        }
        const auto core = scaled(1.0 / rings);
        for (std::size_t j = 0; j < core.size(); ++j) {
            soup.add(inc->center, core[j], core[(j + 1) % core.size()]);
        }
    }
    Mesh m = finalize(soup, h);
    m.periodic_partner.assign(m.vertices.size(), -1);
    return m;
}

}  // namespace thinlayer
