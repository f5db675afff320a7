#pragma once

// Reference cell, thin layer, and their triangulations.
//
// The reference cell is Y = (0,1) x (-1,1). The solid part Y_s is described by
// a small parametric family; the fluid part Y_f is its complement. Lateral
// faces y1 = 0 and y1 = 1 are identified periodically, the horizontal faces
// S^+ (y2 = 1) and S^- (y2 = -1) carry the S_N tags wherever fluid touches them.

#include <Eigen/Core>

#include <array>
#include <optional>
#include <variant>
#include <vector>

namespace thinlayer {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct Disk {
    Vec2 center{0.5, 0.0};
    double radius = 0.25;
};

/// Closed polygonal inclusion, vertices counter-clockwise. Must be star-shaped
/// with respect to its vertex centroid.
struct Polygon {
    std::vector<Vec2> vertices;

    Vec2 centroid() const;
    static Polygon regular(Vec2 center, double circumradius, int sides, double phase = 0.0);
};

/// Solid horizontal slabs of thickness `delta` along the top and bottom faces,
/// optionally with an inclusion inside the remaining channel.
struct Slabs {
    double delta = 0.25;
    std::optional<std::variant<Disk, Polygon>> inclusion;
};

struct NoSolid {};

using SolidShape = std::variant<Disk, Slabs, Polygon, NoSolid>;

struct CellGeometry {
    int dim = 2;
    SolidShape solid = Disk{};

    /// Throws MeshingFailed when the solid does not fit the cell.
    void validate() const;
    /// |Y_f| of the exact (curved) geometry.
    double exact_fluid_area() const;
    /// True when the fluid touches the top/bottom faces (S_N^+- nonempty).
    bool touches_horizontal_faces() const;
};

struct LayerGeometry {
    CellGeometry cell;
    std::vector<int> sigma_lengths{1};  // L_1, ..., L_{n-1}
    double eps = 0.25;

    /// Number of scaled cells along x1; throws MeshingFailed unless L1/eps is integral.
    int cells_per_row() const;
};

enum class BoundaryTag { GammaD, SNPlus, SNMinus, LateralPeriodic, GammaN };

struct BoundaryEdge {
    std::array<int, 2> v{};  // oriented so the fluid lies to the left
    BoundaryTag tag = BoundaryTag::GammaN;
    int face = -1;           // lateral face id: 0 for y1 = 0, 1 for y1 = 1
};

struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;  // counter-clockwise
    std::vector<BoundaryEdge> boundary_edges;
    /// periodic_partner[v] is the image of v under the lateral translation
    /// (left <-> right face), or -1.
    std::vector<int> periodic_partner;
    double h = 0.0;

    /// Layer meshes only: scale, and for every triangle the cell index and the
    /// triangle of the reference cell mesh it was copied from.
    double eps = 1.0;
    std::vector<int> element_cell;
    std::vector<int> element_reference;
    int cell_count = 1;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }
    double area() const;
    double triangle_area(int t) const;
    bool has_tag(BoundaryTag tag) const;
    double tagged_length(BoundaryTag tag) const;
    Vec2 edge_normal(const BoundaryEdge& e) const;
};

/// Averaged outward unit normals on a set of boundary tags.
struct NormalField {
    std::vector<Vec2> normal;     // per vertex; zero where the vertex is not on the tags
    std::vector<bool> on_boundary;
    std::vector<bool> corner;
};

inline constexpr double kCornerThresholdDegrees = 20.0;

/// With `merge_periodic`, the two images of a periodic vertex share one normal.
NormalField compute_normals(const Mesh& mesh, const std::vector<BoundaryTag>& tags,
                            double corner_threshold_deg = kCornerThresholdDegrees,
                            bool merge_periodic = true);

/// Conforming triangulation of Y_f with all boundary tags and periodic pairs.
Mesh build_cell_mesh(const CellGeometry& geom, double h);

/// Triangulation of Y_s sharing the node layout of `build_cell_mesh`
/// (empty mesh when there is no solid).
Mesh build_solid_mesh(const CellGeometry& geom, double h);

/// Mesh of the perforated layer built from eps-scaled copies of the cell mesh.
Mesh build_layer_mesh(const LayerGeometry& layer, double h);

struct A4Report {
    Mat2 moment_matrix = Mat2::Zero();
    int rank = 0;
    bool satisfied = false;
};

/// Moment matrix of the normals over Gamma_D and the span test.
A4Report check_assumption_a4(const Mesh& mesh);

}  // namespace thinlayer
