#pragma once

// Taylor-Hood P2/P1 spaces on straight triangles, quadrature, and the
// constraint map from reduced to full velocity unknowns.

#include "thinlayer/geometry.hpp"

#include <Eigen/Sparse>

#include <array>
#include <vector>

namespace thinlayer {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplets = std::vector<Eigen::Triplet<double>>;
using Vec3 = Eigen::Vector3d;

/// P2 node numbering: mesh vertices first, then one node per edge.
/// Local order on a triangle: vertices 0,1,2 then edges (0,1), (1,2), (2,0).
struct P2Layout {
    int num_vertices = 0;
    int num_edges = 0;
    std::vector<std::array<int, 6>> element_nodes;
    std::vector<std::array<int, 2>> edge_vertices;
    std::vector<int> boundary_edge_node;  // midpoint node of mesh.boundary_edges[k]
    std::vector<Vec2> node_coords;
    std::vector<int> node_partner;  // periodic image or -1

    int num_nodes() const { return num_vertices + num_edges; }
};

P2Layout build_p2_layout(const Mesh& mesh);

/// Six-point rule exact for degree 4 on triangles (barycentric points, weights sum to 1).
struct TriangleQuadrature {
    static constexpr int size = 6;
    static const std::array<Vec3, size>& points();
    static const std::array<double, size>& weights();
};

/// Three-point Gauss rule on [0,1].
struct EdgeQuadrature {
    static constexpr int size = 3;
    static const std::array<double, size>& points();
    static const std::array<double, size>& weights();
};

/// Affine element data.
struct ElementMap {
    std::array<Vec2, 3> x;
    std::array<Vec2, 3> grad_lambda;
    double area = 0;

    ElementMap(const Mesh& mesh, int t);
    Vec2 point(const Vec3& bary) const { return bary[0] * x[0] + bary[1] * x[1] + bary[2] * x[2]; }
};

/// P2 shape functions and gradients at a barycentric point.
struct P2Values {
    std::array<double, 6> phi{};
    std::array<Vec2, 6> grad{};
};
P2Values p2_values(const ElementMap& em, const Vec3& bary);

/// P2 shape functions along an edge, parameter t in [0,1]: (start, end, mid).
std::array<double, 3> p2_edge_values(double t);

/// Constraint description for the velocity space.
struct ConstraintSet {
    std::vector<BoundaryTag> normal_zero;
    std::vector<BoundaryTag> strong_zero;
    bool periodic = true;
    double corner_threshold_deg = kCornerThresholdDegrees;
};

enum class NodeKind : char { Free, NormalZero, StrongZero };

/// u_full = T * u_reduced for velocities, p_full = Tp * p_reduced for pressures.
struct ConstrainedSpace {
    SpMat T;
    SpMat Tp;
    NormalField vertex_normals;
    std::vector<NodeKind> kind;      // per P2 node
    std::vector<Vec2> node_normal;   // per P2 node, zero unless NormalZero/pinned corner
};

ConstrainedSpace build_constrained_space(const Mesh& mesh, const P2Layout& layout,
                                         const ConstraintSet& constraints);

/// Point evaluation helpers on full coefficient vectors (velocity: 2*node + comp).
Vec2 eval_velocity(const P2Layout& layout, const Eigen::VectorXd& u, int elem, const Vec3& bary);
Eigen::Matrix2d eval_velocity_gradient(const P2Layout& layout, const ElementMap& em,
                                       const Eigen::VectorXd& u, int elem, const Vec3& bary);
double eval_pressure(const Mesh& mesh, const Eigen::VectorXd& p, int elem, const Vec3& bary);

/// Element lookup by coordinates (bucket grid over the mesh bounding box).
class PointLocator {
public:
    explicit PointLocator(const Mesh& mesh);
    /// Returns false if the point lies outside the mesh (beyond a small tolerance).
    bool locate(const Vec2& x, int& elem, Vec3& bary) const;

private:
    const Mesh* mesh_;
    Vec2 lo_, hi_;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> buckets_;
};

}  // namespace thinlayer
