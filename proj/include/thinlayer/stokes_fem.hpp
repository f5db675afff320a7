#pragma once

// Taylor-Hood discretization and saddle-point solver for Stokes systems with
// symmetric-gradient viscosity, slip constraints, Robin friction, traction
// boundaries and periodic lateral coupling.

#include "thinlayer/fe_space.hpp"
#include "thinlayer/linalg.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace thinlayer {

enum class PressureGauge { ZeroMean, Ungauged };
enum class ViscousForm { SymmetricGradient, FullGradient };

using VectorFn = std::function<Vec2(const Vec2&)>;
using ScalarFn = std::function<double(const Vec2&)>;
/// Boundary field evaluated at a point with the outward unit normal there.
using BoundaryVectorFn = std::function<Vec2(const Vec2& x, const Vec2& n)>;

struct StokesDiscretization {
    std::shared_ptr<const Mesh> mesh;
    P2Layout layout;
    ConstraintSet constraints;
    ConstrainedSpace space;
    PressureGauge gauge = PressureGauge::Ungauged;
    bool with_pressure = true;

    int velocity_size() const { return 2 * layout.num_nodes(); }
    int pressure_size() const { return layout.num_vertices; }
};

using DiscretizationPtr = std::shared_ptr<const StokesDiscretization>;

DiscretizationPtr make_discretization(std::shared_ptr<const Mesh> mesh, const ConstraintSet& constraints,
                                      PressureGauge gauge, bool with_pressure = true);

struct StokesProblemData {
    double mu = 1.0;
    ViscousForm form = ViscousForm::SymmetricGradient;
    VectorFn f;                  // body force; empty means zero
    BoundaryVectorFn g;          // tangential stress on the slip tags; normal part is dropped
    double c_slip = 0.0;         // Robin coefficient on the slip tags
    std::vector<BoundaryTag> slip_tags{BoundaryTag::GammaD};
    ScalarFn p_b;                // traction pressure on the traction tags; empty means zero
    std::vector<BoundaryTag> traction_tags{BoundaryTag::GammaN, BoundaryTag::SNPlus,
                                           BoundaryTag::SNMinus};
    /// Right side of the divergence equation: -(q, div_rhs). Empty means zero.
    ScalarFn div_rhs;
};

struct SaddleSystem {
    DiscretizationPtr disc;
    SpMat A_visc, A_slip;  // full velocity blocks
    SpMat B;               // full pressure x velocity, B = -(q, div phi)
    Eigen::VectorXd F;     // full velocity load
    Eigen::VectorXd G;     // full pressure load
    SpMat K;               // reduced KKT matrix
    Eigen::VectorXd rhs;   // reduced right side
    int nu = 0, np = 0;    // reduced velocity/pressure sizes
    bool gauge_row = false;

    /// Reduced right side for another full velocity load (same matrix).
    Eigen::VectorXd reduce_rhs(const Eigen::VectorXd& F_full,
                               const Eigen::VectorXd& G_full = Eigen::VectorXd()) const;
    /// Expand a reduced unknown vector to [u_full; p_full].
    Eigen::VectorXd expand(const Eigen::VectorXd& x) const;
};

SaddleSystem assemble(DiscretizationPtr disc, const StokesProblemData& data);

struct StokesField {
    DiscretizationPtr disc;
    Eigen::VectorXd u;  // 2 * nodes
    Eigen::VectorXd p;  // vertices (empty without pressure)
    double residual = 0.0;

    const Mesh& mesh() const { return *disc->mesh; }
    Vec2 velocity(int elem, const Vec3& bary) const { return eval_velocity(disc->layout, u, elem, bary); }
    double pressure(int elem, const Vec3& bary) const {
        return p.size() ? eval_pressure(*disc->mesh, p, elem, bary) : 0.0;
    }
};

/// Factorizes once; reusable for several right sides.
/// Throws SingularSystemError (near-null vector expanded to [u_full; p_full])
/// when the reduced system is singular.
class StokesSolver {
public:
    explicit StokesSolver(const SaddleSystem& sys);
    StokesField solve() const;
    StokesField solve(const Eigen::VectorXd& F_full, const Eigen::VectorXd& G_full = Eigen::VectorXd()) const;
    const KktFactorization& factorization() const { return *lu_; }
    const SaddleSystem& system() const { return *sys_; }

private:
    StokesField finish(const Eigen::VectorXd& rhs) const;
    std::shared_ptr<const SaddleSystem> sys_;
    std::shared_ptr<KktFactorization> lu_;
};

StokesField solve(const SaddleSystem& sys);

/// Full load vectors for a given problem data (used for repeated right sides).
Eigen::VectorXd assemble_velocity_load(const StokesDiscretization& disc, const StokesProblemData& data);

struct EnergyReport {
    double viscous = 0;          // 2 mu int D(u):D(u)  (or mu |grad u|^2)
    double slip = 0;             // c_slip int |u|^2 over slip tags
    double work_force = 0;       // int f.u
    double work_stress = 0;      // int g.u over slip tags
    double work_traction = 0;    // -int p_b n.u over traction tags
    double external_work() const { return work_force + work_stress + work_traction; }
    double balance_defect() const;  // relative |viscous + slip - work|
};

EnergyReport energy(const StokesField& field, const StokesProblemData& data);

/// Integrals of a discrete field.
Vec2 integrate_velocity(const StokesField& field);
double integrate_pressure(const StokesField& field);
double l2_norm_velocity(const StokesField& field);
double h1_seminorm_velocity(const StokesField& field);
double boundary_l2_norm_velocity(const StokesField& field, BoundaryTag tag);
/// int D(u):D(v)
double symgrad_inner(const StokesField& a, const StokesField& b);
/// int grad u : grad v
double grad_inner(const StokesField& a, const StokesField& b);
/// Max over constrained boundary nodes of |u.n|.
double max_normal_violation(const StokesField& field);
/// Norm of the divergence residual over all pressure test functions (reduced).
double divergence_residual(const StokesField& field);

/// Full-space matrices for eigenproblems.
SpMat velocity_mass_matrix(const StokesDiscretization& disc);
SpMat pressure_mass_matrix(const StokesDiscretization& disc);
SpMat viscous_matrix(const StokesDiscretization& disc, ViscousForm form, double mu = 1.0);
SpMat boundary_mass_matrix(const StokesDiscretization& disc, const std::vector<BoundaryTag>& tags);
/// int_tags (u.n)(v.n) with edge normals.
SpMat boundary_normal_mass_matrix(const StokesDiscretization& disc, const std::vector<BoundaryTag>& tags);
SpMat divergence_matrix(const StokesDiscretization& disc);

/// Discrete inf-sup constant: sqrt of the smallest eigenvalue of the pressure
/// Schur complement against the pressure mass matrix.
double estimate_inf_sup(DiscretizationPtr disc);

}  // namespace thinlayer
