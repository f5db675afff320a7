#pragma once

// Constants of the functional inequalities, discrete Bogovskii operator and
// the restriction operator for the thin layer.

#include "thinlayer/stokes_fem.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace thinlayer {

enum class InequalityId { KornNormalTrace, PoincareHn, TraceScaled };
std::string_view to_string(InequalityId id);

struct ConstantEstimate {
    InequalityId id = InequalityId::KornNormalTrace;
    double eigenvalue = 0.0;  // extremal Rayleigh quotient
    double value = 0.0;       // constant of the inequality
    Eigen::VectorXd field;    // extremal field, full velocity vector, mass-normalized
    DiscretizationPtr disc;
    double h = 0.0;
};

/// Rayleigh quotients below this count as a kernel (the constant is infinite).
inline constexpr double kKernelEigenvalue = 1e-10;

enum class KornConstraint { NormalZeroGammaD, PeriodicNormalZero };

/// min int D:D / int |u|^2 over the constrained space; value = eigenvalue^(-1/2)
/// (infinite on a kernel).
ConstantEstimate estimate_korn_constant(std::shared_ptr<const Mesh> mesh, KornConstraint constraint);

/// min (int |grad u|^2 + int_GammaD (u.n)^2) / int |u|^2 over periodic fields;
/// with `normal_zero` the space also satisfies u.n = 0 on Gamma_D.
ConstantEstimate estimate_poincare_constant(std::shared_ptr<const Mesh> mesh, bool normal_zero = false);

/// max eps int_tags |u|^2 / (int |u|^2 + eps^2 int |grad u|^2); eps is the mesh scale.
ConstantEstimate estimate_trace_constant(std::shared_ptr<const Mesh> mesh, const std::vector<BoundaryTag>& tags);

/// Cosine of the angle between a field and the constant e_axis field in L2.
double cosine_to_constant(const ConstantEstimate& est, int axis);

struct BogovskiiResult {
    StokesField field;
    double divergence_residual = 0.0;  // relative, over all P1 test functions
    double grad_norm = 0.0;
    double f_norm = 0.0;
    double constant() const { return f_norm > 0 ? grad_norm / f_norm : 0.0; }
};

/// Least-gradient-norm w with div w = f weakly against P1 and w = 0 on the whole
/// boundary of the mesh. One factorization serves all right sides.
class BogovskiiSolver {
public:
    explicit BogovskiiSolver(std::shared_ptr<const Mesh> mesh);
    /// Throws MeanNotZero unless int f vanishes (relative 1e-10).
    BogovskiiResult solve(const ScalarFn& f) const;
    /// Right side given as moments G_i = int f psi_i; `f_norm` is reported as given.
    BogovskiiResult solve_moments(const Eigen::VectorXd& moments, double f_norm) const;
    const DiscretizationPtr& discretization() const { return disc_; }

private:
    DiscretizationPtr disc_;
    std::shared_ptr<const StokesSolver> solver_;
    Eigen::VectorXd weights_;  // int psi_i
};

BogovskiiResult discrete_bogovskii(std::shared_ptr<const Mesh> mesh, const ScalarFn& f);

/// Field on Omega_M^eps with its Jacobian (row c = gradient of component c).
struct LayerVelocity {
    std::function<Vec2(const Vec2&)> value;
    std::function<Mat2(const Vec2&)> gradient;
};

/// (1 - (x2/eps)^2) times a random polynomial in (x1, x2/eps) of the given degree.
LayerVelocity random_polynomial_field(Rng& rng, double eps, int degree = 3);

struct RestrictionSetup {
    std::shared_ptr<const Mesh> cell_mesh;
    std::shared_ptr<const BogovskiiSolver> bogovskii;
    /// Face bumps on y1 = 0 (index 0) and y1 = 1 (index 1) as P2 coefficient
    /// vectors of the scalar bump (per node), normalized to unit face integral.
    std::array<Eigen::VectorXd, 2> phi;
    double fluid_area = 0.0;
    double strip_width = 0.0;

    /// Largest defects of: zero on Gamma_D, zero on the other face, unit flux, face compatibility.
    std::array<double, 4> invariant_defects() const;
};

RestrictionSetup make_restriction_setup(const CellGeometry& geom, double h);

struct RestrictedField {
    double eps = 0.0;
    std::vector<Eigen::VectorXd> cell_velocity;  // per cell, full P2 vector in cell coordinates
    double l2 = 0.0;                    // ||R v||_{L2(Omega^eps)}
    double grad_l2 = 0.0;               // ||grad R v||
    double source_grad_l2 = 0.0;        // ||grad v||_{L2(Omega_M^eps)}
    double divergence_residual = 0.0;   // max over cells and P1 tests, relative
    double ratio() const { return (l2 + eps * grad_l2) / (eps * source_grad_l2); }
};

/// Throws BogovskiiFailure when v does not vanish on the top and bottom of the layer.
RestrictedField build_restriction(const RestrictionSetup& setup, const LayerVelocity& v, double eps, double L1 = 1.0);

struct RestrictionNormEntry {
    double eps = 0.0;
    std::vector<double> ratios;
    double max_ratio = 0.0;
    double max_divergence_residual = 0.0;
};

/// Ratios over the given fields; fields with vanishing gradient are skipped.
RestrictionNormEntry restriction_norm_entry(const RestrictionSetup& setup, double eps,
                                            const std::vector<LayerVelocity>& fields, double L1 = 1.0);

/// Seeded random polynomial fields, the same coefficients for every eps.
std::vector<RestrictionNormEntry> restriction_norm_sweep(const RestrictionSetup& setup, const std::vector<double>& eps,
                                                         int fields, std::uint64_t seed, double L1 = 1.0);

}  // namespace thinlayer
