#pragma once

// Darcy law on Sigma = (0, L1) for the macroscopic pressure p0, the Darcy
// velocity, and the two-scale reconstruction (u0, p1) from the cell solutions.

#include "thinlayer/cell_problems.hpp"

#include <functional>
#include <vector>

namespace thinlayer {

using MacroScalarFn = std::function<double(double)>;
using MacroVectorFn = std::function<Vec2(double)>;

struct MacroData {
    MacroVectorFn f0;          // empty means zero
    MacroScalarFn g_sigma;     // empty means zero
    MacroScalarFn p_b_sigma1;  // used iff S_N is nonempty; empty means zero
    MacroScalarFn p_b;         // Dirichlet datum; empty means zero
    MacroScalarFn dp_b;        // derivative of p_b; differenced numerically when empty
    double mu = 1.0;

    Vec2 force(double x) const { return f0 ? f0(x) : Vec2::Zero(); }
    double g(double x) const { return g_sigma ? g_sigma(x) : 0.0; }
    double pb1(double x) const { return p_b_sigma1 ? p_b_sigma1(x) : 0.0; }
    double pb(double x) const { return p_b ? p_b(x) : 0.0; }
    double dpb(double x) const;
};

/// Nodes of a 1D mesh of Sigma, strictly increasing.
struct SigmaMesh {
    std::vector<double> x;

    static SigmaMesh uniform(double length, int elements);
    int elements() const { return static_cast<int>(x.size()) - 1; }
    /// Element containing x (clamped to the mesh).
    int locate(double xx) const;
};

struct DarcySolution {
    SigmaMesh mesh;
    Eigen::VectorXd p0;      // nodal values
    EffectiveLaw law;
    MacroData data;
    double residual = 0.0;   // max interior |int u_bar^1 q'|

    double p0_at(double x) const;
    double dp0_at(double x) const;  // elementwise constant
    /// Coefficients of (w_1, w_2, w_GammaD, w_N) in mu * u0 at x.
    Eigen::Vector4d coefficients(double x) const;
    Vec2 u_bar(double x) const;
};

/// P1 Galerkin solve with K_avg; throws DegenerateTensor unless K_avg(0,0) > 0,
/// RegimeMismatch when a Robin law was computed for another viscosity.
DarcySolution solve_darcy(const EffectiveLaw& law, const MacroData& data, const SigmaMesh& mesh);

/// Limit fields (u0, p1) at a macro point and a cell point.
class TwoScaleReconstruction {
public:
    TwoScaleReconstruction(const DarcySolution& sol, const CellSolutionSet& cells);

    Vec2 u0(double x, int cell_elem, const Vec3& bary) const;
    double p1(double x, int cell_elem, const Vec3& bary) const;
    /// Locates y in the cell mesh; returns false outside Y_f.
    bool evaluate(double x, const Vec2& y, Vec2& u, double& p) const;

    /// Full cell-space coefficient vectors of u0(x, .) and p1(x, .).
    Eigen::VectorXd u0_coefficients(double x) const;
    Eigen::VectorXd p1_coefficients(double x) const;

    const DarcySolution& darcy() const { return sol_; }
    const CellSolutionSet& cells() const { return cells_; }

private:
    DarcySolution sol_;
    CellSolutionSet cells_;
    std::shared_ptr<const PointLocator> locator_;
};

TwoScaleReconstruction reconstruct_two_scale(const DarcySolution& sol, const CellSolutionSet& cells);

/// Test field a(x) phi(y) with phi a cell velocity in the w_i space.
struct TwoScaleTestField {
    MacroScalarFn amplitude;
    MacroScalarFn d_amplitude;
    Eigen::VectorXd phi;  // full cell velocity vector
};

struct TwoPressureResidual {
    std::vector<double> residual;        // per test field
    std::vector<double> relative;        // residual over the largest term
    std::vector<double> p1_term;         // -int int p1 div_y phi
    std::vector<double> p0_term;         // -int int (p0 - p_b) div_x phi
    double darcy_constraint = 0.0;       // DarcySolution::residual
};

/// Two-pressure weak-form residual of (u0, p0, p1) for each test field.
/// Throws RegimeMismatch when a test field violates the Gamma_D constraint.
TwoPressureResidual verify_two_pressure_residual(const TwoScaleReconstruction& rec,
                                                 const std::vector<TwoScaleTestField>& tests);

}  // namespace thinlayer
