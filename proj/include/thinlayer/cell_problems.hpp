#pragma once

// Reference-cell problems on Y_f and the effective quantities built from them.
// Cell problems are posed with unit viscosity; mu only enters through the
// Robin coefficient alpha / mu of the critical regime.

#include "thinlayer/stokes_fem.hpp"

#include <optional>
#include <string>

namespace thinlayer {

enum class GammaClass { BelowMinusOne, EqualMinusOne, AboveMinusOne };
enum class SnClass { Empty, Nonempty };

/// Condition that the regime puts on Gamma_D in the cell problems.
enum class CellBoundary { PureSlip, RobinSlip, NoSlip };

std::string_view to_string(GammaClass c);
std::string_view to_string(SnClass c);
std::string_view to_string(CellBoundary c);

struct RegimeDescriptor {
    double alpha = 0.0;
    double gamma = 0.0;
    double mu = 1.0;
    GammaClass gamma_class = GammaClass::AboveMinusOne;
    SnClass sn_class = SnClass::Empty;

    /// Classifies gamma and reads S_N from the cell mesh tags.
    static RegimeDescriptor classify(double alpha, double gamma, const Mesh& cell_mesh, double mu = 1.0);

    CellBoundary cell_boundary() const;
    /// Robin coefficient of the cell problems (alpha / mu when critical, else 0).
    double robin_coefficient() const;
    PressureGauge gauge() const {
        return sn_class == SnClass::Empty ? PressureGauge::ZeroMean : PressureGauge::Ungauged;
    }
};

/// Constrained P2/P1 space for the cell problems of a regime.
DiscretizationPtr make_cell_discretization(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime);
/// Problem data with the regime's Gamma_D terms and traction-free S_N.
StokesProblemData cell_problem_data(const RegimeDescriptor& regime);

/// Unit tangent (-n2, n1) on Gamma_D; the default g_GammaD.
Vec2 unit_tangent_field(const Vec2& y, const Vec2& n);
/// Tangential part of e_1.
Vec2 tangential_e1_field(const Vec2& y, const Vec2& n);

StokesField solve_unit_force_cell(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime, int axis);
/// All w_i with one shared factorization.
std::vector<StokesField> solve_unit_force_cells(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime);
/// Zero fields in the no-slip regime, where the boundary stress drops out.
StokesField solve_boundary_stress_cell(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime,
                                       const BoundaryVectorFn& g_gamma);
/// Throws RegimeMismatch when S_N is empty.
StokesField solve_normal_pressure_cell(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime,
                                       const ScalarFn& p_bN);
/// Vector Laplace problem without pressure: zero normal trace and zero
/// tangential flux on Gamma_D, natural on S_N, periodic. Axis must be < dim-1.
StokesField solve_auxiliary_h(std::shared_ptr<const Mesh> mesh, int axis);

struct CellProblemInputs {
    BoundaryVectorFn g_gamma = unit_tangent_field;
    ScalarFn p_bN = [](const Vec2&) { return 1.0; };
    bool with_h = true;  // skipped anyway when A4 fails
};

struct CellSolutionSet {
    RegimeDescriptor regime;
    CellProblemInputs inputs;
    std::shared_ptr<const Mesh> mesh;
    std::vector<StokesField> w;          // w_1 .. w_n
    StokesField w_gamma;                 // w_GammaD
    std::optional<StokesField> w_n;      // w_N, iff S_N nonempty
    std::vector<StokesField> h;          // h_1 .. h_{n-1}; empty when A4 fails
};

CellSolutionSet solve_cell_problems(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime,
                                    const CellProblemInputs& inputs = {});

struct EffectiveLaw {
    RegimeDescriptor regime;
    Mat2 K_sym = Mat2::Zero();   // int D(w_i):D(w_j)
    Mat2 K_avg = Mat2::Zero();     // (i,j) = int w_i^j
    Vec2 beta = Vec2::Zero();
    std::optional<Vec2> kappa;
    Eigen::MatrixXd B;             // (n-1)x(n-1); empty without h fields
    Eigen::MatrixXd B_from_average;  // (i,j) = int h_i^j
    double factor_defect = 0.0;    // max |K_avg - 2 K_sym|
    double h = 0.0;
};

EffectiveLaw assemble_effective_law(const CellSolutionSet& cells);

/// Convenience: mesh, solve and assemble in one call.
EffectiveLaw compute_effective_law(const CellGeometry& geom, double h, double alpha, double gamma,
                                   double mu = 1.0, const CellProblemInputs& inputs = {});

}  // namespace thinlayer
