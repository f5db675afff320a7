#pragma once

// Microscopic Stokes problem on the thin layer, pressure extension, and
// two-scale comparison with the homogenized limit.

#include "thinlayer/macro_darcy.hpp"

#include <vector>

namespace thinlayer {

/// How the slip condition with gamma < -1 is imposed on Gamma_D^eps.
enum class MicroTraceMode {
    Robin,       // coefficient alpha * eps^gamma
    StrongZero,  // u = 0, the formal limit of the Robin term
};

struct MicroData {
    double eps = 0.25;
    double mu = 1.0;
    double alpha = 0.0;
    double gamma = 0.0;
    VectorFn f;
    ScalarFn p_b;
    BoundaryVectorFn g;
    MicroTraceMode trace_mode = MicroTraceMode::Robin;

    double slip_coefficient() const;
    bool strong_trace() const { return trace_mode == MicroTraceMode::StrongZero && alpha > 0 && gamma < -1; }

    /// f = f0(x1), p_b = p_b(x1) + eps p_bSigma1(x1) p_bN(x/eps),
    /// g = eps g_Sigma(x1) g_GammaD(x/eps).
    static MicroData from_macro(const MacroData& macro, double eps, double alpha, double gamma,
                                const CellProblemInputs& cell_inputs, bool sn_nonempty);
};

/// Reference cell coordinates of a layer point.
Vec2 unfold_point(const Vec2& x, double eps);

StokesField solve_micro(std::shared_ptr<const Mesh> layer_mesh, const MicroData& data);
StokesField solve_micro(const LayerGeometry& layer, const MicroData& data, double h);
StokesProblemData micro_problem_data(const MicroData& data);

struct ExtendedPressure {
    std::vector<double> cell_average;  // fluid average of p - p_b per cell
    double fluid_l2 = 0.0;             // ||p - p_b|| on Omega^eps
    double solid_l2 = 0.0;             // solid part of Omega_M^eps
    double l2 = 0.0;                   // ||P^eps|| on Omega_M^eps
    double solid_cell_area = 0.0;      // |eps Y_s| per cell
};

/// P^eps = p - p_b in the fluid, fluid cell average in each scaled solid cell.
ExtendedPressure extend_pressure(const StokesField& field, const ScalarFn& p_b);

struct TwoScaleError {
    double velocity = 0.0;  // (eps^-1 int |eps^-2 u - u0(x1, x/eps)|^2)^(1/2)
    double pressure = 0.0;  // (eps^-1 int |p - p0(x1)|^2)^(1/2)
    double velocity_reference = 0.0;  // (eps^-1 int |u0|^2)^(1/2)
    double unfolded_measure = 0.0;    // sum of unfolded element areas
};

/// Elementwise unfolding; the layer mesh must be built from the cell mesh of
/// the reconstruction. Throws RegimeMismatch otherwise.
TwoScaleError two_scale_error(const StokesField& field, const TwoScaleReconstruction& rec);

struct SweepEntry {
    double eps = 0.0;
    int unknowns = 0;
    double u_l2 = 0.0, grad_l2 = 0.0, trace_l2 = 0.0, pressure_ext_l2 = 0.0;
    double u_ratio = 0.0;      // u_l2 / eps^(5/2)
    double grad_ratio = 0.0;   // grad_l2 / eps^(3/2)
    double trace_ratio = 0.0;  // trace_l2 / min(eps^2, eps^((3-gamma)/2))
    double pressure_ratio = 0.0;  // pressure_ext_l2 / eps^(1/2)
    double trace_scaled = 0.0;    // trace_l2 / eps^2
    TwoScaleError error;
    double energy_defect = 0.0;
    double residual = 0.0;
    double seconds = 0.0;
};

struct SweepReport {
    std::vector<SweepEntry> entries;
    bool velocity_error_decreasing() const;
    /// max/min of a ratio column across the sweep.
    double spread(double SweepEntry::*column) const;
};

struct SweepSetup {
    CellGeometry cell;
    double L1 = 1.0;
    double h_cell = 1.0 / 32;
    std::vector<double> eps{0.25, 0.125, 0.0625};
    double alpha = 0.0, gamma = 0.0, mu = 1.0;
    MacroData macro;
    CellProblemInputs cell_inputs;
    MicroTraceMode trace_mode = MicroTraceMode::Robin;
    int sigma_elements = 64;
    int jobs = 1;  // concurrent micro solves
};

/// Cell problems, Darcy solve and the micro sweep. Entries follow `eps` order,
/// which must be strictly decreasing. Micro solves share only immutable data.
SweepReport run_sweep(const SweepSetup& setup);

}  // namespace thinlayer
