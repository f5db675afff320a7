#include "thinlayer/cell_problems.hpp"

#include "thinlayer/errors.hpp"

#include <cmath>

namespace thinlayer {

std::string_view to_string(GammaClass c) {
    switch (c) {
        case GammaClass::BelowMinusOne: return "below_minus1";
        case GammaClass::EqualMinusOne: return "equal_minus1";
        case GammaClass::AboveMinusOne: return "above_minus1";
    }
    return "?";
}

std::string_view to_string(SnClass c) { return c == SnClass::Empty ? "empty" : "nonempty"; }

std::string_view to_string(CellBoundary c) {
    switch (c) {
        case CellBoundary::PureSlip: return "pure_slip";
        case CellBoundary::RobinSlip: return "robin_slip";
        case CellBoundary::NoSlip: return "no_slip";
    }
    return "?";
}

RegimeDescriptor RegimeDescriptor::classify(double alpha, double gamma, const Mesh& cell_mesh, double mu) {
    if (!(alpha >= 0) || !std::isfinite(alpha) || !std::isfinite(gamma) || !(mu > 0)) {
        throw Error(ErrorKind::RegimeMismatch, "alpha must be finite and >= 0, gamma finite, mu > 0");
    }
    RegimeDescriptor r;
    r.alpha = alpha;
    r.gamma = gamma;
    r.mu = mu;
    r.gamma_class = gamma < -1.0   ? GammaClass::BelowMinusOne
                    : gamma == -1.0 ? GammaClass::EqualMinusOne
                                    : GammaClass::AboveMinusOne;
    r.sn_class = (cell_mesh.has_tag(BoundaryTag::SNPlus) || cell_mesh.has_tag(BoundaryTag::SNMinus))
                     ? SnClass::Nonempty
                     : SnClass::Empty;
    return r;
}

CellBoundary RegimeDescriptor::cell_boundary() const {
    if (alpha == 0.0) return CellBoundary::PureSlip;
    switch (gamma_class) {
        case GammaClass::BelowMinusOne: return CellBoundary::NoSlip;
        case GammaClass::EqualMinusOne: return CellBoundary::RobinSlip;
        case GammaClass::AboveMinusOne: return CellBoundary::PureSlip;
    }
    return CellBoundary::PureSlip;
}

double RegimeDescriptor::robin_coefficient() const {
    return cell_boundary() == CellBoundary::RobinSlip ? alpha / mu : 0.0;
}

DiscretizationPtr make_cell_discretization(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime) {
    ConstraintSet cs;
    if (regime.cell_boundary() == CellBoundary::NoSlip) cs.strong_zero = {BoundaryTag::GammaD};
    else cs.normal_zero = {BoundaryTag::GammaD};
    return make_discretization(std::move(mesh), cs, regime.gauge());
}

StokesProblemData cell_problem_data(const RegimeDescriptor& regime) {
    StokesProblemData d;
    d.mu = 1.0;
    d.c_slip = regime.robin_coefficient();
    d.slip_tags = {BoundaryTag::GammaD};
    d.traction_tags = {BoundaryTag::SNPlus, BoundaryTag::SNMinus};
    return d;
}

Vec2 unit_tangent_field(const Vec2&, const Vec2& n) { return Vec2(-n.y(), n.x()); }

Vec2 tangential_e1_field(const Vec2&, const Vec2& n) { return Vec2(1.0, 0.0) - n.x() * n; }

namespace {

StokesField zero_field(const DiscretizationPtr& disc) {
    StokesField f;
    f.disc = disc;
    f.u = Eigen::VectorXd::Zero(disc->velocity_size());
    if (disc->with_pressure) f.p = Eigen::VectorXd::Zero(disc->pressure_size());
    return f;
}

VectorFn unit_force(int axis) {
    return [axis](const Vec2&) { return Vec2(axis == 0 ? 1.0 : 0.0, axis == 1 ? 1.0 : 0.0); };
}

void check_axis(int axis, int limit) {
    if (axis < 0 || axis >= limit) throw Error(ErrorKind::RegimeMismatch, "axis index out of range");
}

}  // namespace

StokesField solve_unit_force_cell(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime, int axis) {
    check_axis(axis, 2);
    auto disc = make_cell_discretization(std::move(mesh), regime);
    StokesProblemData data = cell_problem_data(regime);
    data.f = unit_force(axis);
    return solve(assemble(disc, data));
}

std::vector<StokesField> solve_unit_force_cells(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime) {
    auto disc = make_cell_discretization(std::move(mesh), regime);
    StokesProblemData data = cell_problem_data(regime);
    const StokesSolver solver(assemble(disc, data));
    std::vector<StokesField> out;
    for (int i = 0; i < 2; ++i) {
        data.f = unit_force(i);
        out.push_back(solver.solve(assemble_velocity_load(*disc, data)));
    }
    return out;
}

StokesField solve_boundary_stress_cell(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime,
                                       const BoundaryVectorFn& g_gamma) {
    auto disc = make_cell_discretization(std::move(mesh), regime);
    if (regime.cell_boundary() == CellBoundary::NoSlip || !g_gamma) return zero_field(disc);
    StokesProblemData data = cell_problem_data(regime);
    data.g = g_gamma;
    return solve(assemble(disc, data));
}

StokesField solve_normal_pressure_cell(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime,
                                       const ScalarFn& p_bN) {
    if (regime.sn_class == SnClass::Empty) {
        throw Error(ErrorKind::RegimeMismatch, "the normal pressure cell problem needs a nonempty S_N");
    }
    auto disc = make_cell_discretization(std::move(mesh), regime);
    StokesProblemData data = cell_problem_data(regime);
    data.p_b = p_bN;
    return solve(assemble(disc, data));
}

StokesField solve_auxiliary_h(std::shared_ptr<const Mesh> mesh, int axis) {
    check_axis(axis, 1);
    ConstraintSet cs;
    cs.normal_zero = {BoundaryTag::GammaD};
    auto disc = make_discretization(std::move(mesh), cs, PressureGauge::Ungauged, false);
    StokesProblemData data;
    data.form = ViscousForm::FullGradient;
    data.f = unit_force(axis);
    data.traction_tags.clear();
    return solve(assemble(disc, data));
}

CellSolutionSet solve_cell_problems(std::shared_ptr<const Mesh> mesh, const RegimeDescriptor& regime,
                                    const CellProblemInputs& inputs) {
    CellSolutionSet s;
    s.regime = regime;
    s.inputs = inputs;
    s.mesh = mesh;
    s.w = solve_unit_force_cells(mesh, regime);
    s.w_gamma = solve_boundary_stress_cell(mesh, regime, inputs.g_gamma);
    if (regime.sn_class == SnClass::Nonempty) s.w_n = solve_normal_pressure_cell(mesh, regime, inputs.p_bN);
    if (inputs.with_h && mesh->has_tag(BoundaryTag::GammaD) && check_assumption_a4(*mesh).satisfied) {
        s.h.push_back(solve_auxiliary_h(mesh, 0));
    }
    return s;
}

EffectiveLaw assemble_effective_law(const CellSolutionSet& cells) {
    EffectiveLaw law;
    law.regime = cells.regime;
    law.h = cells.mesh ? cells.mesh->h : 0.0;
    const int n = static_cast<int>(cells.w.size());
    for (int i = 0; i < n; ++i) {
        const Vec2 avg = integrate_velocity(cells.w[i]);
        for (int j = 0; j < n; ++j) {
            law.K_avg(i, j) = avg[j];
            law.K_sym(i, j) = symgrad_inner(cells.w[i], cells.w[j]);
        }
    }
    law.factor_defect = (law.K_avg - 2.0 * law.K_sym).cwiseAbs().maxCoeff();
    if (cells.w_gamma.disc) law.beta = integrate_velocity(cells.w_gamma);
    if (cells.w_n) law.kappa = integrate_velocity(*cells.w_n);
    const int m = static_cast<int>(cells.h.size());
    if (m > 0) {
        law.B.resize(m, m);
        law.B_from_average.resize(m, m);
        for (int i = 0; i < m; ++i) {
            const Vec2 avg = integrate_velocity(cells.h[i]);
            for (int j = 0; j < m; ++j) {
                law.B(i, j) = grad_inner(cells.h[i], cells.h[j]);
                law.B_from_average(i, j) = avg[j];
            }
        }
    }
    return law;
}

EffectiveLaw compute_effective_law(const CellGeometry& geom, double h, double alpha, double gamma, double mu,
                                   const CellProblemInputs& inputs) {
    auto mesh = std::make_shared<const Mesh>(build_cell_mesh(geom, h));
    const auto regime = RegimeDescriptor::classify(alpha, gamma, *mesh, mu);
    return assemble_effective_law(solve_cell_problems(mesh, regime, inputs));
}

}  // namespace thinlayer
