#include "thinlayer/micro_verify.hpp"

#include "thinlayer/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>

namespace thinlayer {

double MicroData::slip_coefficient() const { return alpha == 0.0 ? 0.0 : alpha * std::pow(eps, gamma); }

Vec2 unfold_point(const Vec2& x, double eps) {
    const double s = x.x() / eps;
    double y1 = s - std::floor(s);
    if (y1 > 1.0 - 1e-12) y1 = 0.0;
    return {y1, x.y() / eps};
}

MicroData MicroData::from_macro(const MacroData& macro, double eps, double alpha, double gamma,
                                const CellProblemInputs& cell_inputs, bool sn_nonempty) {
    MicroData d;
    d.eps = eps;
    d.mu = macro.mu;
    d.alpha = alpha;
    d.gamma = gamma;
    if (macro.f0) d.f = [f0 = macro.f0](const Vec2& x) { return f0(x.x()); };
    const auto pbN = cell_inputs.p_bN;
    if (macro.p_b || (sn_nonempty && macro.p_b_sigma1 && pbN)) {
        d.p_b = [macro, pbN, eps, sn_nonempty](const Vec2& x) {
            double v = macro.pb(x.x());
            if (sn_nonempty && macro.p_b_sigma1 && pbN) v += eps * macro.p_b_sigma1(x.x()) * pbN(unfold_point(x, eps));
            return v;
        };
    }
    if (macro.g_sigma && cell_inputs.g_gamma) {
        d.g = [gs = macro.g_sigma, gg = cell_inputs.g_gamma, eps](const Vec2& x, const Vec2& n) -> Vec2 {
            return eps * gs(x.x()) * gg(unfold_point(x, eps), n);
        };
    }
    return d;
}

StokesProblemData micro_problem_data(const MicroData& data) {
    StokesProblemData d;
    d.mu = data.mu;
    d.f = data.f;
    d.p_b = data.p_b;
    d.slip_tags = {BoundaryTag::GammaD};
    d.traction_tags = {BoundaryTag::GammaN};
    if (!data.strong_trace()) {
        d.g = data.g;
        d.c_slip = data.slip_coefficient();
    }
    return d;
}

StokesField solve_micro(std::shared_ptr<const Mesh> layer_mesh, const MicroData& data) {
    if (!(data.eps > 0) || !(data.mu > 0) || !(data.alpha >= 0)) {
        throw Error(ErrorKind::RegimeMismatch, "micro data needs eps > 0, mu > 0, alpha >= 0");
    }
    ConstraintSet cs;
    cs.periodic = false;
    if (data.strong_trace()) cs.strong_zero = {BoundaryTag::GammaD};
    else cs.normal_zero = {BoundaryTag::GammaD};
    auto disc = make_discretization(std::move(layer_mesh), cs, PressureGauge::Ungauged);
    return solve(assemble(disc, micro_problem_data(data)));
}

StokesField solve_micro(const LayerGeometry& layer, const MicroData& data, double h) {
    return solve_micro(std::make_shared<const Mesh>(build_layer_mesh(layer, h)), data);
}

ExtendedPressure extend_pressure(const StokesField& field, const ScalarFn& p_b) {
    const Mesh& mesh = field.mesh();
    if (mesh.element_cell.size() != static_cast<std::size_t>(mesh.num_triangles())) {
        throw Error(ErrorKind::InconsistentMesh, "pressure extension needs a layer mesh with cell provenance");
    }
    const int cells = mesh.cell_count;
    std::vector<double> integral(cells, 0.0), area(cells, 0.0);
    ExtendedPressure out;
    double fluid2 = 0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const ElementMap em(mesh, t);
        const int k = mesh.element_cell[t];
        for (int q = 0; q < TriangleQuadrature::size; ++q) {
            const Vec3& l = TriangleQuadrature::points()[q];
            const double w = em.area * TriangleQuadrature::weights()[q];
            const double v = field.pressure(t, l) - (p_b ? p_b(em.point(l)) : 0.0);
            integral[k] += w * v;
            area[k] += w;
            fluid2 += w * v * v;
        }
    }
    const double cell_area = 2.0 * mesh.eps * mesh.eps;
    out.cell_average.resize(cells);
    double solid2 = 0;
    for (int k = 0; k < cells; ++k) {
        out.cell_average[k] = integral[k] / area[k];
        const double solid = std::max(0.0, cell_area - area[k]);
        solid2 += solid * out.cell_average[k] * out.cell_average[k];
    }
    out.solid_cell_area = cells ? std::max(0.0, cell_area - area[0]) : 0.0;
    out.fluid_l2 = std::sqrt(fluid2);
    out.solid_l2 = std::sqrt(solid2);
    out.l2 = std::sqrt(fluid2 + solid2);
    return out;
}

TwoScaleError two_scale_error(const StokesField& field, const TwoScaleReconstruction& rec) {
    const Mesh& mesh = field.mesh();
    const Mesh& cell = *rec.cells().mesh;
    if (mesh.element_reference.size() != static_cast<std::size_t>(mesh.num_triangles()) ||
        mesh.num_triangles() != mesh.cell_count * cell.num_triangles()) {
        throw Error(ErrorKind::RegimeMismatch, "layer mesh was not built from the reconstruction's cell mesh");
    }
    const double eps = mesh.eps;
    const double s = 1.0 / (eps * eps);
    const DarcySolution& darcy = rec.darcy();
    TwoScaleError e;
    double eu = 0, ep = 0, ref = 0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const ElementMap em(mesh, t);
        const int r = mesh.element_reference[t];
        for (int q = 0; q < TriangleQuadrature::size; ++q) {
            const Vec3& l = TriangleQuadrature::points()[q];
            const double w = em.area * TriangleQuadrature::weights()[q];
            const double x1 = em.point(l).x();
            const Vec2 u0 = rec.u0(x1, r, l);
            eu += w * (s * field.velocity(t, l) - u0).squaredNorm();
            ref += w * u0.squaredNorm();
            const double dp = field.pressure(t, l) - darcy.p0_at(x1);
            ep += w * dp * dp;
            e.unfolded_measure += w;
        }
    }
    e.velocity = std::sqrt(eu / eps);
    e.pressure = std::sqrt(ep / eps);
    e.velocity_reference = std::sqrt(ref / eps);
    return e;
}

bool SweepReport::velocity_error_decreasing() const {
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (!(entries[i].error.velocity < entries[i - 1].error.velocity)) return false;
    return !entries.empty();
}

double SweepReport::spread(double SweepEntry::*column) const {
    if (entries.empty()) return 0.0;
    double lo = entries[0].*column, hi = lo;
    for (const auto& e : entries) {
        lo = std::min(lo, e.*column);
        hi = std::max(hi, e.*column);
    }
    return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
}

SweepReport run_sweep(const SweepSetup& setup) {
    for (std::size_t i = 1; i < setup.eps.size(); ++i) {
        if (!(setup.eps[i] < setup.eps[i - 1])) throw Error(ErrorKind::ConfigInvalid, "eps values must decrease");
    }
    auto cell_mesh = std::make_shared<const Mesh>(build_cell_mesh(setup.cell, setup.h_cell));
    const auto regime = RegimeDescriptor::classify(setup.alpha, setup.gamma, *cell_mesh, setup.mu);
    const CellSolutionSet cells = solve_cell_problems(cell_mesh, regime, setup.cell_inputs);
    const EffectiveLaw law = assemble_effective_law(cells);
    MacroData macro = setup.macro;
    macro.mu = setup.mu;
    const DarcySolution darcy = solve_darcy(law, macro, SigmaMesh::uniform(setup.L1, setup.sigma_elements));
    const TwoScaleReconstruction rec(darcy, cells);
    const bool sn = regime.sn_class == SnClass::Nonempty;

    auto solve_one = [&](double eps) {
        const auto t0 = std::chrono::steady_clock::now();
        LayerGeometry layer;
        layer.cell = setup.cell;
        layer.sigma_lengths = {static_cast<int>(std::lround(setup.L1))};
        layer.eps = eps;
        auto mesh = std::make_shared<const Mesh>(build_layer_mesh(layer, setup.h_cell));
        MicroData data = MicroData::from_macro(macro, eps, setup.alpha, setup.gamma, setup.cell_inputs, sn);
        data.trace_mode = setup.trace_mode;
        const StokesField u = solve_micro(mesh, data);

        SweepEntry e;
        e.eps = eps;
        e.unknowns = static_cast<int>(u.disc->space.T.cols() + u.disc->space.Tp.cols());
        e.residual = u.residual;
        e.u_l2 = l2_norm_velocity(u);
        e.grad_l2 = h1_seminorm_velocity(u);
        e.trace_l2 = mesh->has_tag(BoundaryTag::GammaD) ? boundary_l2_norm_velocity(u, BoundaryTag::GammaD) : 0.0;
        e.pressure_ext_l2 = extend_pressure(u, data.p_b).l2;
        e.u_ratio = e.u_l2 / std::pow(eps, 2.5);
        e.grad_ratio = e.grad_l2 / std::pow(eps, 1.5);
        const double trace_exp = setup.alpha > 0 ? std::max(2.0, (3.0 - setup.gamma) / 2.0) : 2.0;
        e.trace_ratio = e.trace_l2 / std::pow(eps, trace_exp);
        e.trace_scaled = e.trace_l2 / (eps * eps);
        e.pressure_ratio = e.pressure_ext_l2 / std::sqrt(eps);
        e.error = two_scale_error(u, rec);
        e.energy_defect = energy(u, micro_problem_data(data)).balance_defect();
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return e;
    };
    if (std::abs(setup.L1 - std::lround(setup.L1)) > 1e-12 || setup.L1 < 1) {
        throw Error(ErrorKind::ConfigInvalid, "L1 must be a positive integer");
    }

    SweepReport report;
    report.entries.resize(setup.eps.size());
    const std::size_t jobs = static_cast<std::size_t>(std::max(1, setup.jobs));
    for (std::size_t first = 0; first < setup.eps.size(); first += jobs) {
        std::vector<std::future<SweepEntry>> batch;
        const std::size_t last = std::min(setup.eps.size(), first + jobs);
        for (std::size_t i = first; i < last; ++i)
            batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, solve_one, setup.eps[i]));
        for (std::size_t i = first; i < last; ++i) report.entries[i] = batch[i - first].get();
    }
    return report;
}

}  // namespace thinlayer
