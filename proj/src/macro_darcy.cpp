#include "thinlayer/macro_darcy.hpp"

#include "thinlayer/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

namespace thinlayer {

double MacroData::dpb(double x) const {
    if (dp_b) return dp_b(x);
    if (!p_b) return 0.0;
    const double s = 1e-3;
    return (-p_b(x + 2 * s) + 8 * p_b(x + s) - 8 * p_b(x - s) + p_b(x - 2 * s)) / (12 * s);
}

SigmaMesh SigmaMesh::uniform(double length, int elements) {
    if (!(length > 0) || elements < 1) throw Error(ErrorKind::MeshingFailed, "Sigma mesh needs L > 0 and >= 1 element");
    SigmaMesh m;
    m.x.resize(elements + 1);
    for (int i = 0; i <= elements; ++i) m.x[i] = length * i / elements;
    m.x.back() = length;
    return m;
}

int SigmaMesh::locate(double xx) const {
    const auto it = std::upper_bound(x.begin(), x.end(), xx);
    const int e = static_cast<int>(it - x.begin()) - 1;
    return std::clamp(e, 0, elements() - 1);
}

namespace {

template <class Fn>
void for_sigma_points(const SigmaMesh& mesh, Fn&& fn) {
    for (int e = 0; e < mesh.elements(); ++e) {
        const double a = mesh.x[e], b = mesh.x[e + 1];
        for (int q = 0; q < EdgeQuadrature::size; ++q) {
            fn(e, a + EdgeQuadrature::points()[q] * (b - a), (b - a) * EdgeQuadrature::weights()[q]);
        }
    }
}

bool same_regime(const RegimeDescriptor& a, const RegimeDescriptor& b) {
    return a.alpha == b.alpha && a.cell_boundary() == b.cell_boundary() && a.sn_class == b.sn_class &&
           a.mu == b.mu;
}

}  // namespace

double DarcySolution::p0_at(double x) const {
    const int e = mesh.locate(x);
    const double t = (x - mesh.x[e]) / (mesh.x[e + 1] - mesh.x[e]);
    return (1 - t) * p0[e] + t * p0[e + 1];
}

double DarcySolution::dp0_at(double x) const {
    const int e = mesh.locate(x);
    return (p0[e + 1] - p0[e]) / (mesh.x[e + 1] - mesh.x[e]);
}

Eigen::Vector4d DarcySolution::coefficients(double x) const {
    const Vec2 f = data.force(x);
    const bool sn = law.regime.sn_class == SnClass::Nonempty;
    return {f.x() - dp0_at(x), f.y(), data.g(x), sn ? data.pb1(x) : 0.0};
}

Vec2 DarcySolution::u_bar(double x) const {
    const Eigen::Vector4d c = coefficients(x);
    Vec2 u = c[0] * law.K_avg.row(0).transpose() + c[1] * law.K_avg.row(1).transpose() + c[2] * law.beta;
    if (law.kappa) u += c[3] * *law.kappa;
    return u / data.mu;
}

DarcySolution solve_darcy(const EffectiveLaw& law, const MacroData& data, const SigmaMesh& mesh) {
    const double k = law.K_avg(0, 0);
    if (!(k > 1e-12 * std::max(1.0, law.K_avg.cwiseAbs().maxCoeff())) || !law.K_avg.allFinite()) {
        throw Error(ErrorKind::DegenerateTensor, "in-plane permeability is not positive");
    }
    if (!(data.mu > 0)) throw Error(ErrorKind::DegenerateTensor, "viscosity must be positive");
    if (law.regime.cell_boundary() == CellBoundary::RobinSlip && law.regime.mu != data.mu) {
        throw Error(ErrorKind::RegimeMismatch, "Robin cell problems were solved for another viscosity");
    }
    if (mesh.elements() < 1) throw Error(ErrorKind::MeshingFailed, "empty Sigma mesh");

    DarcySolution sol;
    sol.mesh = mesh;
    sol.law = law;
    sol.data = data;
    const int n = static_cast<int>(mesh.x.size());
    const double kappa1 = law.kappa && law.regime.sn_class == SnClass::Nonempty ? law.kappa->x() : 0.0;
    auto source = [&](double x) {
        const Vec2 f = data.force(x);
        return k * f.x() + law.K_avg(1, 0) * f.y() + law.beta.x() * data.g(x) + kappa1 * data.pb1(x);
    };

    // Unknowns are the interior nodes; p0 = p_b at both ends.
    sol.p0 = Eigen::VectorXd::Zero(n);
    sol.p0[0] = data.pb(mesh.x.front());
    sol.p0[n - 1] = data.pb(mesh.x.back());
    const int m = n - 2;
    if (m > 0) {
        Triplets trip;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
        for (int e = 0; e < mesh.elements(); ++e) {
            const double len = mesh.x[e + 1] - mesh.x[e];
            const double s = k / len;
            double src = 0;
            for (int q = 0; q < EdgeQuadrature::size; ++q) {
                src += EdgeQuadrature::weights()[q] * source(mesh.x[e] + EdgeQuadrature::points()[q] * len);
            }
            // q' = -1/len on node e, +1/len on node e+1
            const int ids[2] = {e - 1, e};
            const double sign[2] = {-1.0, 1.0};
            for (int a = 0; a < 2; ++a) {
                if (ids[a] < 0 || ids[a] >= m) continue;
                rhs[ids[a]] += sign[a] * src;
                for (int b = 0; b < 2; ++b) {
                    const double kab = sign[a] * sign[b] * s;
                    if (ids[b] < 0 || ids[b] >= m) {
                        rhs[ids[a]] -= kab * sol.p0[e + b];
                    } else {
                        trip.emplace_back(ids[a], ids[b], kab);
                    }
                }
            }
        }
        SpMat S(m, m);
        S.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLDLT<SpMat> ldlt(S);
        if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::DegenerateTensor, "Darcy matrix is not definite");
        sol.p0.segment(1, m) = ldlt.solve(rhs);
    }

    // Weak divergence of the in-plane Darcy velocity against interior hats.
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    for_sigma_points(mesh, [&](int e, double x, double w) {
        const double len = mesh.x[e + 1] - mesh.x[e];
        const double u = sol.u_bar(x).x();
        r[e] -= w * u / len;
        r[e + 1] += w * u / len;
    });
    sol.residual = m > 0 ? r.segment(1, m).cwiseAbs().maxCoeff() : 0.0;
    return sol;
}

TwoScaleReconstruction::TwoScaleReconstruction(const DarcySolution& sol, const CellSolutionSet& cells)
    : sol_(sol), cells_(cells) {
    if (!same_regime(sol.law.regime, cells.regime)) {
        throw Error(ErrorKind::RegimeMismatch, "Darcy solution and cell solutions belong to different regimes");
    }
    if (cells.w.size() != 2 || !cells.mesh) throw Error(ErrorKind::RegimeMismatch, "incomplete cell solution set");
    locator_ = std::make_shared<const PointLocator>(*cells.mesh);
}

Eigen::VectorXd TwoScaleReconstruction::u0_coefficients(double x) const {
    const Eigen::Vector4d c = sol_.coefficients(x);
    Eigen::VectorXd u = c[0] * cells_.w[0].u + c[1] * cells_.w[1].u;
    if (cells_.w_gamma.u.size()) u += c[2] * cells_.w_gamma.u;
    if (cells_.w_n) u += c[3] * cells_.w_n->u;
    return u / sol_.data.mu;
}

Eigen::VectorXd TwoScaleReconstruction::p1_coefficients(double x) const {
    const Eigen::Vector4d c = sol_.coefficients(x);
    Eigen::VectorXd p = c[0] * cells_.w[0].p + c[1] * cells_.w[1].p;
    if (cells_.w_gamma.p.size()) p += c[2] * cells_.w_gamma.p;
    if (cells_.w_n) p += c[3] * cells_.w_n->p;
    return p;
}

Vec2 TwoScaleReconstruction::u0(double x, int cell_elem, const Vec3& bary) const {
    const Eigen::Vector4d c = sol_.coefficients(x);
    Vec2 u = c[0] * cells_.w[0].velocity(cell_elem, bary) + c[1] * cells_.w[1].velocity(cell_elem, bary);
    if (cells_.w_gamma.u.size()) u += c[2] * cells_.w_gamma.velocity(cell_elem, bary);
    if (cells_.w_n) u += c[3] * cells_.w_n->velocity(cell_elem, bary);
    return u / sol_.data.mu;
}

double TwoScaleReconstruction::p1(double x, int cell_elem, const Vec3& bary) const {
    const Eigen::Vector4d c = sol_.coefficients(x);
    double p = c[0] * cells_.w[0].pressure(cell_elem, bary) + c[1] * cells_.w[1].pressure(cell_elem, bary);
    if (cells_.w_gamma.p.size()) p += c[2] * cells_.w_gamma.pressure(cell_elem, bary);
    if (cells_.w_n) p += c[3] * cells_.w_n->pressure(cell_elem, bary);
    return p;
}

bool TwoScaleReconstruction::evaluate(double x, const Vec2& y, Vec2& u, double& p) const {
    int elem = -1;
    Vec3 bary;
    if (!locator_->locate(y, elem, bary)) return false;
    u = u0(x, elem, bary);
    p = p1(x, elem, bary);
    return true;
}

TwoScaleReconstruction reconstruct_two_scale(const DarcySolution& sol, const CellSolutionSet& cells) {
    return TwoScaleReconstruction(sol, cells);
}

TwoPressureResidual verify_two_pressure_residual(const TwoScaleReconstruction& rec,
                                                 const std::vector<TwoScaleTestField>& tests) {
    const auto& cells = rec.cells();
    const auto& sol = rec.darcy();
    const auto& disc = cells.w[0].disc;
    const RegimeDescriptor& regime = cells.regime;

    const SaddleSystem sys = assemble(disc, cell_problem_data(regime));
    const SpMat A = sys.A_visc + sys.A_slip;
    StokesProblemData part = cell_problem_data(regime);
    std::array<Eigen::VectorXd, 4> loads;
    for (int i = 0; i < 2; ++i) {
        part.f = [i](const Vec2&) { return Vec2(i == 0 ? 1.0 : 0.0, i == 1 ? 1.0 : 0.0); };
        loads[i] = assemble_velocity_load(*disc, part);
    }
    part.f = nullptr;
    if (regime.cell_boundary() != CellBoundary::NoSlip) part.g = cells.inputs.g_gamma;
    loads[2] = assemble_velocity_load(*disc, part);
    part.g = nullptr;
    if (regime.sn_class == SnClass::Nonempty) part.p_b = cells.inputs.p_bN;
    loads[3] = assemble_velocity_load(*disc, part);

    const SpMat& T = disc->space.T;
    const Eigen::VectorXd diag = SpMat(SpMat(T.transpose()) * T).diagonal();

    TwoPressureResidual out;
    out.darcy_constraint = sol.residual;
    const double mu = sol.data.mu;
    for (const auto& t : tests) {
        if (t.phi.size() != disc->velocity_size()) {
            throw Error(ErrorKind::RegimeMismatch, "test field does not live in the cell velocity space");
        }
        const Eigen::VectorXd proj = T * (Eigen::VectorXd(T.transpose() * t.phi).cwiseQuotient(diag));
        if ((proj - t.phi).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, t.phi.cwiseAbs().maxCoeff())) {
            throw Error(ErrorKind::RegimeMismatch, "test field violates the Gamma_D or periodic constraint");
        }
        const Eigen::VectorXd Aphi = A * t.phi;
        const Eigen::VectorXd Bphi = sys.B * t.phi;
        std::array<double, 4> lphi;
        for (int i = 0; i < 4; ++i) lphi[i] = loads[i].dot(t.phi);
        double visc = 0, p1t = 0, load = 0, p0t = 0, scale = 0;
        for_sigma_points(sol.mesh, [&](int, double x, double w) {
            const double a = t.amplitude ? t.amplitude(x) : 0.0;
            const double da = t.d_amplitude ? t.d_amplitude(x) : 0.0;
            const double v = mu * Aphi.dot(rec.u0_coefficients(x));
            const double pp = Bphi.dot(rec.p1_coefficients(x));
            const Vec2 f = sol.data.force(x);
            const bool sn = regime.sn_class == SnClass::Nonempty;
            const double l = (f.x() - sol.data.dpb(x)) * lphi[0] + f.y() * lphi[1] + sol.data.g(x) * lphi[2] +
                             (sn ? sol.data.pb1(x) : 0.0) * lphi[3];
            const double q = -(sol.p0_at(x) - sol.data.pb(x)) * da * lphi[0];
            visc += w * a * v;
            p1t += w * a * pp;
            load += w * a * l;
            p0t += w * q;
            scale += w * (std::abs(a * v) + std::abs(a * pp) + std::abs(a * l) + std::abs(q));
        });
        const double r = visc + p1t - load + p0t;
        out.residual.push_back(r);
        out.relative.push_back(scale > 0 ? std::abs(r) / scale : 0.0);
        out.p1_term.push_back(p1t);
        out.p0_term.push_back(p0t);
    }
    return out;
}

}  // namespace thinlayer
