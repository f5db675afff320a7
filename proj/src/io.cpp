#include "thinlayer/io.hpp"

#include "thinlayer/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace thinlayer {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ComputeFailed, "cannot write " + path.string());
    return out;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

std::string format_number(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_vtk(const std::filesystem::path& path, const Mesh& mesh) {
    auto out = open_out(path);
    out << "# vtk DataFile Version 3.0\nmesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.num_vertices() << " double\n";
    for (const auto& v : mesh.vertices) out << format_number(v.x()) << ' ' << format_number(v.y()) << " 0\n";
    out << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out << "CELL_TYPES " << mesh.num_triangles() << '\n';
    for (int t = 0; t < mesh.num_triangles(); ++t) out << "5\n";
    out << "CELL_DATA " << mesh.num_triangles() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
    for (int t = 0; t < mesh.num_triangles(); ++t)
        out << (mesh.element_cell.empty() ? 0 : mesh.element_cell[t]) << '\n';
}

namespace {

void write_p2_vtk(const std::filesystem::path& path, const P2Layout& layout, const Mesh& mesh, const Eigen::VectorXd& u,
                  const Eigen::VectorXd& p, const std::string& title) {
    auto out = open_out(path);
    const int nodes = layout.num_nodes();
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << nodes << " double\n";
    for (const auto& c : layout.node_coords) out << format_number(c.x()) << ' ' << format_number(c.y()) << " 0\n";
    const int ne = mesh.num_triangles();
    out << "CELLS " << ne << ' ' << 7 * ne << '\n';
    for (const auto& en : layout.element_nodes) {
        out << 6;
        for (int a : en) out << ' ' << a;
        out << '\n';
    }
    out << "CELL_TYPES " << ne << '\n';
    for (int t = 0; t < ne; ++t) out << "22\n";
    out << "POINT_DATA " << nodes << "\nVECTORS velocity double\n";
    for (int a = 0; a < nodes; ++a) out << format_number(u[2 * a]) << ' ' << format_number(u[2 * a + 1]) << " 0\n";
    if (p.size()) {
        out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
        for (int a = 0; a < nodes; ++a) {
            double v;
            if (a < layout.num_vertices) v = p[a];
            else {
                const auto& e = layout.edge_vertices[a - layout.num_vertices];
                v = 0.5 * (p[e[0]] + p[e[1]]);
            }
            out << format_number(v) << '\n';
        }
    }
}

}  // namespace

void write_vtk(const std::filesystem::path& path, const StokesField& field, const std::string& title) {
    write_p2_vtk(path, field.disc->layout, field.mesh(), field.u, field.p, title);
}

void write_vtk(const std::filesystem::path& path, const ConstantEstimate& est) {
    write_p2_vtk(path, est.disc->layout, *est.disc->mesh, est.field, Eigen::VectorXd(), std::string(to_string(est.id)));
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(const std::vector<double>& row) {
    std::vector<std::string> s;
    s.reserve(row.size());
    for (double v : row) s.push_back(format_number(v));
    add_row(s);
}

void CsvTable::add_row(const std::vector<std::string>& row) {
    if (row.size() != header_.size()) throw Error(ErrorKind::ComputeFailed, "csv row width does not match header");
    rows_.push_back(row);
}

std::string CsvTable::str() const {
    auto field = [](const std::string& s) {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + '"';
    };
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << field(r[i]);
        os << "\r\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return os.str();
}

void CsvTable::write(const std::filesystem::path& path) const { open_out(path) << str(); }

Json to_json(const Mat2& m) { return Json::array({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}}); }

Json to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json r = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

Json to_json(const RegimeDescriptor& regime) {
    Json j;
    j["alpha"] = regime.alpha;
    j["gamma"] = regime.gamma;
    j["mu"] = regime.mu;
    j["gamma_class"] = std::string(to_string(regime.gamma_class));
    j["sn_class"] = std::string(to_string(regime.sn_class));
    j["cell_boundary"] = std::string(to_string(regime.cell_boundary()));
    j["robin_coefficient"] = regime.robin_coefficient();
    return j;
}

Json to_json(const EffectiveLaw& law) {
    Json j;
    j["regime"] = to_json(law.regime);
    j["h"] = law.h;
    j["K_avg"] = to_json(law.K_avg);
    j["K_sym"] = to_json(law.K_sym);
    Json ratio = Json::array();
    for (int r = 0; r < 2; ++r) {
        Json row = Json::array();
        for (int c = 0; c < 2; ++c) {
            const double kp = law.K_sym(r, c);
            row.push_back(std::abs(kp) > 1e-14 ? Json(law.K_avg(r, c) / kp) : Json(nullptr));
        }
        ratio.push_back(row);
    }
    j["K_ratio"] = ratio;
    j["K_avg_asymmetry"] = std::abs(law.K_avg(0, 1) - law.K_avg(1, 0));
    j["factor_defect"] = law.factor_defect;
    j["beta"] = {law.beta.x(), law.beta.y()};
    j["kappa"] = law.kappa ? Json{law.kappa->x(), law.kappa->y()} : Json(nullptr);
    j["B"] = to_json(law.B);
    j["B_from_average"] = to_json(law.B_from_average);
    return j;
}

Json to_json(const DarcySolution& sol) {
    Json j;
    j["regime"] = to_json(sol.law.regime);
    j["elements"] = sol.mesh.elements();
    j["length"] = sol.mesh.x.back() - sol.mesh.x.front();
    j["residual"] = sol.residual;
    double q = 0, qmin = 1e300, qmax = -1e300;
    for (int e = 0; e < sol.mesh.elements(); ++e) {
        const double xm = 0.5 * (sol.mesh.x[e] + sol.mesh.x[e + 1]);
        const double f = sol.u_bar(xm).x();
        q += (sol.mesh.x[e + 1] - sol.mesh.x[e]) * f;
        qmin = std::min(qmin, f);
        qmax = std::max(qmax, f);
    }
    j["flux"] = {{"mean", q / (sol.mesh.x.back() - sol.mesh.x.front())}, {"min", qmin}, {"max", qmax}};
    j["p0_ends"] = {sol.p0[0], sol.p0[sol.p0.size() - 1]};
    return j;
}

Json to_json(const SweepReport& report) {
    Json j;
    Json rows = Json::array();
    for (const auto& e : report.entries) {
        Json r;
        r["eps"] = e.eps;
        r["unknowns"] = e.unknowns;
        r["u_l2"] = e.u_l2;
        r["grad_l2"] = e.grad_l2;
        r["trace_l2"] = e.trace_l2;
        r["pressure_ext_l2"] = e.pressure_ext_l2;
        r["u_ratio"] = e.u_ratio;
        r["grad_ratio"] = e.grad_ratio;
        r["trace_ratio"] = e.trace_ratio;
        r["pressure_ratio"] = e.pressure_ratio;
        r["velocity_error"] = e.error.velocity;
        r["pressure_error"] = e.error.pressure;
        r["velocity_reference"] = e.error.velocity_reference;
        r["unfolded_measure"] = e.error.unfolded_measure;
        r["energy_defect"] = e.energy_defect;
        r["residual"] = e.residual;
        rows.push_back(r);
    }
    j["entries"] = rows;
    j["velocity_error_decreasing"] = report.velocity_error_decreasing();
    j["pressure_ratio_spread"] = finite_or_null(report.spread(&SweepEntry::pressure_ratio));
    j["u_ratio_spread"] = finite_or_null(report.spread(&SweepEntry::u_ratio));
    return j;
}

Json to_json(const ConstantEstimate& est) {
    Json j;
    j["inequality"] = std::string(to_string(est.id));
    j["h"] = est.h;
    j["eigenvalue"] = est.eigenvalue;
    j["constant"] = finite_or_null(est.value);
    return j;
}

Json to_json(const std::vector<RestrictionNormEntry>& sweep) {
    Json rows = Json::array();
    for (const auto& e : sweep) {
        Json r;
        r["eps"] = e.eps;
        r["fields"] = e.ratios.size();
        r["max_ratio"] = e.max_ratio;
        r["max_divergence_residual"] = e.max_divergence_residual;
        rows.push_back(r);
    }
    return rows;
}

CsvTable darcy_table(const DarcySolution& sol) {
    CsvTable t({"x", "p0", "u_bar_1", "u_bar_2"});
    for (std::size_t i = 0; i < sol.mesh.x.size(); ++i) {
        const double x = sol.mesh.x[i];
        const Vec2 u = sol.u_bar(x);
        t.add_row(std::vector<double>{x, sol.p0[static_cast<Eigen::Index>(i)], u.x(), u.y()});
    }
    return t;
}

CsvTable sweep_table(const SweepReport& report) {
    CsvTable t({"eps", "unknowns", "velocity_error", "pressure_error", "u_ratio", "grad_ratio", "trace_ratio",
                "pressure_ratio", "energy_defect", "seconds"});
    for (const auto& e : report.entries) {
        t.add_row(std::vector<double>{e.eps, double(e.unknowns), e.error.velocity, e.error.pressure, e.u_ratio,
                                      e.grad_ratio, e.trace_ratio, e.pressure_ratio, e.energy_defect, e.seconds});
    }
    return t;
}

CsvTable constants_table(const std::vector<ConstantEstimate>& estimates) {
    CsvTable t({"inequality", "h", "eigenvalue", "constant"});
    for (const auto& e : estimates) {
        t.add_row(std::vector<std::string>{std::string(to_string(e.id)), format_number(e.h),
                                           format_number(e.eigenvalue), format_number(e.value)});
    }
    return t;
}

void write_json(const std::filesystem::path& path, const Json& doc) { open_out(path) << doc.dump(2) << '\n'; }

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
    }
}

}  // namespace thinlayer
