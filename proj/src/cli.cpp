#include "thinlayer/cli.hpp"

#include "thinlayer/errors.hpp"
#include "run_config_schema.inc"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numbers>

namespace thinlayer {

// ---------------------------------------------------------------- schema

namespace {

std::string json_type(const Json& v) {
    if (v.is_null()) return "null";
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    return "object";
}

bool type_matches(const Json& v, const std::string& type) {
    const std::string t = json_type(v);
    if (type == "number") return t == "number" || t == "integer";
    if (type == "integer" && t == "number") {
        const double d = v.get<double>();
        return std::floor(d) == d;
    }
    return t == type;
}

const Json& resolve(const Json& schema, const Json& root) {
    if (!schema.contains("$ref")) return schema;
    const std::string ref = schema["$ref"].get<std::string>();
    if (ref.rfind("#/", 0) != 0) throw Error(ErrorKind::ConfigInvalid, "unsupported schema reference " + ref);
    return root.at(nlohmann::ordered_json::json_pointer(ref.substr(1)));
}

void validate_node(const Json& v, const Json& schema_in, const Json& root, const std::string& path,
                   std::vector<std::string>& errors) {
    const Json& s = resolve(schema_in, root);
    const std::string where = path.empty() ? "/" : path;
    if (s.contains("type") && !type_matches(v, s["type"].get<std::string>())) {
        errors.push_back(where + ": expected " + s["type"].get<std::string>() + ", got " + json_type(v));
        return;
    }
    if (s.contains("enum")) {
        bool found = false;
        for (const auto& e : s["enum"]) found = found || e == v;
        if (!found) errors.push_back(where + ": value " + v.dump() + " not allowed");
    }
    if (v.is_number()) {
        const double d = v.get<double>();
        if (s.contains("minimum") && d < s["minimum"].get<double>())
            errors.push_back(where + ": below minimum " + s["minimum"].dump());
        if (s.contains("maximum") && d > s["maximum"].get<double>())
            errors.push_back(where + ": above maximum " + s["maximum"].dump());
        if (s.contains("exclusiveMinimum") && d <= s["exclusiveMinimum"].get<double>())
            errors.push_back(where + ": must exceed " + s["exclusiveMinimum"].dump());
        if (s.contains("exclusiveMaximum") && d >= s["exclusiveMaximum"].get<double>())
            errors.push_back(where + ": must be below " + s["exclusiveMaximum"].dump());
    }
    if (v.is_array()) {
        if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
            errors.push_back(where + ": needs at least " + s["minItems"].dump() + " items");
        if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>())
            errors.push_back(where + ": allows at most " + s["maxItems"].dump() + " items");
        if (s.contains("items"))
            for (std::size_t i = 0; i < v.size(); ++i)
                validate_node(v[i], s["items"], root, path + "/" + std::to_string(i), errors);
    }
    if (v.is_object()) {
        if (s.contains("required"))
            for (const auto& r : s["required"])
                if (!v.contains(r.get<std::string>())) errors.push_back(where + ": missing " + r.get<std::string>());
        const Json empty = Json::object();
        const Json& props = s.contains("properties") ? s["properties"] : empty;
        const bool closed = s.contains("additionalProperties") && s["additionalProperties"] == false;
        for (const auto& [key, val] : v.items()) {
            if (props.contains(key)) validate_node(val, props[key], root, path + "/" + key, errors);
            else if (closed) errors.push_back(where + ": unknown key " + key);
        }
    }
    if (s.contains("oneOf")) {
        int matches = 0;
        for (const auto& alt : s["oneOf"]) {
            std::vector<std::string> sub;
            validate_node(v, alt, root, path, sub);
            if (sub.empty()) ++matches;
        }
        if (matches != 1) errors.push_back(where + ": matches " + std::to_string(matches) + " alternatives, expected 1");
    }
}

}  // namespace

std::vector<std::string> validate_against_schema(const Json& instance, const Json& schema) {
    std::vector<std::string> errors;
    validate_node(instance, schema, schema, "", errors);
    return errors;
}

const Json& run_config_schema() {
    static const Json schema = Json::parse(kRunConfigSchema);
    return schema;
}

// ---------------------------------------------------------------- config

namespace {

Vec2 read_vec2(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

MacroScalarFn read_expression(const Json& j) {
    if (j.is_number()) {
        const double c = j.get<double>();
        return [c](double) { return c; };
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") {
        const double c = j.at("value").get<double>();
        return [c](double) { return c; };
    }
    if (kind == "linear") {
        const double a = j.value("offset", 0.0), b = j.at("slope").get<double>();
        return [a, b](double x) { return a + b * x; };
    }
    const double amp = j.value("amplitude", 1.0), k = std::numbers::pi * j.at("frequency").get<double>();
    const double ph = j.value("phase", 0.0), off = j.value("offset", 0.0);
    if (kind == "sin") return [=](double x) { return off + amp * std::sin(k * x + ph); };
    return [=](double x) { return off + amp * std::cos(k * x + ph); };
}

MacroScalarFn read_derivative(const Json& j) {
    if (j.is_number()) return [](double) { return 0.0; };
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return [](double) { return 0.0; };
    if (kind == "linear") {
        const double b = j.at("slope").get<double>();
        return [b](double) { return b; };
    }
    const double amp = j.value("amplitude", 1.0), k = std::numbers::pi * j.at("frequency").get<double>();
    const double ph = j.value("phase", 0.0);
    if (kind == "sin") return [=](double x) { return amp * k * std::cos(k * x + ph); };
    return [=](double x) { return -amp * k * std::sin(k * x + ph); };
}

std::variant<Disk, Polygon> read_inclusion(const Json& j) {
    const Vec2 c = j.contains("center") ? read_vec2(j["center"]) : Vec2(0.5, 0.0);
    const double r = j.value("radius", 0.25);
    if (j.at("shape") == "disk") return Disk{c, r};
    return Polygon::regular(c, r, j.value("sides", 8), j.value("phase", 0.0));
}

CellGeometry read_geometry(const Json& g) {
    CellGeometry cell;
    cell.dim = g.value("dim", 2);
    const Json p = g.value("params", Json::object());
    const std::string shape = g.at("solid_shape").get<std::string>();
    const Vec2 c = p.contains("center") ? read_vec2(p["center"]) : Vec2(0.5, 0.0);
    if (shape == "disk") {
        cell.solid = Disk{c, p.value("radius", 0.25)};
    } else if (shape == "slabs") {
        Slabs s;
        s.delta = p.value("delta", 0.25);
        if (p.contains("inclusion")) s.inclusion = read_inclusion(p["inclusion"]);
        cell.solid = s;
    } else if (shape == "polygon") {
        if (p.contains("vertices")) {
            Polygon poly;
            for (const auto& v : p["vertices"]) poly.vertices.push_back(read_vec2(v));
            cell.solid = poly;
        } else {
            cell.solid = Polygon::regular(c, p.value("radius", 0.25), p.value("sides", 8), p.value("phase", 0.0));
        }
    } else {
        cell.solid = NoSolid{};
    }
    return cell;
}

}  // namespace

RunConfig RunConfig::from_json(const Json& doc) {
    const auto errors = validate_against_schema(doc, run_config_schema());
    if (!errors.empty()) {
        std::string msg = "configuration does not match the schema";
        for (const auto& e : errors) msg += "\n  " + e;
        throw Error(ErrorKind::ConfigInvalid, msg);
    }
    RunConfig c;
    c.source = doc;
    const Json& g = doc["geometry"];
    c.cell = read_geometry(g);
    if (g.contains("sigma_lengths")) c.L1 = g["sigma_lengths"][0].get<int>();

    const Json& r = doc["regime"];
    c.alpha = r["alpha"].get<double>();
    c.gamma = r["gamma"].get<double>();
    c.mu = r.value("mu", 1.0);
    c.trace_mode = r.value("trace_mode", std::string("robin")) == "strong" ? MicroTraceMode::StrongZero
                                                                        : MicroTraceMode::Robin;
    if (c.alpha == 0.0 && c.gamma != 0.0) {
        c.warnings.push_back("gamma ignored: alpha = 0 gives the pure slip regime");
        c.gamma = 0.0;
    }

    const Json d = doc.value("data", Json::object());
    c.macro.mu = c.mu;
    if (d.contains("f0")) {
        auto f1 = read_expression(d["f0"][0]), f2 = read_expression(d["f0"][1]);
        c.macro.f0 = [f1, f2](double x) { return Vec2(f1(x), f2(x)); };
    } else {
        c.macro.f0 = [](double) { return Vec2(1.0, 0.0); };
    }
    if (d.contains("g_sigma")) c.macro.g_sigma = read_expression(d["g_sigma"]);
    if (d.contains("p_b_sigma1")) c.macro.p_b_sigma1 = read_expression(d["p_b_sigma1"]);
    if (d.contains("p_b")) {
        c.macro.p_b = read_expression(d["p_b"]);
        c.macro.dp_b = read_derivative(d["p_b"]);
    }
    if (d.value("g_gamma", std::string("unit_tangent")) == "tangential_e1") c.cell_inputs.g_gamma = tangential_e1_field;
    if (d.contains("p_bN")) {
        const double v = d["p_bN"].get<double>();
        c.cell_inputs.p_bN = [v](const Vec2&) { return v; };
    }

    const Json disc = doc.value("discretization", Json::object());
    c.h_cell = disc.value("h_cell", c.h_cell);
    if (disc.contains("eps")) c.eps = disc["eps"].get<std::vector<double>>();
    c.sigma_elements = disc.value("sigma_elements", c.sigma_elements);
    for (std::size_t i = 1; i < c.eps.size(); ++i)
        if (!(c.eps[i] < c.eps[i - 1])) throw Error(ErrorKind::ConfigInvalid, "discretization/eps must decrease");
    for (double e : c.eps) {
        const double n = c.L1 / e;
        if (std::abs(n - std::round(n)) > 1e-9) {
            throw Error(ErrorKind::ConfigInvalid, "discretization/eps: L1 / eps must be an integer");
        }
    }

    const Json a = doc.value("analysis", Json::object());
    if (a.contains("h_list")) c.h_list = a["h_list"].get<std::vector<double>>();
    if (a.contains("restriction_eps")) c.restriction_eps = a["restriction_eps"].get<std::vector<double>>();
    c.restriction_fields = a.value("restriction_fields", c.restriction_fields);
    c.restriction_on_slabs = a.value("restriction_geometry", std::string("config")) == "slabs";

    const Json o = doc.value("outputs", Json::object());
    c.out_dir = o.value("directory", std::string("out"));
    if (o.contains("formats")) {
        const auto f = o["formats"].get<std::vector<std::string>>();
        auto has = [&](const char* s) { return std::find(f.begin(), f.end(), s) != f.end(); };
        c.write_json = has("json");
        c.write_csv = has("csv");
        c.write_vtk = has("vtk");
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

Command parse_command(const std::string& name) {
    for (Command c : {Command::Cell, Command::Darcy, Command::Micro, Command::Converge, Command::Analyze,
                      Command::Pipeline})
        if (to_string(c) == name) return c;
    throw Error(ErrorKind::ConfigInvalid, "unknown command " + name);
}

std::string_view to_string(Command c) {
    switch (c) {
        case Command::Cell: return "cell";
        case Command::Darcy: return "darcy";
        case Command::Micro: return "micro";
        case Command::Converge: return "converge";
        case Command::Analyze: return "analyze";
        case Command::Pipeline: return "pipeline";
    }
    return "?";
}

int exit_code_for(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) return err->kind() == ErrorKind::ConfigInvalid ? 2 : 1;
    return 1;
}

// ---------------------------------------------------------------- stages

namespace {

std::string fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json section(const Json& doc, const char* key) { return doc.contains(key) ? doc[key] : Json::object(); }

template <class E>
E enum_from(const std::string& s, std::initializer_list<E> values) {
    for (E v : values)
        if (to_string(v) == s) return v;
    throw Error(ErrorKind::ConfigInvalid, "cached report has unknown value " + s);
}

Mat2 mat2_from(const Json& j) {
    Mat2 m;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

Eigen::MatrixXd matrix_from(const Json& j) {
    Eigen::MatrixXd m(j.size(), j.empty() ? 0 : j[0].size());
    for (std::size_t r = 0; r < j.size(); ++r)
        for (std::size_t c = 0; c < j[r].size(); ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

EffectiveLaw law_from_json(const Json& j) {
    EffectiveLaw law;
    const Json& r = j["regime"];
    law.regime.alpha = r["alpha"].get<double>();
    law.regime.gamma = r["gamma"].get<double>();
    law.regime.mu = r["mu"].get<double>();
    law.regime.gamma_class = enum_from(r["gamma_class"].get<std::string>(),
                                       {GammaClass::BelowMinusOne, GammaClass::EqualMinusOne, GammaClass::AboveMinusOne});
    law.regime.sn_class = enum_from(r["sn_class"].get<std::string>(), {SnClass::Empty, SnClass::Nonempty});
    law.h = j["h"].get<double>();
    law.K_avg = mat2_from(j["K_avg"]);
    law.K_sym = mat2_from(j["K_sym"]);
    law.beta = read_vec2(j["beta"]);
    if (!j["kappa"].is_null()) law.kappa = read_vec2(j["kappa"]);
    law.B = matrix_from(j["B"]);
    law.B_from_average = matrix_from(j["B_from_average"]);
    law.factor_defect = j["factor_defect"].get<double>();
    return law;
}

class Runner {
public:
    Runner(const RunConfig& cfg, const RunOptions& opt, bool use_cache)
        : cfg_(cfg), opt_(opt), use_cache_(use_cache), out_(opt.out_dir.empty() ? cfg.out_dir : opt.out_dir) {
        for (const auto& w : cfg_.warnings) spdlog::warn("{}", w);
    }

    std::vector<StageStatus> stages;

    std::string cell_etag() const {
        const Json d = section(cfg_.source, "data");
        Json key = {{"geometry", cfg_.source["geometry"]},
                    {"regime", {cfg_.alpha, cfg_.gamma, cfg_.mu}},
                    {"g_gamma", d.value("g_gamma", std::string("unit_tangent"))},
                    {"p_bN", d.value("p_bN", 1.0)},
                    {"h_cell", cfg_.h_cell}};
        return fnv1a(key.dump());
    }
    std::string darcy_etag() const {
        Json key = {{"cell", cell_etag()}, {"data", section(cfg_.source, "data")}, {"sigma", cfg_.sigma_elements},
                    {"L1", cfg_.L1}};
        return fnv1a(key.dump());
    }
    std::string micro_etag(const char* stage) const {
        Json key = {{"stage", stage}, {"darcy", darcy_etag()}, {"eps", cfg_.eps},
                    {"trace_mode", cfg_.trace_mode == MicroTraceMode::Robin ? "robin" : "strong"}};
        return fnv1a(key.dump());
    }
    std::string analyze_etag() const {
        Json key = {{"geometry", cfg_.source["geometry"]}, {"analysis", section(cfg_.source, "analysis")},
                    {"seed", opt_.seed}};
        return fnv1a(key.dump());
    }

    /// True when `report` exists with a matching etag; records the stage either way.
    bool cached(const std::string& name, const std::filesystem::path& report, const std::string& etag) {
        StageStatus st{name, etag, false};
        if (use_cache_ && std::filesystem::exists(report)) {
            try {
                const Json j = read_json(report);
                st.cached = j.value("etag", std::string()) == etag;
            } catch (const Error&) {
                st.cached = false;
            }
        }
        stages.push_back(st);
        if (st.cached) spdlog::info("{}: cached (etag {})", name, etag);
        return st.cached;
    }

    Json stage_header(const char* name, const std::string& etag) const {
        Json j;
        j["stage"] = name;
        j["etag"] = etag;
        j["warnings"] = cfg_.warnings;
        return j;
    }

    void emit_json(const std::filesystem::path& p, const Json& j) const {
        // Stage reports double as the cache index, so they are always written.
        write_json(p, j);
    }

    // -- cell
    EffectiveLaw cell() {
        const auto report = out_ / "cell" / "effective_law.json";
        const std::string etag = cell_etag();
        if (cached("cell", report, etag)) return law_from_json(read_json(report)["law"]);
        Timer t("cell");
        auto mesh = std::make_shared<const Mesh>(build_cell_mesh(cfg_.cell, cfg_.h_cell));
        const auto regime = RegimeDescriptor::classify(cfg_.alpha, cfg_.gamma, *mesh, cfg_.mu);
        spdlog::info("cell: {} triangles, regime {} / {}", mesh->num_triangles(), to_string(regime.cell_boundary()),
                     to_string(regime.sn_class));
        const CellSolutionSet cells = solve_cell_problems(mesh, regime, cfg_.cell_inputs);
        const EffectiveLaw law = assemble_effective_law(cells);
        Json j = stage_header("cell", etag);
        const A4Report a4 = check_assumption_a4(*mesh);
        j["a4_satisfied"] = a4.satisfied;
        j["law"] = to_json(law);
        emit_json(report, j);
        if (cfg_.write_vtk) {
            write_vtk(out_ / "cell" / "mesh.vtk", *mesh);
            for (std::size_t i = 0; i < cells.w.size(); ++i)
                write_vtk(out_ / "cell" / ("w" + std::to_string(i + 1) + ".vtk"), cells.w[i], "w");
            write_vtk(out_ / "cell" / "w_gamma.vtk", cells.w_gamma, "w_gamma");
            if (cells.w_n) write_vtk(out_ / "cell" / "w_n.vtk", *cells.w_n, "w_n");
            for (std::size_t i = 0; i < cells.h.size(); ++i)
                write_vtk(out_ / "cell" / ("h" + std::to_string(i + 1) + ".vtk"), cells.h[i], "h");
        }
        return law;
    }

    // -- darcy
    void darcy(const EffectiveLaw& law) {
        const auto report = out_ / "darcy" / "darcy.json";
        const std::string etag = darcy_etag();
        if (cached("darcy", report, etag)) return;
        Timer t("darcy");
        const DarcySolution sol = solve_darcy(law, cfg_.macro, SigmaMesh::uniform(cfg_.L1, cfg_.sigma_elements));
        Json j = stage_header("darcy", etag);
        j["solution"] = to_json(sol);
        emit_json(report, j);
        if (cfg_.write_csv) darcy_table(sol).write(out_ / "darcy" / "darcy.csv");
    }

    // -- micro
    void micro() {
        const auto report = out_ / "micro" / "micro.json";
        const std::string etag = micro_etag("micro");
        if (cached("micro", report, etag)) return;
        Timer t("micro");
        auto cell_mesh = build_cell_mesh(cfg_.cell, cfg_.h_cell);
        const bool sn = cfg_.cell.touches_horizontal_faces();
        auto solve_one = [&](double eps) {
            LayerGeometry layer;
            layer.cell = cfg_.cell;
            layer.sigma_lengths = {cfg_.L1};
            layer.eps = eps;
            auto mesh = std::make_shared<const Mesh>(build_layer_mesh(layer, cfg_.h_cell));
            MicroData data = MicroData::from_macro(cfg_.macro, eps, cfg_.alpha, cfg_.gamma, cfg_.cell_inputs, sn);
            data.trace_mode = cfg_.trace_mode;
            StokesField u = solve_micro(mesh, data);
            Json r;
            r["eps"] = eps;
            r["triangles"] = mesh->num_triangles();
            r["u_l2"] = l2_norm_velocity(u);
            r["grad_l2"] = h1_seminorm_velocity(u);
            r["pressure_ext_l2"] = extend_pressure(u, data.p_b).l2;
            r["energy_defect"] = energy(u, micro_problem_data(data)).balance_defect();
            if (cfg_.write_vtk) write_vtk(out_ / "micro" / ("field_eps_" + format_number(eps) + ".vtk"), u, "micro");
            return r;
        };
        Json rows = Json::array();
        const std::size_t jobs = static_cast<std::size_t>(std::max(1, opt_.jobs));
        for (std::size_t first = 0; first < cfg_.eps.size(); first += jobs) {
            std::vector<std::future<Json>> batch;
            const std::size_t last = std::min(cfg_.eps.size(), first + jobs);
            for (std::size_t i = first; i < last; ++i)
                batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, solve_one, cfg_.eps[i]));
            for (auto& f : batch) rows.push_back(f.get());
        }
        Json j = stage_header("micro", etag);
        j["entries"] = rows;
        emit_json(report, j);
    }

    // -- converge
    void converge() {
        const auto report = out_ / "converge" / "sweep.json";
        const std::string etag = micro_etag("converge");
        if (cached("converge", report, etag)) return;
        Timer t("converge");
        SweepSetup s;
        s.cell = cfg_.cell;
        s.L1 = cfg_.L1;
        s.h_cell = cfg_.h_cell;
        s.eps = cfg_.eps;
        s.alpha = cfg_.alpha;
        s.gamma = cfg_.gamma;
        s.mu = cfg_.mu;
        s.macro = cfg_.macro;
        s.cell_inputs = cfg_.cell_inputs;
        s.trace_mode = cfg_.trace_mode;
        s.sigma_elements = cfg_.sigma_elements;
        s.jobs = opt_.jobs;
        const SweepReport rep = run_sweep(s);
        for (const auto& e : rep.entries)
            spdlog::info("converge: eps {} velocity error {:.6g} ({:.2f} s)", e.eps, e.error.velocity, e.seconds);
        Json j = stage_header("converge", etag);
        j["report"] = to_json(rep);
        emit_json(report, j);
        if (cfg_.write_csv) sweep_table(rep).write(out_ / "converge" / "sweep.csv");
    }

    // -- analyze
    void analyze() {
        const auto report = out_ / "analyze" / "analysis.json";
        const std::string etag = analyze_etag();
        if (cached("analyze", report, etag)) return;
        Timer t("analyze");
        std::vector<ConstantEstimate> all;
        Json constants = Json::array();
        Json a4json;
        std::shared_ptr<const Mesh> finest;
        for (double h : cfg_.h_list) {
            auto mesh = std::make_shared<const Mesh>(build_cell_mesh(cfg_.cell, h));
            finest = mesh;
            std::vector<ConstantEstimate> row;
            if (mesh->has_tag(BoundaryTag::GammaD)) {
                row.push_back(estimate_korn_constant(mesh, KornConstraint::PeriodicNormalZero));
                row.push_back(estimate_poincare_constant(mesh));
                row.push_back(estimate_trace_constant(mesh, {BoundaryTag::GammaD}));
            }
            for (auto& e : row) {
                Json jr = to_json(e);
                if (e.id == InequalityId::KornNormalTrace) jr["cosine_to_e1"] = cosine_to_constant(e, 0);
                constants.push_back(jr);
                if (cfg_.write_vtk && h == cfg_.h_list.back())
                    write_vtk(out_ / "analyze" / (std::string(to_string(e.id)) + ".vtk"), e);
                all.push_back(std::move(e));
            }
        }
        if (finest) {
            const A4Report a4 = check_assumption_a4(*finest);
            a4json = {{"satisfied", a4.satisfied}, {"rank", a4.rank}, {"moment_matrix", to_json(a4.moment_matrix)}};
        }
        Json bog;
        if (finest) {
            const BogovskiiSolver solver(finest);
            // zero-mean sample source
            double mean = 0, area = 0;
            auto f = [](const Vec2& y) { return std::sin(2 * std::numbers::pi * y.x()) + y.y() * y.y(); };
            for (int tri = 0; tri < finest->num_triangles(); ++tri) {
                const ElementMap em(*finest, tri);
                for (int q = 0; q < TriangleQuadrature::size; ++q) {
                    const double w = em.area * TriangleQuadrature::weights()[q];
                    mean += w * f(em.point(TriangleQuadrature::points()[q]));
                    area += w;
                }
            }
            mean /= area;
            const auto res = solver.solve([&](const Vec2& y) { return f(y) - mean; });
            bog = {{"divergence_residual", res.divergence_residual},
                   {"grad_norm", res.grad_norm},
                   {"f_norm", res.f_norm},
                   {"constant", res.constant()}};
        }
        CellGeometry rgeom = cfg_.cell;
        if (cfg_.restriction_on_slabs) rgeom.solid = Slabs{};
        const RestrictionSetup setup = make_restriction_setup(rgeom, cfg_.h_list.back());
        const auto defects = setup.invariant_defects();
        const auto sweep =
            restriction_norm_sweep(setup, cfg_.restriction_eps, cfg_.restriction_fields, opt_.seed, cfg_.L1);

        Json j = stage_header("analyze", etag);
        j["seed"] = opt_.seed;
        j["a4"] = a4json;
        j["constants"] = constants;
        j["bogovskii"] = bog;
        j["restriction"] = {{"strip_width", setup.strip_width},
                            {"invariant_defects", defects},
                            {"sweep", to_json(sweep)}};
        emit_json(report, j);
        if (cfg_.write_csv) constants_table(all).write(out_ / "analyze" / "constants.csv");
    }

private:
    struct Timer {
        explicit Timer(const char* n) : name(n), t0(std::chrono::steady_clock::now()) {
            spdlog::info("{}: start", name);
        }
        ~Timer() {
            spdlog::info("{}: done in {:.2f} s", name,
                         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        const char* name;
        std::chrono::steady_clock::time_point t0;
    };

    const RunConfig& cfg_;
    RunOptions opt_;
    bool use_cache_;
    std::filesystem::path out_;
};

}  // namespace

std::vector<StageStatus> run(Command command, const RunConfig& config, const RunOptions& options) {
    Runner r(config, options, command == Command::Pipeline);
    switch (command) {
        case Command::Cell: r.cell(); break;
        case Command::Darcy: r.darcy(r.cell()); break;
        case Command::Micro: r.micro(); break;
        case Command::Converge: r.converge(); break;
        case Command::Analyze: r.analyze(); break;
        case Command::Pipeline: {
            r.darcy(r.cell());
            r.micro();
            r.converge();
            r.analyze();
            Json status = Json::array();
            for (const auto& s : r.stages)
                status.push_back({{"stage", s.name}, {"etag", s.etag}, {"status", s.cached ? "cached" : "computed"}});
            write_json((options.out_dir.empty() ? config.out_dir : options.out_dir) / "pipeline.json",
                       {{"stages", status}});
            break;
        }
    }
    return r.stages;
}

}  // namespace thinlayer
