#include "thinlayer/cli.hpp"
#include "thinlayer/errors.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace thinlayer;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("thinlayer_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Json small_slab_config() {
    return Json::parse(R"({
      "geometry": {"solid_shape": "slabs", "params": {"delta": 0.25}},
      "regime": {"alpha": 1.0, "gamma": -2.0},
      "data": {"f0": [1.0, 0.0], "p_b": {"kind": "linear", "offset": 1.0, "slope": -1.0}},
      "discretization": {"h_cell": 0.125, "eps": [0.25, 0.125], "sigma_elements": 16},
      "analysis": {"h_list": [0.25, 0.125], "restriction_eps": [0.25, 0.125], "restriction_fields": 3}
    })");
}

}  // namespace

TEST_SUITE("io_cli") {

TEST_CASE("csv quoting and line endings") {
    CsvTable t({"name", "value"});
    t.add_row(std::vector<std::string>{"a,b", "say \"hi\""});
    t.add_row(std::vector<double>{0.5, -2});
    CHECK(t.str() == "name,value\r\n\"a,b\",\"say \"\"hi\"\"\"\r\n0.5,-2\r\n");
    CHECK_THROWS_AS(t.add_row(std::vector<double>{1}), Error);
}

TEST_CASE("numbers round-trip") {
    const double v = 0.1 + 0.2;
    CHECK(std::stod(format_number(v)) == v);
}

TEST_CASE("legacy vtk output") {
    const fs::path dir = scratch("vtk");
    const Mesh m = build_cell_mesh(CellGeometry{}, 0.25);
    write_vtk(dir / "mesh.vtk", m);
    const std::string s = slurp(dir / "mesh.vtk");
    CHECK(s.rfind("# vtk DataFile Version 3.0\n", 0) == 0);
    CHECK(s.find("POINTS " + std::to_string(m.num_vertices()) + " double") != std::string::npos);
    CHECK(s.find("CELL_TYPES " + std::to_string(m.num_triangles())) != std::string::npos);
}

TEST_CASE("published schema matches the compiled one") {
    const Json file = read_json(fs::path(THINLAYER_SOURCE_DIR) / "schemas" / "run_config.schema.json");
    CHECK(file == run_config_schema());
}

TEST_CASE("shipped configurations validate") {
    for (const auto& e : fs::directory_iterator(fs::path(THINLAYER_SOURCE_DIR) / "configs")) {
        CAPTURE(e.path().string());
        CHECK(validate_against_schema(read_json(e.path()), run_config_schema()).empty());
    }
}

TEST_CASE("schema violations") {
    Json c = small_slab_config();
    c["regime"].erase("gamma");
    c["geometry"]["colour"] = "red";
    c["data"]["g_sigma"] = {{"kind", "sin"}};
    const auto errors = validate_against_schema(c, run_config_schema());
    CHECK(errors.size() == 3);
    try {
        RunConfig::from_json(c);
        FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigInvalid);
        CHECK(exit_code_for(e) == 2);
    }
}

TEST_CASE("gamma is ignored without slip coefficient") {
    Json c = small_slab_config();
    c["regime"] = {{"alpha", 0.0}, {"gamma", -1.0}};
    const RunConfig cfg = RunConfig::from_json(c);
    REQUIRE(cfg.warnings.size() == 1);
    CHECK(cfg.warnings[0].find("gamma ignored") != std::string::npos);
    CHECK(cfg.gamma == 0.0);
}

TEST_CASE("exit codes") {
    CHECK(exit_code_for(Error(ErrorKind::SingularSystem, "x")) == 1);
    CHECK(exit_code_for(std::runtime_error("x")) == 1);
    CHECK(exit_code_for(Error(ErrorKind::ConfigInvalid, "x")) == 2);
}

TEST_CASE("cell command on the disk reports symmetric tensors") {
    Json c = small_slab_config();
    c["geometry"] = {{"solid_shape", "disk"}};
    c["regime"] = {{"alpha", 0.0}, {"gamma", 0.0}};
    RunOptions opt;
    opt.out_dir = scratch("cell");
    run(Command::Cell, RunConfig::from_json(c), opt);
    const Json j = read_json(opt.out_dir / "cell" / "effective_law.json");
    const Json& law = j["law"];
    CHECK(law["K_avg"][0][1].get<double>() == doctest::Approx(law["K_avg"][1][0].get<double>()).epsilon(1e-10));
    CHECK(law["K_sym"][0][1].get<double>() == doctest::Approx(law["K_sym"][1][0].get<double>()).epsilon(1e-10));
    CHECK(law["K_ratio"][0][0].get<double>() == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(fs::exists(opt.out_dir / "cell" / "w1.vtk"));
}

TEST_CASE("converge command writes a decreasing error column") {
    RunOptions opt;
    opt.out_dir = scratch("converge");
    run(Command::Converge, RunConfig::from_json(small_slab_config()), opt);
    std::istringstream csv(slurp(opt.out_dir / "converge" / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line.find("velocity_error") != std::string::npos);
    std::vector<double> errors;
    while (std::getline(csv, line)) {
        std::istringstream row(line);
        std::string eps, unknowns, err;
        std::getline(row, eps, ',');
        std::getline(row, unknowns, ',');
        std::getline(row, err, ',');
        errors.push_back(std::stod(err));
    }
    REQUIRE(errors.size() == 2);
    CHECK(errors[1] < errors[0]);
}

TEST_CASE("pipeline is deterministic and cached") {
    const RunConfig cfg = RunConfig::from_json(small_slab_config());
    RunOptions a, b;
    a.out_dir = scratch("pipe_a");
    b.out_dir = scratch("pipe_b");
    a.seed = b.seed = 17;
    const auto first = run(Command::Pipeline, cfg, a);
    for (const auto& s : first) CHECK_FALSE(s.cached);
    run(Command::Pipeline, cfg, b);
    for (const char* f : {"cell/effective_law.json", "darcy/darcy.json", "micro/micro.json", "converge/sweep.json",
                          "analyze/analysis.json"}) {
        CAPTURE(f);
        CHECK(slurp(a.out_dir / f) == slurp(b.out_dir / f));
    }
    const auto before = fs::last_write_time(a.out_dir / "converge" / "sweep.json");
    const auto second = run(Command::Pipeline, cfg, a);
    REQUIRE(second.size() == first.size());
    for (std::size_t i = 0; i < second.size(); ++i) {
        CHECK(second[i].cached);
        CHECK(second[i].etag == first[i].etag);
    }
    CHECK(fs::last_write_time(a.out_dir / "converge" / "sweep.json") == before);
    CHECK(read_json(a.out_dir / "pipeline.json")["stages"][0]["status"] == "cached");

    RunOptions c = a;
    c.seed = 18;
    const auto third = run(Command::Pipeline, cfg, c);
    CHECK(third.back().name == "analyze");
    CHECK_FALSE(third.back().cached);
    CHECK(third.front().cached);
}

}
