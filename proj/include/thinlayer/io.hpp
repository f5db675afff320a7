#pragma once

// Report serialization: legacy-VTK fields, RFC-4180 CSV tables, JSON documents.

#include "thinlayer/analysis_tools.hpp"
#include "thinlayer/micro_verify.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace thinlayer {

using Json = nlohmann::ordered_json;

/// Unstructured grid with a per-cell region id (0 everywhere for cell meshes,
/// the cell index for layer meshes).
void write_vtk(const std::filesystem::path& path, const Mesh& mesh);

/// Quadratic triangles with velocity at all P2 nodes and the P1 pressure
/// interpolated to the edge nodes.
void write_vtk(const std::filesystem::path& path, const StokesField& field, const std::string& title = "field");

/// Extremal velocity field of an inequality estimate.
void write_vtk(const std::filesystem::path& path, const ConstantEstimate& est);

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);
    void add_row(const std::vector<double>& row);
    void add_row(const std::vector<std::string>& row);
    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string format_number(double v);

Json to_json(const Mat2& m);
Json to_json(const Eigen::MatrixXd& m);
Json to_json(const RegimeDescriptor& regime);
Json to_json(const EffectiveLaw& law);
Json to_json(const DarcySolution& sol);
Json to_json(const SweepReport& report);
Json to_json(const ConstantEstimate& est);
Json to_json(const std::vector<RestrictionNormEntry>& sweep);

/// x, p0, u_bar columns at the mesh nodes.
CsvTable darcy_table(const DarcySolution& sol);
CsvTable sweep_table(const SweepReport& report);
CsvTable constants_table(const std::vector<ConstantEstimate>& estimates);

void write_json(const std::filesystem::path& path, const Json& doc);
Json read_json(const std::filesystem::path& path);

}  // namespace thinlayer
