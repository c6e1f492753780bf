#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace sbm {

// FNV-1a of the compact JSON dump; keys are sorted by nlohmann::json, so equal configs hash equally.
std::string config_hash(const nlohmann::json& config);

using CsvCell = std::variant<double, long long, std::string>;

std::string format_cell(const CsvCell& c);

// CSV with a fixed column order, reals at 17 significant digits, and the config hash as the
// last column of every row. Rows are flushed as they are written. Optionally keeps the rows
// to emit a long-format copy (id columns, variable, value) on close.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns, std::string hash,
              std::size_t id_columns = 0, bool keep_long = false);
    ~CsvWriter();

    void row(const std::vector<CsvCell>& cells);
    void close();
    const std::filesystem::path& path() const { return path_; }
    std::size_t rows() const { return n_rows_; }

private:
    std::filesystem::path path_;
    std::vector<std::string> columns_;
    std::string hash_;
    std::size_t id_columns_;
    bool keep_long_;
    std::ofstream out_;
    std::vector<std::vector<CsvCell>> kept_;
    std::size_t n_rows_ = 0;
    bool closed_ = false;
};

struct Manifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    double wall_seconds = 0.0;
    bool partial = false;
    std::string status = "ok";
    std::vector<std::string> outputs;
    nlohmann::json summary = nlohmann::json::object();
};

constexpr int kManifestVersion = 1;
std::string library_version();

nlohmann::json to_json(const Manifest& m);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

}  // namespace sbm
