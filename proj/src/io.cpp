#include "sbm/io.hpp"

#include <Eigen/Core>

#include <cstdio>
#include <stdexcept>

#ifndef SBMLAB_VERSION
#define SBMLAB_VERSION "0.0.0"
#endif

namespace sbm {

std::string config_hash(const nlohmann::json& config) {
    const std::string s = config.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_cell(const CsvCell& c) {
    if (const double* d = std::get_if<double>(&c)) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        return buf;
    }
    if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
    const std::string& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + '"';
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns, std::string hash,
                     std::size_t id_columns, bool keep_long)
    : path_(path), columns_(std::move(columns)), hash_(std::move(hash)), id_columns_(id_columns),
      keep_long_(keep_long), out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    if (id_columns_ > columns_.size()) throw std::invalid_argument("more id columns than columns");
    for (const auto& c : columns_) out_ << c << ',';
    out_ << "config_hash\n" << std::flush;
}

CsvWriter::~CsvWriter() {
    try {
        close();
    } catch (...) {
    }
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
    if (cells.size() != columns_.size()) throw std::invalid_argument("row width does not match the header");
    for (const auto& c : cells) out_ << format_cell(c) << ',';
    out_ << hash_ << '\n' << std::flush;
    if (keep_long_) kept_.push_back(cells);
    ++n_rows_;
}

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    out_.close();
    if (!keep_long_) return;
    std::filesystem::path lp = path_;
    lp.replace_filename(path_.stem().string() + "_long.csv");
    std::ofstream lo(lp);
    for (std::size_t k = 0; k < id_columns_; ++k) lo << columns_[k] << ',';
    lo << "variable,value,config_hash\n";
    for (const auto& r : kept_)
        for (std::size_t k = id_columns_; k < r.size(); ++k) {
            for (std::size_t j = 0; j < id_columns_; ++j) lo << format_cell(r[j]) << ',';
            lo << columns_[k] << ',' << format_cell(r[k]) << ',' << hash_ << '\n';
        }
}

std::string library_version() { return SBMLAB_VERSION; }

nlohmann::json to_json(const Manifest& m) {
    nlohmann::json j;
    j["manifest_version"] = kManifestVersion;
    j["command"] = m.command;
    j["config"] = m.config;
    j["config_hash"] = config_hash(m.config);
    j["seed"] = m.seed;
    j["threads"] = m.threads;
    j["wall_seconds"] = m.wall_seconds;
    j["partial"] = m.partial;
    j["status"] = m.status;
    j["outputs"] = m.outputs;
    j["summary"] = m.summary;
    j["versions"] = {{"sbmlab", library_version()},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__},
                     {"cxx_standard", __cplusplus}};
    return j;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << to_json(m).dump(2) << '\n';
}

}  // namespace sbm
