#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "internal.hpp"

namespace nvmag::cli {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

OutputSet::OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("--out-dir: cannot create " + dir_.string() + ": " + ec.message());
}

void OutputSet::write(const std::string& name, const std::string& bytes) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw ConfigError("--out-dir: cannot write " + (dir_ / name).string());
    out << bytes;
    hashes_[name] = fnv1a(bytes);
}

void OutputSet::csv(const std::string& name, const std::vector<std::string>& header,
                    const std::vector<std::vector<double>>& rows) {
    std::string text;
    for (std::size_t i = 0; i < header.size(); ++i) text += (i ? "," : "") + header[i];
    text += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) text += ',';
            text += format_number(row[i]);
        }
        text += '\n';
    }
    write(name, text);
}

void OutputSet::json(const std::string& name, const nlohmann::json& value) { write(name, value.dump(2) + "\n"); }

void OutputSet::adopt(const std::string& name) {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    hashes_[name] = fnv1a(buffer.str());
}

void OutputSet::manifest(std::string_view subcommand, const nlohmann::json& config, std::uint64_t seed) {
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& [name, h] : hashes_) outputs[name] = hex64(h);
    nlohmann::json m{{"subcommand", subcommand},
                     {"version", kVersion},
                     {"seed", seed},
                     {"config_hash", hex64(config_hash(config))},
                     {"outputs", outputs}};
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    if (!out) throw ConfigError("--out-dir: cannot write manifest");
    out << m.dump(2) << "\n";
}

}  // namespace nvmag::cli
