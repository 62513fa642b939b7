// Shared pieces of the command implementations.

#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvmag/cli.hpp"

namespace nvmag::cli {

/// Collects the files a subcommand writes and their content hashes.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir);

    void csv(const std::string& name, const std::vector<std::string>& header,
             const std::vector<std::vector<double>>& rows);
    void json(const std::string& name, const nlohmann::json& value);
    /// Writes bytes produced elsewhere (already on disk) into the manifest.
    void adopt(const std::string& name);

    void manifest(std::string_view subcommand, const nlohmann::json& config, std::uint64_t seed);

    const std::filesystem::path& dir() const { return dir_; }

private:
    void write(const std::string& name, const std::string& bytes);

    std::filesystem::path dir_;
    std::map<std::string, std::uint64_t> hashes_;
};

std::string format_number(double v);
std::string hex64(std::uint64_t v);

}  // namespace nvmag::cli
