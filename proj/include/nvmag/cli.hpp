// cli.hpp: configuration-driven experiment runner behind the nvmag tool.

#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nvmag/error.hpp"

namespace nvmag::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode { ok = 0, config_error = 2, numerical_error = 3 };

/// Schema violation; the message starts with the offending field path.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Every accepted key with its default value.
nlohmann::json default_config();

/// Reads YAML (or JSON when the extension is .json).
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Applies `user` on top of the defaults. Unknown keys and type mismatches
/// raise ConfigError naming the field path.
nlohmann::json merge_config(const nlohmann::json& user);

/// Applies one `dotted.path=value` override; the value is parsed as a YAML
/// scalar or flow sequence.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Top-level sections a subcommand reads.
std::vector<std::string> consumed_sections(std::string_view subcommand);

std::uint64_t fnv1a(std::string_view bytes);

/// Hash of the canonical config with runner-only keys (threads) removed.
std::uint64_t config_hash(const nlohmann::json& config);

/// Runs the nvmag command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nvmag::cli
