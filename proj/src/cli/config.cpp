#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "nvmag/cli.hpp"

namespace nvmag::cli {

using nlohmann::json;

namespace {

json yaml_to_json(const YAML::Node& node, const std::string& path) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            throw ConfigError(path + ": empty value");
        case YAML::NodeType::Sequence: {
            json arr = json::array();
            for (std::size_t i = 0; i < node.size(); ++i)
                arr.push_back(yaml_to_json(node[i], path + "[" + std::to_string(i) + "]"));
            return arr;
        }
        case YAML::NodeType::Map: {
            json obj = json::object();
            for (const auto& kv : node) {
                const std::string key = kv.first.as<std::string>();
                obj[key] = yaml_to_json(kv.second, path.empty() ? key : path + "." + key);
            }
            return obj;
        }
        case YAML::NodeType::Scalar: break;
    }
    const std::string text = node.Scalar();
    if (node.Tag() == "!") return text;  // quoted
    if (text == "true") return true;
    if (text == "false") return false;
    if (!text.empty()) {
        errno = 0;
        char* end = nullptr;
        const long long integer = std::strtoll(text.c_str(), &end, 10);
        if (*end == '\0' && errno == 0) return integer;
        errno = 0;
        const double number = std::strtod(text.c_str(), &end);
        if (*end == '\0' && errno == 0) return number;
    }
    return text;
}

const char* type_name(const json& j) {
    if (j.is_boolean()) return "a boolean";
    if (j.is_number()) return "a number";
    if (j.is_string()) return "a string";
    if (j.is_array()) return "a list of numbers";
    if (j.is_object()) return "a section";
    return "a value";
}

void merge_into(json& target, const json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError((path.empty() ? std::string("<root>") : path) + ": expected a section");
    for (const auto& [key, value] : user.items()) {
        const std::string here = path.empty() ? key : path + "." + key;
        if (!target.contains(key)) throw ConfigError(here + ": unknown key");
        json& slot = target[key];
        if (slot.is_object()) {
            merge_into(slot, value, here);
            continue;
        }
        bool ok = false;
        if (slot.is_boolean()) ok = value.is_boolean();
        else if (slot.is_number()) ok = value.is_number();
        else if (slot.is_string()) ok = value.is_string();
        else if (slot.is_array()) {
            ok = value.is_array();
            for (std::size_t i = 0; ok && i < value.size(); ++i)
                if (!value[i].is_number())
                    throw ConfigError(here + "[" + std::to_string(i) + "]: expected a number");
        }
        if (!ok) throw ConfigError(here + ": expected " + type_name(slot) + ", got " + type_name(value));
        slot = value;
    }
}

}  // namespace

json default_config() {
    return json{
        {"seed", 1},
        {"threads", 1},
        {"constants", {{"d_g", 2.87e9}, {"d_parallel", 3.5e-2}, {"d_perp", 0.17}, {"gyromag", 28.0}}},
        {"environment", {{"b_x", 0.0}, {"b_y", 0.0}, {"b_z", 3.0e7}, {"e_x", 0.0}, {"e_y", 0.0}, {"e_z", 0.0}}},
        {"noise",
         {{"sigma_bz", 0.0},
          {"sigma_bperp", 0.0},
          {"sigma_ez", 0.0},
          {"sigma_dg", 0.0},
          {"t2", 2.36e-3},
          {"p", 2.0}}},
        {"readout", {{"bright_counts", 0.05}, {"contrast_c0", 0.3}, {"init_fidelity", 1.0}}},
        {"sequence", {{"rotations", "ideal"}, {"rabi", 5e6}, {"echo_sigma", 1e-7}, {"tol", 1e-8}}},
        {"stirap",
         {{"peak_plus", 5e6},
          {"peak_minus", 5e6},
          {"sigma", 1e-6},
          {"delay", 1.2e-6},
          {"delta_plus", 0.0},
          {"delta_minus", 0.0},
          {"ordering", "counterintuitive"},
          {"half", false},
          {"samples", 201}}},
        {"levels", {{"b_z", json::array({3.0e7})}}},
        {"odmr", {{"pi_duration", 1e-6}, {"span", 3e6}, {"points", 201}, {"shots_per_point", 1000}}},
        {"ramsey",
         {{"variant", "ramsey_pm1"},
          {"free_time_start", 0.0},
          {"free_time_stop", 2e-4},
          {"points", 101},
          {"detuning_offset", 5e4},
          {"field_offset", 0.0},
          {"readout_phase", 0.0},
          {"shots", 200}}},
        {"cpmg_ac",
         {{"variant", "cpmg_ac_pm1"},
          {"period", 1e-3},
          {"phase", 0.0},
          {"echoes", 1},
          {"amplitude_max", 20.0},
          {"points", 81},
          {"readout_phase", 0.0},
          {"shots", 1000}}},
        {"sensitivity",
         {{"mode", "curve"},
          {"ac",
           {{"n_photons", 0.05}, {"tau", 1e-3}, {"c0", 0.3}, {"t2", 2.36e-3}, {"p", 2.0}, {"delta_s", 2}}},
          {"dc", {{"tau", 1e-4}, {"n_photons", 0.05}, {"g_max", 0.01}}},
          {"curve",
           {{"family", "continuous_two_tone"},
            {"durations", json::array({1e-6, 3e-6, 1e-5, 3e-5, 1e-4})},
            {"grid_points", 241},
            {"span", 6.0},
            {"draws", 200},
            {"overhead", 0.0},
            {"raman_detuning", 2e6}}}}},
        {"optimize",
         {{"bins", 16},
          {"duration", 5.1e-5},
          {"amp_max", 0.0},
          {"raman_detuning", 0.0},
          {"objective", "slope"},
          {"auto_b0", true},
          {"b0", 0.0},
          {"population_size", 64},
          {"generations", 100},
          {"elite_count", 2},
          {"tournament_size", 4},
          {"mutation_std", 0.1},
          {"gene_mutation_rate", 0.25},
          {"crossover_rate", 0.7},
          {"delta_b", 1.0}}},
        {"track_field",
         {{"variant", "ramsey_pm1"},
          {"free_time", 2e-5},
          {"shots_per_step", 100000},
          {"steps", 100},
          {"dwell", 10},
          {"levels", 5},
          {"step_size", 40.0},
          {"calibration_draws", 200}}},
        {"allan",
         {{"variant", "ramsey_pm1"},
          {"free_time", 5e-5},
          {"total_duration", 10000.0},
          {"cadence", 1.0},
          {"shots_per_interval", 100000},
          {"field", 0.0},
          {"drift_channel", "none"},
          {"drift_rate", 0.0},
          {"drift_csv", ""},
          {"taus", json::array()},
          {"calibration_draws", 200}}},
    };
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    if (path.extension() == ".json") {
        try {
            return json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }
    try {
        const YAML::Node root = YAML::Load(text);
        if (root.IsNull()) return json::object();
        return yaml_to_json(root, "");
    } catch (const YAML::Exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json merge_config(const json& user) {
    json config = default_config();
    merge_into(config, user, "");
    return config;
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment + ": override must look like key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = yaml_to_json(YAML::Load(text.empty() ? "\"\"" : text), path);
    } catch (const YAML::Exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    // Build a nested patch and merge it so the same checks apply.
    json patch = value;
    std::size_t end = path.size();
    while (true) {
        const auto dot = path.rfind('.', end - 1);
        const std::string key = path.substr(dot == std::string::npos ? 0 : dot + 1,
                                            end - (dot == std::string::npos ? 0 : dot + 1));
        if (key.empty()) throw ConfigError(path + ": empty key in override path");
        patch = json{{key, patch}};
        if (dot == std::string::npos) break;
        end = dot;
    }
    merge_into(config, patch, "");
}

std::vector<std::string> consumed_sections(std::string_view sub) {
    std::vector<std::string> s{"seed", "threads", "constants", "environment"};
    auto add = [&](std::initializer_list<const char*> more) { s.insert(s.end(), more.begin(), more.end()); };
    if (sub == "levels") add({"levels"});
    else if (sub == "odmr") add({"noise", "readout", "sequence", "odmr"});
    else if (sub == "ramsey") add({"noise", "readout", "sequence", "stirap", "ramsey"});
    else if (sub == "stirap") add({"sequence", "stirap"});
    else if (sub == "cpmg-ac") add({"noise", "readout", "sequence", "stirap", "cpmg_ac"});
    else if (sub == "sensitivity") add({"noise", "readout", "sequence", "sensitivity", "optimize"});
    else if (sub == "optimize") add({"sequence", "optimize"});
    else if (sub == "track-field") add({"noise", "readout", "sequence", "stirap", "track_field"});
    else if (sub == "allan") add({"noise", "readout", "sequence", "stirap", "allan"});
    return s;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const json& config) {
    json canonical = config;
    canonical.erase("threads");
    return fnv1a(canonical.dump());
}

}  // namespace nvmag::cli
