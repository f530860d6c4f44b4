#include "gdiff/run_config.hpp"

#include <fstream>
#include <stdexcept>

namespace gdiff {

void RunConfig::merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config file must be a flat JSON object");
    for (const auto& [key, value] : j.items()) {
        set(key, value);
    }
}

void RunConfig::set(const std::string& key, nlohmann::json value) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        throw std::runtime_error("unknown config key '" + key + "'");
    }
    it->second = std::move(value);
}

bool RunConfig::has(const std::string& key) const {
    const auto it = values_.find(key);
    return it != values_.end() && !it->second.is_null();
}

const nlohmann::json& RunConfig::at(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("unknown config key '" + key + "'");
    if (it->second.is_null()) throw std::runtime_error("config key '" + key + "' is required");
    return it->second;
}

void RunConfig::write_resolved(const std::filesystem::path& path, const std::string& command) const {
    nlohmann::json j;
    j["command"] = command;
    for (const auto& [key, value] : values_) j[key] = value;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write resolved config: " + path.string());
    out << j.dump(2) << "\n";
}

}  // namespace gdiff
