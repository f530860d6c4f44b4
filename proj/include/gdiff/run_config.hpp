// run_config.hpp
// Flat key-value run configuration: built-in defaults, optionally merged
// from a JSON file, then overridden by command-line flags. Unknown keys are
// rejected and every run echoes its fully resolved configuration next to
// its outputs so runs can be reproduced from that file alone.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace gdiff {

class RunConfig {
public:
    explicit RunConfig(std::map<std::string, nlohmann::json> defaults)
        : values_(std::move(defaults)) {}

    void merge_file(const std::filesystem::path& path);
    void set(const std::string& key, nlohmann::json value);
    bool has(const std::string& key) const;

    template <typename T>
    T get(const std::string& key) const {
        return at(key).get<T>();
    }

    void write_resolved(const std::filesystem::path& path, const std::string& command) const;

private:
    const nlohmann::json& at(const std::string& key) const;
    std::map<std::string, nlohmann::json> values_;
};

}  // namespace gdiff
