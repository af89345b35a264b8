#pragma once

// Bundle output helpers: atomic file writes (temp + rename) and the run
// manifest that makes bundles reproducible and self-describing.

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gentle/common.hpp"

namespace gentle {

inline constexpr const char* kVersion = "0.1.0";

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw domain_error("cannot open for writing: " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw domain_error("cannot open: " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Manifest {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::string command;
    std::vector<std::string> files;
};

inline nlohmann::json to_json(const Manifest& m) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(m.config_hash));
    nlohmann::json j;
    j["config_hash"] = hash;
    j["seed"] = m.seed;
    j["version"] = kVersion;
    j["command"] = m.command;
    j["files"] = m.files;
    return j;
}

} // namespace gentle
