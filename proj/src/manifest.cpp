// SPDX-License-Identifier: Apache-2.0
#include "talm/manifest.hpp"

#include <chrono>
#include <ctime>

#include "talm/datasets.hpp"
#include "talm/error.hpp"

namespace talm {

nlohmann::ordered_json to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["argv"] = m.argv;
    j["config"] = m.config;
    j["seeds"] = m.seeds;
    j["tools"] = m.tools;
    j["generator"] = m.generator;
    j["dataset_hashes"] = m.dataset_hashes;
    j["artifacts"] = m.artifacts;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    j["tool_version"] = m.tool_version;
    return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.argv = j.at("argv").get<std::vector<std::string>>();
        m.config = nlohmann::ordered_json::parse(j.value("config", nlohmann::json::object()).dump());
        m.seeds = j.value("seeds", std::map<std::string, std::uint64_t>{});
        m.tools = j.value("tools", std::vector<std::string>{});
        m.generator = j.value("generator", std::string());
        m.dataset_hashes = j.value("dataset_hashes", std::map<std::string, std::string>{});
        m.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
        m.started_at = j.value("started_at", std::string());
        m.finished_at = j.value("finished_at", std::string());
        m.tool_version = j.value("tool_version", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(1, "manifest", e.what());
    }
    return m;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
    data::write_file_atomic(path, to_json(m).dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path) {
    const auto text = data::read_file(path);
    try {
        return manifest_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(1, "manifest", e.what());
    }
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace talm
