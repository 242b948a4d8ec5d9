// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace talm {

/// Everything needed to re-execute a command: its argv, the resolved
/// configuration, seeds, tool and generator descriptions and content hashes of
/// the inputs. Timestamps are informational only.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::map<std::string, std::uint64_t> seeds;
    std::vector<std::string> tools;
    std::string generator;
    /// input path -> hex content hash
    std::map<std::string, std::string> dataset_hashes;
    /// artifact name -> path
    std::map<std::string, std::string> artifacts;
    std::string started_at;
    std::string finished_at;
    std::string tool_version;
};

inline constexpr const char* kManifestFile = "manifest.json";

[[nodiscard]] nlohmann::ordered_json to_json(const RunManifest& m);
/// Throws Error(SchemaError).
[[nodiscard]] RunManifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
/// Throws Error(IoError | SchemaError).
[[nodiscard]] RunManifest read_manifest(const std::filesystem::path& path);

/// UTC time as "YYYY-MM-DDTHH:MM:SSZ".
[[nodiscard]] std::string utc_timestamp();

}  // namespace talm
