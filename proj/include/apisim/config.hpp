#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "apisim/backends.hpp"
#include "apisim/collection.hpp"
#include "apisim/curation.hpp"
#include "apisim/dataset.hpp"
#include "apisim/gateway.hpp"

namespace apisim {

struct ConfigMissing : Error {
    using Error::Error;
};

/// Invalid or unknown configuration entry; `key` names the offender.
struct ConfigInvalid : Error {
    ConfigInvalid(std::string key_name, const std::string& message)
        : Error(message), key(std::move(key_name)) {}
    std::string key;
};

enum class BackendKind { Mock, Http };

struct RoleConfig {
    BackendKind kind = BackendKind::Mock;
    backends::BackendConfig http;  // consulted when kind == Http
};

/// Full application configuration. Every section is optional; defaults are
/// the documented pipeline settings (200 calls per API, 2560-token rationale
/// budget, 2048-token observation cap).
struct AppConfig {
    std::uint64_t global_seed = 0;
    /// When set, every timestamp the pipelines write uses this fixed value,
    /// making output files byte-reproducible.
    std::optional<std::string> fixed_time;

    struct Paths {
        std::filesystem::path out_dir = "out";
        std::filesystem::path catalog;
        std::filesystem::path raw;
        std::filesystem::path curated;
        std::filesystem::path manifest;
        std::filesystem::path cache;
        std::optional<std::filesystem::path> records;
    } paths;

    collection::CollectionPlan plan;
    curation::CurationPolicy policy;
    GatewayConfig gateway;
    SplitSizes sizes;  // paper scale unless overridden ("desk" shrinks it)

    /// writer / checker / reasoner / simulator / embedder.
    std::map<std::string, RoleConfig> roles;

    /// The time source the pipelines should use (fixed_time when set).
    TimeSource time_source() const;
};

using EnvReader = std::function<const char*(const char*)>;

/// Parses the JSON config file. Unknown keys anywhere in the document raise
/// ConfigInvalid naming the key; a missing file raises ConfigMissing. Env
/// vars named by api_key_env_var override file-side api_key placeholders.
AppConfig load_config(const std::filesystem::path& path,
                      const EnvReader& env = {});

/// Parses a config document already in memory (same rules as load_config).
AppConfig config_from_json(const json& j, const EnvReader& env = {});

/// Instantiates the chat backend for a role ("writer", "checker", ...),
/// defaulting to the deterministic mock when the role is not configured.
std::unique_ptr<backends::ChatBackend> make_chat_backend(
    const AppConfig& config, const std::string& role);

std::unique_ptr<backends::Embedder> make_embedder(const AppConfig& config);

}  // namespace apisim
