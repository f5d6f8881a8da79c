#include "apisim/config.hpp"

#include <cstdlib>
#include <fstream>

namespace apisim {

namespace {

void reject_unknown(const json& obj, const std::string& prefix,
                    std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* name : allowed) {
            if (it.key() == name) {
                known = true;
                break;
            }
        }
        if (!known) {
            const std::string key =
                prefix.empty() ? it.key() : prefix + "." + it.key();
            throw ConfigInvalid(key, "unknown config key \"" + key + "\"");
        }
    }
}

template <typename T>
T get_field(const json& obj, const std::string& prefix, const char* name,
            T fallback) {
    if (!obj.contains(name)) {
        return fallback;
    }
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    try {
        return obj.at(name).get<T>();
    } catch (const json::exception& e) {
        throw ConfigInvalid(key, "config key \"" + key +
                                     "\" has the wrong type: " + e.what());
    }
}

const json* section(const json& j, const char* name) {
    if (!j.contains(name)) {
        return nullptr;
    }
    const json& s = j.at(name);
    if (!s.is_object()) {
        throw ConfigInvalid(name, std::string("config section \"") + name +
                                      "\" must be an object");
    }
    return &s;
}

RoleConfig parse_role(const json& obj, const std::string& prefix,
                      const EnvReader& env) {
    reject_unknown(obj, prefix,
                   {"kind", "endpoint_url", "model_id", "api_key_env_var",
                    "api_key", "timeout_ms", "max_attempts", "max_in_flight",
                    "backoff_base_ms"});
    RoleConfig role;
    const std::string kind =
        get_field<std::string>(obj, prefix, "kind", "mock");
    if (kind == "mock") {
        role.kind = BackendKind::Mock;
    } else if (kind == "http") {
        role.kind = BackendKind::Http;
    } else {
        throw ConfigInvalid(prefix + ".kind",
                            "config key \"" + prefix +
                                ".kind\" must be \"mock\" or \"http\", got \"" +
                                kind + "\"");
    }
    role.http.endpoint_url =
        get_field<std::string>(obj, prefix, "endpoint_url", "");
    role.http.model_id = get_field<std::string>(obj, prefix, "model_id", "");
    role.http.api_key_env_var =
        get_field<std::string>(obj, prefix, "api_key_env_var", "");
    if (obj.contains("api_key")) {
        role.http.api_key = get_field<std::string>(obj, prefix, "api_key", "");
    }
    role.http.request_timeout = std::chrono::milliseconds(get_field<int>(
        obj, prefix, "timeout_ms",
        static_cast<int>(role.http.request_timeout.count())));
    role.http.max_attempts =
        get_field<int>(obj, prefix, "max_attempts", role.http.max_attempts);
    role.http.max_in_flight =
        get_field<int>(obj, prefix, "max_in_flight", role.http.max_in_flight);
    role.http.backoff_base = std::chrono::milliseconds(get_field<int>(
        obj, prefix, "backoff_base_ms",
        static_cast<int>(role.http.backoff_base.count())));

    // Secrets: the named env var wins over any file-side placeholder.
    if (!role.http.api_key_env_var.empty()) {
        const char* value = env ? env(role.http.api_key_env_var.c_str())
                                : std::getenv(role.http.api_key_env_var.c_str());
        if (value != nullptr && *value != '\0') {
            role.http.api_key = std::string(value);
        }
    }
    return role;
}

SplitSizes parse_sizes(const json& j) {
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (name == "paper") {
            return SplitSizes::paper();
        }
        if (name == "desk") {
            return SplitSizes::desk();
        }
        throw ConfigInvalid("sizes", "config key \"sizes\" must be \"paper\", "
                                     "\"desk\", or an object, got \"" +
                                         name + "\"");
    }
    if (!j.is_object()) {
        throw ConfigInvalid(
            "sizes", "config key \"sizes\" must be \"paper\", \"desk\", or an "
                     "object");
    }
    reject_unknown(j, "sizes",
                   {"ood_succ", "ood_fail", "id_each", "held_out_apis"});
    SplitSizes sizes;
    sizes.ood_succ =
        get_field<std::size_t>(j, "sizes", "ood_succ", sizes.ood_succ);
    sizes.ood_fail =
        get_field<std::size_t>(j, "sizes", "ood_fail", sizes.ood_fail);
    sizes.id_each =
        get_field<std::size_t>(j, "sizes", "id_each", sizes.id_each);
    sizes.held_out_apis = get_field<std::size_t>(j, "sizes", "held_out_apis",
                                                 sizes.held_out_apis);
    return sizes;
}

}  // namespace

TimeSource AppConfig::time_source() const {
    if (fixed_time.has_value()) {
        const std::string value = *fixed_time;
        return [value] { return value; };
    }
    return rfc3339_now;
}

AppConfig config_from_json(const json& j, const EnvReader& env) {
    if (!j.is_object()) {
        throw ConfigInvalid("", "config document must be a JSON object");
    }
    reject_unknown(j, "",
                   {"global_seed", "fixed_time", "paths", "collection",
                    "policy", "gateway", "sizes", "backends"});

    AppConfig config;
    config.global_seed =
        get_field<std::uint64_t>(j, "", "global_seed", config.global_seed);
    if (j.contains("fixed_time")) {
        config.fixed_time = get_field<std::string>(j, "", "fixed_time", "");
    }

    if (const json* paths = section(j, "paths")) {
        reject_unknown(*paths, "paths",
                       {"out_dir", "catalog", "raw", "curated", "manifest",
                        "cache", "records"});
        config.paths.out_dir = get_field<std::string>(
            *paths, "paths", "out_dir", config.paths.out_dir.string());
        config.paths.catalog =
            get_field<std::string>(*paths, "paths", "catalog", "");
        config.paths.raw = get_field<std::string>(*paths, "paths", "raw", "");
        config.paths.curated =
            get_field<std::string>(*paths, "paths", "curated", "");
        config.paths.manifest =
            get_field<std::string>(*paths, "paths", "manifest", "");
        config.paths.cache =
            get_field<std::string>(*paths, "paths", "cache", "");
        if (paths->contains("records")) {
            config.paths.records =
                get_field<std::string>(*paths, "paths", "records", "");
        }
    }

    if (const json* collection = section(j, "collection")) {
        reject_unknown(*collection, "collection",
                       {"calls_per_api", "max_attempts_per_call",
                        "scenario_temperature", "request_temperature",
                        "scenarios_per_api", "seed"});
        config.plan.calls_per_api =
            get_field<int>(*collection, "collection", "calls_per_api",
                           config.plan.calls_per_api);
        config.plan.max_attempts_per_call = get_field<int>(
            *collection, "collection", "max_attempts_per_call",
            config.plan.max_attempts_per_call);
        config.plan.scenario_temperature = get_field<double>(
            *collection, "collection", "scenario_temperature",
            config.plan.scenario_temperature);
        config.plan.request_temperature = get_field<double>(
            *collection, "collection", "request_temperature",
            config.plan.request_temperature);
        if (collection->contains("scenarios_per_api")) {
            config.plan.scenarios_per_api = get_field<int>(
                *collection, "collection", "scenarios_per_api", 0);
        }
        config.plan.seed = get_field<std::int64_t>(*collection, "collection",
                                                   "seed", config.plan.seed);
    }

    if (const json* policy = section(j, "policy")) {
        reject_unknown(*policy, "policy",
                       {"retained_failure_quota", "adherence_check_enabled",
                        "rationale_token_limit",
                        "synthesis_examples_per_prompt"});
        config.policy.retained_failure_quota = get_field<std::size_t>(
            *policy, "policy", "retained_failure_quota",
            config.policy.retained_failure_quota);
        config.policy.adherence_check_enabled = get_field<bool>(
            *policy, "policy", "adherence_check_enabled",
            config.policy.adherence_check_enabled);
        config.policy.rationale_token_limit = get_field<std::size_t>(
            *policy, "policy", "rationale_token_limit",
            config.policy.rationale_token_limit);
        config.policy.synthesis_examples_per_prompt = get_field<std::size_t>(
            *policy, "policy", "synthesis_examples_per_prompt",
            config.policy.synthesis_examples_per_prompt);
    }

    if (const json* gateway = section(j, "gateway")) {
        reject_unknown(*gateway, "gateway",
                       {"listen_address", "default_mode",
                        "max_observation_tokens", "record_path", "cache_path",
                        "doc_catalog_path"});
        config.gateway.listen_address =
            get_field<std::string>(*gateway, "gateway", "listen_address",
                                   config.gateway.listen_address);
        if (gateway->contains("default_mode")) {
            const std::string mode = get_field<std::string>(
                *gateway, "gateway", "default_mode", "sft");
            try {
                config.gateway.default_mode = mode_from_string(mode);
            } catch (const Error& e) {
                throw ConfigInvalid("gateway.default_mode", e.what());
            }
        }
        config.gateway.max_observation_tokens = get_field<std::size_t>(
            *gateway, "gateway", "max_observation_tokens",
            config.gateway.max_observation_tokens);
        if (config.gateway.max_observation_tokens < 1) {
            throw ConfigInvalid("gateway.max_observation_tokens",
                                "config key \"gateway.max_observation_tokens\" "
                                "must be at least 1");
        }
        if (gateway->contains("record_path")) {
            config.gateway.record_path =
                get_field<std::string>(*gateway, "gateway", "record_path", "");
        }
        config.gateway.cache_path = get_field<std::string>(
            *gateway, "gateway", "cache_path",
            config.gateway.cache_path.string());
        config.gateway.doc_catalog_path = get_field<std::string>(
            *gateway, "gateway", "doc_catalog_path",
            config.gateway.doc_catalog_path.string());
    }

    if (j.contains("sizes")) {
        config.sizes = parse_sizes(j.at("sizes"));
    }

    if (const json* roles = section(j, "backends")) {
        reject_unknown(*roles, "backends",
                       {"writer", "checker", "reasoner", "simulator",
                        "embedder"});
        for (auto it = roles->begin(); it != roles->end(); ++it) {
            if (!it.value().is_object()) {
                throw ConfigInvalid("backends." + it.key(),
                                    "config key \"backends." + it.key() +
                                        "\" must be an object");
            }
            config.roles[it.key()] =
                parse_role(it.value(), "backends." + it.key(), env);
        }
    }

    return config;
}

AppConfig load_config(const std::filesystem::path& path,
                      const EnvReader& env) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigMissing("config file not found: " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigInvalid("", "config file " + path.string() +
                                    " is not valid JSON: " + e.what());
    }
    return config_from_json(j, env);
}

std::unique_ptr<backends::ChatBackend> make_chat_backend(
    const AppConfig& config, const std::string& role) {
    const auto it = config.roles.find(role);
    if (it == config.roles.end() || it->second.kind == BackendKind::Mock) {
        return std::make_unique<backends::MockChatBackend>();
    }
    return std::make_unique<backends::HttpChatBackend>(it->second.http);
}

std::unique_ptr<backends::Embedder> make_embedder(const AppConfig& config) {
    const auto it = config.roles.find("embedder");
    if (it == config.roles.end() || it->second.kind == BackendKind::Mock) {
        return std::make_unique<backends::MockEmbedder>();
    }
    return std::make_unique<backends::HttpEmbedder>(it->second.http);
}

}  // namespace apisim
