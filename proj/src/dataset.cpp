#include "apisim/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <utility>

#include "apisim/prompts.hpp"

namespace apisim {

namespace {

template <typename T>
std::vector<T> sample_k(std::vector<T> pool, std::size_t k, std::mt19937_64& rng) {
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng() % (pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

std::string pair_label(const PairRecord& pair) {
    return pair.request.category + "/" + pair.request.tool_name + "/" +
           pair.request.api_name;
}

}  // namespace

const Split kAllSplits[kSplitCount] = {Split::Training, Split::OodSucc,
                                       Split::OodFail,  Split::IdHigh,
                                       Split::IdMedium, Split::IdLow};

const char* to_string(Split split) {
    switch (split) {
        case Split::Training: return "Training";
        case Split::OodSucc: return "OOD-Succ";
        case Split::OodFail: return "OOD-Fail";
        case Split::IdHigh: return "ID-High";
        case Split::IdMedium: return "ID-Medium";
        case Split::IdLow: return "ID-Low";
    }
    return "Training";
}

SplitSizes SplitSizes::paper() {
    SplitSizes s;
    s.ood_succ = 200;
    s.ood_fail = 100;
    s.id_each = 100;
    s.held_out_apis = 60;
    return s;
}

SplitSizes SplitSizes::desk() {
    SplitSizes s;
    s.ood_succ = 20;
    s.ood_fail = 10;
    s.id_each = 10;
    s.held_out_apis = 5;
    return s;
}

const std::vector<std::size_t>& DatasetManifest::split(Split s) const {
    switch (s) {
        case Split::Training: return training;
        case Split::OodSucc: return ood_succ;
        case Split::OodFail: return ood_fail;
        case Split::IdHigh: return id_high;
        case Split::IdMedium: return id_medium;
        case Split::IdLow: return id_low;
    }
    return training;
}

std::vector<std::size_t>& DatasetManifest::split(Split s) {
    return const_cast<std::vector<std::size_t>&>(
        static_cast<const DatasetManifest*>(this)->split(s));
}

void DatasetManifest::validate(const std::vector<PairRecord>& pairs) const {
    std::set<std::size_t> seen;
    for (const Split s : kAllSplits) {
        for (const std::size_t idx : split(s)) {
            if (idx >= pairs.size()) {
                throw Error(std::string(to_string(s)) +
                            " references pair index " + std::to_string(idx) +
                            " beyond the pair list");
            }
            if (!seen.insert(idx).second) {
                throw Error("pair index " + std::to_string(idx) +
                            " appears in more than one split");
            }
        }
    }

    const std::set<std::string> held(held_out_apis.begin(),
                                     held_out_apis.end());
    for (const std::size_t idx : training) {
        if (held.count(pairs[idx].doc_key) != 0) {
            throw Error("Training holds a pair of held-out API " +
                        pair_label(pairs[idx]));
        }
    }
    for (const Split s : {Split::OodSucc, Split::OodFail}) {
        for (const std::size_t idx : split(s)) {
            if (held.count(pairs[idx].doc_key) == 0) {
                throw Error(std::string(to_string(s)) +
                            " holds a pair of a non-held-out API " +
                            pair_label(pairs[idx]));
            }
        }
    }
    for (const std::size_t idx : ood_succ) {
        if (pairs[idx].outcome != CallOutcome::Success) {
            throw Error("OOD-Succ holds a non-Success pair " +
                        pair_label(pairs[idx]));
        }
    }
    for (const std::size_t idx : ood_fail) {
        if (pairs[idx].outcome != CallOutcome::ParameterChange) {
            throw Error("OOD-Fail holds a non-ParameterChange pair " +
                        pair_label(pairs[idx]));
        }
    }

    const auto check_tertile = [&](Split s,
                                   const std::vector<std::string>& tertile) {
        const std::set<std::string> members(tertile.begin(), tertile.end());
        for (const std::size_t idx : split(s)) {
            if (members.count(pairs[idx].doc_key) == 0) {
                throw Error(std::string(to_string(s)) +
                            " holds a pair outside its tertile: " +
                            pair_label(pairs[idx]));
            }
        }
    };
    check_tertile(Split::IdHigh, tertile_high);
    check_tertile(Split::IdMedium, tertile_medium);
    check_tertile(Split::IdLow, tertile_low);
}

DatasetManifest split_dataset(const std::vector<PairRecord>& pairs,
                              const SplitSizes& sizes, std::uint64_t seed) {
    std::map<std::string, std::size_t> per_api_counts;
    for (const auto& pair : pairs) {
        ++per_api_counts[pair.doc_key];
    }
    std::vector<std::string> api_keys;
    api_keys.reserve(per_api_counts.size());
    for (const auto& [key, count] : per_api_counts) {
        (void)count;
        api_keys.push_back(key);
    }

    if (sizes.held_out_apis > api_keys.size()) {
        throw InsufficientData(
            "held-out API sample needs " + std::to_string(sizes.held_out_apis) +
            " APIs, the pair list spans " + std::to_string(api_keys.size()));
    }

    DatasetManifest m;
    m.seed = seed;
    m.sizes = sizes;
    std::mt19937_64 rng(seed);

    m.held_out_apis = sample_k(api_keys, sizes.held_out_apis, rng);
    std::sort(m.held_out_apis.begin(), m.held_out_apis.end());
    const std::set<std::string> held(m.held_out_apis.begin(),
                                     m.held_out_apis.end());

    const auto sample_split = [&](const char* name, std::size_t want,
                                  auto&& eligible) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            if (eligible(pairs[i])) {
                pool.push_back(i);
            }
        }
        if (pool.size() < want) {
            throw InsufficientData(std::string(name) + " needs " +
                                   std::to_string(want) +
                                   " eligible pairs, found " +
                                   std::to_string(pool.size()));
        }
        std::vector<std::size_t> picked = sample_k(std::move(pool), want, rng);
        std::sort(picked.begin(), picked.end());
        return picked;
    };

    m.ood_succ = sample_split(
        "OOD-Succ", sizes.ood_succ, [&](const PairRecord& p) {
            return p.provenance == Provenance::Real &&
                   p.outcome == CallOutcome::Success &&
                   held.count(p.doc_key) != 0;
        });
    m.ood_fail = sample_split(
        "OOD-Fail", sizes.ood_fail, [&](const PairRecord& p) {
            return p.provenance == Provenance::Real &&
                   p.outcome == CallOutcome::ParameterChange &&
                   held.count(p.doc_key) != 0;
        });

    // Remaining APIs ranked by pair count desc, doc_key asc, then chunked
    // into tertiles of q+(i<r) so edge APIs land in the higher-rank chunk.
    std::vector<std::string> remaining;
    for (const auto& [key, count] : per_api_counts) {
        (void)count;
        if (held.count(key) == 0) {
            remaining.push_back(key);
        }
    }
    std::sort(remaining.begin(), remaining.end(),
              [&](const std::string& a, const std::string& b) {
                  const std::size_t ca = per_api_counts[a];
                  const std::size_t cb = per_api_counts[b];
                  if (ca != cb) {
                      return ca > cb;
                  }
                  return a < b;
              });
    const std::size_t n = remaining.size();
    const std::size_t q = n / 3;
    const std::size_t r = n % 3;
    std::vector<std::string>* tertiles[3] = {&m.tertile_high,
                                             &m.tertile_medium, &m.tertile_low};
    std::size_t cursor = 0;
    for (std::size_t t = 0; t < 3; ++t) {
        const std::size_t len = q + (t < r ? 1 : 0);
        tertiles[t]->assign(remaining.begin() + cursor,
                            remaining.begin() + cursor + len);
        cursor += len;
    }

    std::set<std::size_t> removed;
    const auto sample_id = [&](const char* name,
                               const std::vector<std::string>& tertile) {
        const std::set<std::string> members(tertile.begin(), tertile.end());
        std::vector<std::size_t> picked = sample_split(
            name, sizes.id_each, [&](const PairRecord& p) {
                return p.provenance == Provenance::Real &&
                       p.outcome == CallOutcome::Success &&
                       members.count(p.doc_key) != 0;
            });
        removed.insert(picked.begin(), picked.end());
        return picked;
    };
    m.id_high = sample_id("ID-High", m.tertile_high);
    m.id_medium = sample_id("ID-Medium", m.tertile_medium);
    m.id_low = sample_id("ID-Low", m.tertile_low);

    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (held.count(pairs[i].doc_key) == 0 && removed.count(i) == 0) {
            m.training.push_back(i);
        }
    }

    for (const Split s : kAllSplits) {
        const char* name = to_string(s);
        for (const std::size_t idx : m.split(s)) {
            auto& splits_of_api = m.api_index[pairs[idx].doc_key];
            if (splits_of_api.empty() || splits_of_api.back() != name) {
                splits_of_api.push_back(name);
            }
            ++m.category_index[pairs[idx].request.category][name];
        }
    }

    m.validate(pairs);
    return m;
}

ojson to_json(const DatasetManifest& manifest) {
    ojson j;
    j["seed"] = manifest.seed;
    j["sizes"] = ojson{{"ood_succ", manifest.sizes.ood_succ},
                       {"ood_fail", manifest.sizes.ood_fail},
                       {"id_each", manifest.sizes.id_each},
                       {"held_out_apis", manifest.sizes.held_out_apis}};
    ojson splits;
    splits["training"] = manifest.training;
    splits["ood_succ"] = manifest.ood_succ;
    splits["ood_fail"] = manifest.ood_fail;
    splits["id_high"] = manifest.id_high;
    splits["id_medium"] = manifest.id_medium;
    splits["id_low"] = manifest.id_low;
    j["splits"] = std::move(splits);
    j["held_out_apis"] = manifest.held_out_apis;
    j["tertiles"] = ojson{{"high", manifest.tertile_high},
                          {"medium", manifest.tertile_medium},
                          {"low", manifest.tertile_low}};
    j["api_index"] = manifest.api_index;
    j["category_index"] = manifest.category_index;
    return j;
}

DatasetManifest manifest_from_json(const json& j) {
    try {
        DatasetManifest m;
        m.seed = j.at("seed").get<std::uint64_t>();
        const json& sizes = j.at("sizes");
        m.sizes.ood_succ = sizes.at("ood_succ").get<std::size_t>();
        m.sizes.ood_fail = sizes.at("ood_fail").get<std::size_t>();
        m.sizes.id_each = sizes.at("id_each").get<std::size_t>();
        m.sizes.held_out_apis = sizes.at("held_out_apis").get<std::size_t>();
        const json& splits = j.at("splits");
        m.training = splits.at("training").get<std::vector<std::size_t>>();
        m.ood_succ = splits.at("ood_succ").get<std::vector<std::size_t>>();
        m.ood_fail = splits.at("ood_fail").get<std::vector<std::size_t>>();
        m.id_high = splits.at("id_high").get<std::vector<std::size_t>>();
        m.id_medium = splits.at("id_medium").get<std::vector<std::size_t>>();
        m.id_low = splits.at("id_low").get<std::vector<std::size_t>>();
        m.held_out_apis =
            j.at("held_out_apis").get<std::vector<std::string>>();
        const json& tertiles = j.at("tertiles");
        m.tertile_high = tertiles.at("high").get<std::vector<std::string>>();
        m.tertile_medium =
            tertiles.at("medium").get<std::vector<std::string>>();
        m.tertile_low = tertiles.at("low").get<std::vector<std::string>>();
        m.api_index =
            j.at("api_index")
                .get<std::map<std::string, std::vector<std::string>>>();
        m.category_index =
            j.at("category_index")
                .get<std::map<std::string,
                              std::map<std::string, std::size_t>>>();
        return m;
    } catch (const json::exception& e) {
        throw Error(std::string("manifest JSON malformed: ") + e.what());
    }
}

namespace {

void write_json_file(const std::filesystem::path& path, const ojson& j) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(path.string() + " is not valid JSON: " + e.what());
    }
}

}  // namespace

void save_manifest(const std::filesystem::path& path,
                   const DatasetManifest& m) {
    write_json_file(path, to_json(m));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    return manifest_from_json(read_json_file(path));
}

bool operator==(const TrainingSample& a, const TrainingSample& b) {
    return a.mode == b.mode && a.system_prompt == b.system_prompt &&
           a.user_prompt == b.user_prompt && a.target == b.target;
}

ojson to_json(const TrainingSample& sample) {
    ojson j;
    j["mode"] = to_string(sample.mode);
    j["system"] = sample.system_prompt;
    j["user"] = sample.user_prompt;
    j["target"] = sample.target;
    return j;
}

TrainingSample sample_from_json(const json& j) {
    try {
        TrainingSample s;
        s.mode = mode_from_string(j.at("mode").get<std::string>());
        s.system_prompt = j.at("system").get<std::string>();
        s.user_prompt = j.at("user").get<std::string>();
        s.target = j.at("target").get<std::string>();
        return s;
    } catch (const json::exception& e) {
        throw InvalidRecord(std::string("training sample malformed: ") +
                            e.what());
    }
}

void write_samples(const std::filesystem::path& path,
                   const std::vector<TrainingSample>& samples) {
    std::vector<ojson> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) {
        rows.push_back(to_json(s));
    }
    write_jsonl(path, rows);
}

std::vector<TrainingSample> read_samples(const std::filesystem::path& path) {
    std::vector<TrainingSample> out;
    for (const json& row : read_jsonl(path)) {
        out.push_back(sample_from_json(row));
    }
    return out;
}

namespace {

const ApiDocument& resolve_doc(const DocCatalog& catalog,
                               const PairRecord& pair) {
    const ApiDocument* doc = catalog.find(pair.doc_key);
    if (doc == nullptr) {
        throw InvalidRecord("no catalog document for pair " +
                            pair_label(pair));
    }
    return *doc;
}

}  // namespace

std::vector<TrainingSample> export_sft(const std::vector<PairRecord>& pairs,
                                       const DocCatalog& catalog) {
    std::vector<TrainingSample> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        const ApiDocument& doc = resolve_doc(catalog, pair);
        const prompts::RenderedPrompt rendered =
            prompts::simulation(doc, pair.request, SimulationMode::Sft);
        ApiResponse target = pair.response;
        target.mechanism.reset();
        out.push_back({SimulationMode::Sft, rendered.system, rendered.user,
                       serialize_envelope(target)});
    }
    return out;
}

std::vector<TrainingSample> export_cot(const std::vector<PairRecord>& pairs,
                                       const DocCatalog& catalog) {
    std::vector<TrainingSample> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        if (!pair.rationale.has_value() || pair.rationale->empty()) {
            throw MissingRationale("pair " + pair_label(pair) +
                                   " has no rationale");
        }
        const ApiDocument& doc = resolve_doc(catalog, pair);
        const prompts::RenderedPrompt rendered =
            prompts::simulation(doc, pair.request, SimulationMode::Cot);
        ApiResponse target = pair.response;
        target.mechanism = *pair.rationale;
        out.push_back({SimulationMode::Cot, rendered.system, rendered.user,
                       serialize_envelope(target)});
    }
    return out;
}

std::vector<TrainingSample> mix_training(const std::vector<TrainingSample>& sft,
                                         const std::vector<TrainingSample>& cot,
                                         std::uint64_t seed) {
    std::vector<TrainingSample> out = sft;
    out.insert(out.end(), cot.begin(), cot.end());
    std::mt19937_64 rng(seed);
    for (std::size_t i = out.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(out[i - 1], out[j]);
    }
    return out;
}

std::vector<TrainingSample> sequential_training(
    const std::vector<TrainingSample>& sft,
    const std::vector<TrainingSample>& cot) {
    std::vector<TrainingSample> out = sft;
    out.insert(out.end(), cot.begin(), cot.end());
    return out;
}

ReportTable stats(const DatasetManifest& manifest,
                  const std::vector<PairRecord>& pairs) {
    ReportTable table;
    table.title = "Split Statistics";
    table.columns = {"Split", "Samples", "APIs", "Categories"};
    for (const Split s : kAllSplits) {
        std::set<std::string> apis;
        std::set<std::string> categories;
        const std::vector<std::size_t>& members = manifest.split(s);
        for (const std::size_t idx : members) {
            apis.insert(pairs.at(idx).doc_key);
            categories.insert(pairs.at(idx).request.category);
        }
        table.rows.push_back({to_string(s), with_thousands(members.size()),
                              with_thousands(apis.size()),
                              with_thousands(categories.size())});
    }
    return table;
}

ojson training_hyperparameters() {
    ojson j;
    j["learning_rate"] = 2e-05;
    j["per_device_train_batch_size"] = 2;
    j["seed"] = 42;
    j["num_devices"] = 8;
    j["gradient_accumulation_steps"] = 8;
    j["effective_train_batch_size"] = 128;
    j["optimizer"] = "adam";
    j["adam_betas"] = ojson::array({0.9, 0.999});
    j["adam_epsilon"] = 1e-08;
    j["lr_scheduler"] = "cosine";
    j["warmup_ratio"] = 0.04;
    j["warmup_steps"] = 100;
    j["num_epochs"] = 5;
    return j;
}

void write_hyperparameter_sidecar(const std::filesystem::path& path) {
    write_json_file(path, training_hyperparameters());
}

}  // namespace apisim
