#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apisim/core.hpp"
#include "apisim/jsonl.hpp"
#include "apisim/report.hpp"

namespace apisim {

struct InsufficientData : Error {
    using Error::Error;
};

struct MissingRationale : Error {
    using Error::Error;
};

enum class Split { Training, OodSucc, OodFail, IdHigh, IdMedium, IdLow };

const char* to_string(Split split);
constexpr std::size_t kSplitCount = 6;
extern const Split kAllSplits[kSplitCount];

/// Target sample counts per benchmark split plus the number of APIs held out
/// entirely for the out-of-distribution sets.
struct SplitSizes {
    std::size_t ood_succ = 200;
    std::size_t ood_fail = 100;
    std::size_t id_each = 100;
    std::size_t held_out_apis = 60;

    /// Published benchmark scale: OOD-Succ 200, OOD-Fail 100, each ID set
    /// 100. Documented companion statistics at this scale: Training holds
    /// 95,272 samples over 7,437 APIs in 49 categories; OOD-Succ spans
    /// 38 APIs / 21 categories; OOD-Fail spans 22 APIs / 14 categories.
    /// The held-out API count is a free parameter (60 by default here).
    static SplitSizes paper();

    /// Small sizes for desk runs and the demo corpus: 20/10/10, 5 held out.
    static SplitSizes desk();
};

/// Split assignment over a curated pair list. Pairs are referenced by their
/// 0-based index into the input list; APIs by their doc_key.
struct DatasetManifest {
    std::uint64_t seed = 0;
    SplitSizes sizes;

    std::vector<std::size_t> training;
    std::vector<std::size_t> ood_succ;
    std::vector<std::size_t> ood_fail;
    std::vector<std::size_t> id_high;
    std::vector<std::size_t> id_medium;
    std::vector<std::size_t> id_low;

    /// doc_keys of the held-out APIs (sorted ascending).
    std::vector<std::string> held_out_apis;
    /// Remaining APIs in rank order (pair count desc, doc_key asc), chunked.
    std::vector<std::string> tertile_high;
    std::vector<std::string> tertile_medium;
    std::vector<std::string> tertile_low;

    /// doc_key -> names of the splits holding at least one of its pairs.
    std::map<std::string, std::vector<std::string>> api_index;
    /// category -> split name -> pair count.
    std::map<std::string, std::map<std::string, std::size_t>> category_index;

    const std::vector<std::size_t>& split(Split s) const;
    std::vector<std::size_t>& split(Split s);

    /// Checks every manifest invariant against the pair list it was built
    /// from; throws Error naming the first violation.
    void validate(const std::vector<PairRecord>& pairs) const;
};

ojson to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const json& j);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Builds the benchmark splits. One seeded generator drives, in order:
/// held-out API choice, OOD-Succ, OOD-Fail, ID-High, ID-Medium, ID-Low
/// sampling. Held-out APIs lose all their pairs from Training; OOD sets
/// sample collected (provenance Real) pairs of those APIs — Success for
/// OOD-Succ, ParameterChange for OOD-Fail. Remaining APIs are ranked by
/// pair count (desc, doc_key ties asc) and chunked into tertiles; each ID
/// set samples collected Success pairs from its tertile and removes them
/// from Training. Throws InsufficientData naming any unfillable split.
DatasetManifest split_dataset(const std::vector<PairRecord>& pairs,
                              const SplitSizes& sizes, std::uint64_t seed);

/// One simulator training sample; target always parses as a response
/// envelope (with the mechanism field present iff mode is CoT).
struct TrainingSample {
    SimulationMode mode = SimulationMode::Sft;
    std::string system_prompt;
    std::string user_prompt;
    std::string target;
};

bool operator==(const TrainingSample& a, const TrainingSample& b);

ojson to_json(const TrainingSample& sample);
TrainingSample sample_from_json(const json& j);
void write_samples(const std::filesystem::path& path,
                   const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> read_samples(const std::filesystem::path& path);

/// Plain-mode export: the fixed system prompt with its in-context example,
/// user prompt carrying the API doc and request, target = response envelope
/// without mechanism. Throws InvalidRecord when a pair's doc is not in the
/// catalog.
std::vector<TrainingSample> export_sft(const std::vector<PairRecord>& pairs,
                                       const DocCatalog& catalog);

/// Reasoning-mode export: system prompt begins with the [CHAIN_OF_THOUGHT]
/// tag line; target = envelope with mechanism_of_the_api (the pair's
/// rationale) first. Throws MissingRationale when a pair has none.
std::vector<TrainingSample> export_cot(const std::vector<PairRecord>& pairs,
                                       const DocCatalog& catalog);

/// Concatenates then shuffles with a seeded Fisher-Yates permutation.
std::vector<TrainingSample> mix_training(const std::vector<TrainingSample>& sft,
                                         const std::vector<TrainingSample>& cot,
                                         std::uint64_t seed);

/// Unshuffled concatenation (plain samples first) for sequential ablations.
std::vector<TrainingSample> sequential_training(
    const std::vector<TrainingSample>& sft,
    const std::vector<TrainingSample>& cot);

/// Per-split sample / distinct API / distinct category counts.
ReportTable stats(const DatasetManifest& manifest,
                  const std::vector<PairRecord>& pairs);

/// Fixed fine-tuning settings shipped alongside exports as metadata; this
/// artifact never consumes them.
ojson training_hyperparameters();
void write_hyperparameter_sidecar(const std::filesystem::path& path);

}  // namespace apisim
