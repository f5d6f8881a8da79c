#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "apisim/backends.hpp"
#include "apisim/core.hpp"
#include "apisim/jsonl.hpp"

namespace apisim::curation {

// The checker backend kept answering with something that is not the
// documented JSON verdict.
struct MalformedVerdict : Error {
    using Error::Error;
};

struct CurationPolicy {
    std::size_t retained_failure_quota = 10000;
    bool adherence_check_enabled = true;
    std::size_t rationale_token_limit = 2560;
    std::size_t synthesis_examples_per_prompt = 10;
};

struct AdherenceVerdict {
    int overall_eval = 1;   // 1 keeps the pair, 0 rejects it
    std::string reason;
    bool checked = true;    // false when the checker never parsed (pair kept)
};

/// Keeps every Success record (input order), then ParameterChange records
/// stable-ordered by canonical key up to policy.retained_failure_quota.
/// All other outcomes are dropped.
std::vector<PairRecord> filter_pairs(const std::vector<PairRecord>& pairs,
                                     const CurationPolicy& policy);

/// Keeps a pair iff it carries a rationale whose token count, added to its
/// serialized response, stays within limit.
std::vector<PairRecord> filter_rationale_length(const std::vector<PairRecord>& pairs,
                                                std::size_t limit,
                                                const TokenCounter& counter = {});

/// Seeded uniform sample (without replacement) of record indices for
/// rationale annotation: sample_success Success records plus sample_fail
/// retained-failure records. Requests more than available throw.
std::vector<std::size_t> select_rationale_sample(const std::vector<PairRecord>& pairs,
                                                 std::size_t sample_success,
                                                 std::size_t sample_fail,
                                                 std::uint64_t seed);

/// Checker/generator/reasoner driver for the curation stages.
class Curator {
public:
    Curator(backends::ChatBackend& checker, backends::ChatBackend& generator,
            backends::ChatBackend& reasoner, const DocCatalog& catalog,
            TimeSource time = {}, Logger logger = {});

    /// Renders the documentation-adherence prompt and parses the checker's
    /// JSON verdict. After 3 unparsable answers the pair is reported as
    /// unchecked (kept, marked) rather than rejected.
    AdherenceVerdict check_adherence(const ApiDocument& doc, const ApiRequest& request,
                                     const ApiResponse& response);

    /// One generation per seed against the synthesis prompt; parses the
    /// {request, response} pair, forces routing fields from the doc, and
    /// drops any result whose canonical key already exists in existing_keys
    /// or earlier in the batch. Accepted keys are added to existing_keys.
    std::vector<PairRecord> synthesize_pairs(const ApiDocument& doc,
                                             const std::vector<PairRecord>& examples,
                                             backends::GenerationParams params,
                                             const std::vector<std::int64_t>& seeds,
                                             std::unordered_set<std::string>& existing_keys);

    /// Drops every canonical-key group with non-identical responses,
    /// collapses exact duplicates, then removes pairs failing the adherence
    /// check (unchecked pairs are kept). Idempotent.
    std::vector<PairRecord> quality_check_synthetic(const std::vector<PairRecord>& pairs);

    /// Renders the mechanism-reasoning prompt for the pair and returns the
    /// reasoner's text.
    std::string generate_rationale(const PairRecord& pair);

    /// Annotates pairs[i] for each sampled index with a generated rationale,
    /// fanning out over max_workers threads. Returns the annotated subset in
    /// index order.
    std::vector<PairRecord> annotate_rationales(const std::vector<PairRecord>& pairs,
                                                const std::vector<std::size_t>& indices,
                                                int max_workers = 4);

private:
    const ApiDocument& resolve_doc(const PairRecord& pair) const;

    backends::ChatBackend& checker_;
    backends::ChatBackend& generator_;
    backends::ChatBackend& reasoner_;
    const DocCatalog& catalog_;
    TimeSource time_;
    Logger logger_;
};

}  // namespace apisim::curation
