#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "apisim/backends.hpp"
#include "apisim/core.hpp"
#include "apisim/jsonl.hpp"
#include "apisim/report.hpp"

namespace apisim {

struct LengthMismatch : Error {
    using Error::Error;
};
struct NoRatingFound : Error {
    using Error::Error;
};
struct RatingOutOfRange : Error {
    using Error::Error;
};
struct RunCountMismatch : Error {
    using Error::Error;
};
struct InstanceSetMismatch : Error {
    using Error::Error;
};
struct NoVerdictFound : Error {
    using Error::Error;
};
struct UnparseableQuery : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Text-overlap metric.

/// Lowercased tokens: maximal alphanumeric runs, any other non-space byte as
/// a single-character token, whitespace discarded.
std::vector<std::string> bleu_tokenize(std::string_view text);

/// Sentence-level BLEU-4: uniform 1/4 weights over n-gram orders 1..4,
/// orders the candidate is too short to populate are dropped with weight
/// renormalization (so bleu4(x, x) == 1.0 exactly), a populated order with
/// zero clipped matches floors its precision at 1e-9, and the brevity
/// penalty is exp(1 - r/c) when c < r else 1. Both texts empty -> 1.0;
/// exactly one empty -> 0.0.
double bleu4(std::string_view candidate, std::string_view reference);

// ---------------------------------------------------------------------------
// Embedding similarity.

/// dot(a, b) / (|a| |b|); 0.0 when either norm is zero.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

/// Mean pairwise cosine between aligned response texts. Throws
/// LengthMismatch when the lists differ in size or are empty.
double cosine_mean(const std::vector<std::string>& real_responses,
                   const std::vector<std::string>& sim_responses,
                   backends::Embedder& embedder);

// ---------------------------------------------------------------------------
// LLM-as-a-judge observation following.

struct JudgeRating {
    int value = 0;  // 0..10
    std::string explanation;
};

/// Extracts the LAST "Rating: [[n]]" occurrence (exact punctuation, single
/// space after the colon). Throws NoRatingFound when the pattern is absent
/// and RatingOutOfRange when n > 10.
JudgeRating parse_judge_rating(const std::string& reply);

/// Renders the judge prompt for (doc, request, reference, answer), asks the
/// judge once at temperature 0, and parses the rating.
JudgeRating judge_following(const ApiDocument& doc, const ApiRequest& request,
                            const ApiResponse& reference,
                            const ApiResponse& answer,
                            backends::ChatBackend& judge);

struct FollowingResult {
    double judge_mean = 0.0;  // over evaluated samples only
    std::size_t evaluated = 0;
    std::size_t unevaluated = 0;  // rating absent or out of range
};

/// Judges aligned reference/prediction records (same index = same request).
/// Unevaluable samples are skipped with a log line, not fatal.
FollowingResult judge_mean_over(const std::vector<PairRecord>& refs,
                                const std::vector<PairRecord>& preds,
                                const DocCatalog& catalog,
                                backends::ChatBackend& judge,
                                std::size_t max_workers = 4,
                                Logger logger = {});

struct PairMetrics {
    double bleu_mean_x100 = 0.0;
    double cosine_mean_x100 = 0.0;
    std::size_t n = 0;
};

/// BLEU-4 and cosine means over aligned response texts, scaled x100.
PairMetrics bleu_cosine_over(const std::vector<PairRecord>& refs,
                             const std::vector<PairRecord>& preds,
                             backends::Embedder& embedder);

// ---------------------------------------------------------------------------
// Solvable pass rate.

struct SoPRResult {
    double mean = 0.0;
    double std_dev = 0.0;  // population standard deviation over the 3 runs
    std::array<double, 3> runs{};
};

/// Per-run score = 100 x mean pass value; mean/std over exactly 3 runs.
/// Throws RunCountMismatch unless exactly 3 runs are given and
/// InstanceSetMismatch when runs differ in size or are empty.
SoPRResult sopr_aggregate(const std::vector<std::vector<double>>& run_passes);

/// Aggregation half alone: exactly 3 pre-computed run scores.
SoPRResult sopr_from_run_scores(const std::vector<double>& run_scores);

// ---------------------------------------------------------------------------
// Final answer check.

enum class FacStatus { Solved, Unsolved };

struct FacVerdict {
    FacStatus status = FacStatus::Unsolved;
    std::string reason;
};

/// Scans for the first line containing "answer status" (case-insensitive)
/// that carries a Solved/Unsolved token; reason = the "Reason" line's text
/// when present, else the whole reply. Throws NoVerdictFound otherwise.
FacVerdict parse_fac_verdict(const std::string& reply);

/// Renders the final-answer-check prompt and parses the verdict.
FacVerdict fac_score(const std::string& query, const std::string& final_answer,
                     backends::ChatBackend& checker);

/// 100 x fraction Solved; 0.0 for an empty list.
double fac_aggregate(const std::vector<FacVerdict>& verdicts);

// ---------------------------------------------------------------------------
// Environment-comparison query generation.

struct GeneratedQuery {
    std::string query;
    /// (tool_name, api_name) pairs the query intends to exercise.
    std::vector<std::pair<std::string, std::string>> related_apis;
};

/// Generates n user queries, each over a seeded sample of 2..5 catalog
/// docs. A reply naming an unsampled tool or citing fewer than two tools is
/// regenerated (3 tries), then skipped with a log line. Requires >= 5 docs.
std::vector<GeneratedQuery> generate_queries(
    const std::vector<ApiDocument>& docs, std::size_t n, std::uint64_t seed,
    backends::ChatBackend& writer, Logger logger = {});

// ---------------------------------------------------------------------------
// Report rendering.

struct MetricRow {
    std::string split;
    double judge_mean = 0.0;
    double bleu_mean_x100 = 0.0;
    double cosine_mean_x100 = 0.0;
    std::size_t n = 0;
};

std::string fixed_decimals(double value, int places);

ReportTable render_report(const std::vector<MetricRow>& rows);
ReportTable render_report(
    const std::vector<std::pair<std::string, SoPRResult>>& rows);
ReportTable render_fac_report(
    const std::vector<std::pair<std::string, double>>& rows);

}  // namespace apisim
