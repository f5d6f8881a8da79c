#include "apisim/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <set>

#include "apisim/parallel.hpp"
#include "apisim/prompts.hpp"

namespace apisim {

namespace {

constexpr double kBleuEpsilon = 1e-9;

std::string lowercase(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

std::string trim(std::string_view text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end &&
           std::isspace(static_cast<unsigned char>(text[begin]))) {
        ++begin;
    }
    while (end > begin &&
           std::isspace(static_cast<unsigned char>(text[end - 1]))) {
        --end;
    }
    return std::string(text.substr(begin, end - begin));
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string current;
    for (const char ch : text) {
        if (ch == '\n') {
            lines.push_back(current);
            current.clear();
        } else {
            current += ch;
        }
    }
    lines.push_back(current);
    return lines;
}

std::string strip_code_fence(const std::string& text) {
    std::string body = trim(text);
    if (body.rfind("```", 0) != 0) {
        return body;
    }
    const std::size_t first_newline = body.find('\n');
    if (first_newline == std::string::npos) {
        return body;
    }
    std::size_t end = body.rfind("```");
    if (end <= first_newline) {
        return body;
    }
    return trim(body.substr(first_newline + 1, end - first_newline - 1));
}

std::vector<backends::ChatMessage> to_messages(
    const prompts::RenderedPrompt& prompt) {
    std::vector<backends::ChatMessage> messages;
    if (!prompt.system.empty()) {
        messages.push_back({backends::Role::System, prompt.system});
    }
    messages.push_back({backends::Role::User, prompt.user});
    return messages;
}

}  // namespace

// ---------------------------------------------------------------------------
// BLEU-4.

std::vector<std::string> bleu_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string word;
    for (const char ch : text) {
        const unsigned char u = static_cast<unsigned char>(ch);
        if (std::isalnum(u)) {
            word += static_cast<char>(std::tolower(u));
            continue;
        }
        if (!word.empty()) {
            tokens.push_back(word);
            word.clear();
        }
        if (!std::isspace(u)) {
            tokens.push_back(std::string(1, ch));
        }
    }
    if (!word.empty()) {
        tokens.push_back(word);
    }
    return tokens;
}

double bleu4(std::string_view candidate, std::string_view reference) {
    const std::vector<std::string> cand = bleu_tokenize(candidate);
    const std::vector<std::string> ref = bleu_tokenize(reference);
    if (cand.empty() && ref.empty()) {
        return 1.0;
    }
    if (cand.empty() || ref.empty()) {
        return 0.0;
    }

    const auto ngram_counts = [](const std::vector<std::string>& tokens,
                                 std::size_t n) {
        std::map<std::string, std::size_t> counts;
        if (tokens.size() < n) {
            return counts;
        }
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (std::size_t k = 1; k < n; ++k) {
                gram += '\x1f';
                gram += tokens[i + k];
            }
            ++counts[gram];
        }
        return counts;
    };

    double log_sum = 0.0;
    int included_orders = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
        if (cand.size() < n) {
            break;  // order has no candidate n-grams: excluded, weight renormalized
        }
        const auto cand_counts = ngram_counts(cand, n);
        const auto ref_counts = ngram_counts(ref, n);
        const std::size_t total = cand.size() - n + 1;
        std::size_t clipped = 0;
        for (const auto& [gram, count] : cand_counts) {
            const auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) {
                clipped += std::min(count, it->second);
            }
        }
        const double precision =
            clipped == 0 ? kBleuEpsilon
                         : static_cast<double>(clipped) /
                               static_cast<double>(total);
        log_sum += std::log(precision);
        ++included_orders;
    }

    const double geo_mean = std::exp(log_sum / included_orders);
    const double c = static_cast<double>(cand.size());
    const double r = static_cast<double>(ref.size());
    const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
    return brevity * geo_mean;
}

// ---------------------------------------------------------------------------
// Cosine similarity.

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw LengthMismatch("embedding dimensions differ: " +
                             std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

double cosine_mean(const std::vector<std::string>& real_responses,
                   const std::vector<std::string>& sim_responses,
                   backends::Embedder& embedder) {
    if (real_responses.size() != sim_responses.size()) {
        throw LengthMismatch("response lists differ in length: " +
                             std::to_string(real_responses.size()) + " vs " +
                             std::to_string(sim_responses.size()));
    }
    if (real_responses.empty()) {
        throw LengthMismatch("response lists are empty");
    }
    const auto real_vecs = embedder.embed(real_responses);
    const auto sim_vecs = embedder.embed(sim_responses);
    double sum = 0.0;
    for (std::size_t i = 0; i < real_vecs.size(); ++i) {
        sum += cosine(real_vecs[i], sim_vecs[i]);
    }
    return sum / static_cast<double>(real_vecs.size());
}

// ---------------------------------------------------------------------------
// Judge.

JudgeRating parse_judge_rating(const std::string& reply) {
    static const std::regex pattern(R"(Rating: \[\[([0-9]+)\]\])");
    std::smatch last;
    bool found = false;
    for (auto it = std::sregex_iterator(reply.begin(), reply.end(), pattern);
         it != std::sregex_iterator(); ++it) {
        last = *it;
        found = true;
    }
    if (!found) {
        throw NoRatingFound("no \"Rating: [[n]]\" pattern in judge reply");
    }
    const std::string digits = last[1].str();
    if (digits.size() > 2) {
        throw RatingOutOfRange("judge rating " + digits +
                               " outside [0, 10]");
    }
    const int value = std::stoi(digits);
    if (value > 10) {
        throw RatingOutOfRange("judge rating " + digits +
                               " outside [0, 10]");
    }
    return JudgeRating{value, reply};
}

JudgeRating judge_following(const ApiDocument& doc, const ApiRequest& request,
                            const ApiResponse& reference,
                            const ApiResponse& answer,
                            backends::ChatBackend& judge) {
    const prompts::RenderedPrompt prompt =
        prompts::judge(doc, request, reference, answer);
    backends::GenerationParams params;
    params.temperature = 0.0;
    params.seed = 0;
    return parse_judge_rating(judge.chat(to_messages(prompt), params));
}

FollowingResult judge_mean_over(const std::vector<PairRecord>& refs,
                                const std::vector<PairRecord>& preds,
                                const DocCatalog& catalog,
                                backends::ChatBackend& judge,
                                std::size_t max_workers, Logger logger) {
    if (refs.size() != preds.size()) {
        throw LengthMismatch("reference and prediction lists differ: " +
                             std::to_string(refs.size()) + " vs " +
                             std::to_string(preds.size()));
    }
    std::vector<std::optional<int>> ratings(refs.size());
    std::vector<std::string> failures(refs.size());
    parallel_for(refs.size(), max_workers, [&](std::size_t i) {
        const ApiDocument* doc = catalog.find(refs[i].doc_key);
        if (doc == nullptr) {
            failures[i] = "no catalog document";
            return;
        }
        try {
            ratings[i] = judge_following(*doc, refs[i].request,
                                         refs[i].response, preds[i].response,
                                         judge)
                             .value;
        } catch (const NoRatingFound& e) {
            failures[i] = e.what();
        } catch (const RatingOutOfRange& e) {
            failures[i] = e.what();
        }
    });

    FollowingResult result;
    double sum = 0.0;
    for (std::size_t i = 0; i < ratings.size(); ++i) {
        if (ratings[i].has_value()) {
            sum += *ratings[i];
            ++result.evaluated;
        } else {
            ++result.unevaluated;
            if (logger) {
                logger("stage=judge index=" + std::to_string(i) +
                       " outcome=unevaluated detail=" + failures[i]);
            }
        }
    }
    result.judge_mean =
        result.evaluated == 0 ? 0.0
                              : sum / static_cast<double>(result.evaluated);
    return result;
}

PairMetrics bleu_cosine_over(const std::vector<PairRecord>& refs,
                             const std::vector<PairRecord>& preds,
                             backends::Embedder& embedder) {
    if (refs.size() != preds.size()) {
        throw LengthMismatch("reference and prediction lists differ: " +
                             std::to_string(refs.size()) + " vs " +
                             std::to_string(preds.size()));
    }
    if (refs.empty()) {
        throw LengthMismatch("reference list is empty");
    }
    std::vector<std::string> ref_texts;
    std::vector<std::string> pred_texts;
    ref_texts.reserve(refs.size());
    pred_texts.reserve(preds.size());
    double bleu_sum = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        ref_texts.push_back(refs[i].response.response);
        pred_texts.push_back(preds[i].response.response);
        bleu_sum += bleu4(pred_texts.back(), ref_texts.back());
    }
    PairMetrics metrics;
    metrics.n = refs.size();
    metrics.bleu_mean_x100 =
        100.0 * bleu_sum / static_cast<double>(refs.size());
    metrics.cosine_mean_x100 =
        100.0 * cosine_mean(ref_texts, pred_texts, embedder);
    return metrics;
}

// ---------------------------------------------------------------------------
// SoPR.

SoPRResult sopr_from_run_scores(const std::vector<double>& run_scores) {
    if (run_scores.size() != 3) {
        throw RunCountMismatch("expected exactly 3 run scores, got " +
                               std::to_string(run_scores.size()));
    }
    SoPRResult result;
    result.runs = {run_scores[0], run_scores[1], run_scores[2]};
    result.mean = (run_scores[0] + run_scores[1] + run_scores[2]) / 3.0;
    double variance = 0.0;
    for (const double score : run_scores) {
        variance += (score - result.mean) * (score - result.mean);
    }
    variance /= 3.0;  // population estimator over the fixed 3 repeats
    result.std_dev = std::sqrt(variance);
    return result;
}

SoPRResult sopr_aggregate(const std::vector<std::vector<double>>& run_passes) {
    if (run_passes.size() != 3) {
        throw RunCountMismatch("expected exactly 3 runs, got " +
                               std::to_string(run_passes.size()));
    }
    const std::size_t instances = run_passes[0].size();
    if (instances == 0) {
        throw InstanceSetMismatch("instance set is empty");
    }
    for (const auto& run : run_passes) {
        if (run.size() != instances) {
            throw InstanceSetMismatch(
                "runs cover different instance counts: " +
                std::to_string(run.size()) + " vs " +
                std::to_string(instances));
        }
    }
    std::vector<double> scores;
    scores.reserve(3);
    for (const auto& run : run_passes) {
        const double sum = std::accumulate(run.begin(), run.end(), 0.0);
        scores.push_back(100.0 * sum / static_cast<double>(instances));
    }
    return sopr_from_run_scores(scores);
}

// ---------------------------------------------------------------------------
// FAC.

FacVerdict parse_fac_verdict(const std::string& reply) {
    const std::vector<std::string> lines = split_lines(reply);
    std::optional<FacStatus> status;
    for (const std::string& line : lines) {
        const std::string lower = lowercase(line);
        const std::size_t pos = lower.find("answer status");
        if (pos == std::string::npos) {
            continue;
        }
        const std::string rest = lower.substr(pos + 13);
        if (rest.find("unsolved") != std::string::npos) {
            status = FacStatus::Unsolved;
            break;
        }
        if (rest.find("solved") != std::string::npos) {
            status = FacStatus::Solved;
            break;
        }
    }
    if (!status.has_value()) {
        throw NoVerdictFound("no \"Answer Status\" verdict in reply");
    }

    std::string reason;
    for (const std::string& line : lines) {
        const std::string trimmed = trim(line);
        const std::string lower = lowercase(trimmed);
        if (lower.rfind("reason", 0) == 0) {
            std::string rest = trimmed.substr(6);
            while (!rest.empty() && (rest.front() == ':' || rest.front() == ' ')) {
                rest.erase(rest.begin());
            }
            reason = rest;
            break;
        }
    }
    if (reason.empty()) {
        reason = reply;
    }
    return FacVerdict{*status, reason};
}

FacVerdict fac_score(const std::string& query, const std::string& final_answer,
                     backends::ChatBackend& checker) {
    const prompts::RenderedPrompt prompt = prompts::fac(query, final_answer);
    backends::GenerationParams params;
    params.temperature = 0.0;
    params.seed = 0;
    return parse_fac_verdict(checker.chat(to_messages(prompt), params));
}

double fac_aggregate(const std::vector<FacVerdict>& verdicts) {
    if (verdicts.empty()) {
        return 0.0;
    }
    std::size_t solved = 0;
    for (const auto& verdict : verdicts) {
        if (verdict.status == FacStatus::Solved) {
            ++solved;
        }
    }
    return 100.0 * static_cast<double>(solved) /
           static_cast<double>(verdicts.size());
}

// ---------------------------------------------------------------------------
// Query generation.

namespace {

std::optional<GeneratedQuery> parse_generated_query(
    const std::string& reply, const std::vector<ApiDocument>& sampled) {
    json j;
    try {
        j = json::parse(strip_code_fence(reply));
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (!j.is_object() || !j.contains("query") || !j.contains("related_apis")) {
        return std::nullopt;
    }
    GeneratedQuery out;
    try {
        out.query = j.at("query").get<std::string>();
        for (const json& entry : j.at("related_apis")) {
            if (!entry.is_array() || entry.size() != 2) {
                return std::nullopt;
            }
            out.related_apis.emplace_back(entry.at(0).get<std::string>(),
                                          entry.at(1).get<std::string>());
        }
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (out.query.empty() || out.related_apis.empty()) {
        return std::nullopt;
    }

    std::set<std::string> sampled_tools;
    for (const ApiDocument& doc : sampled) {
        sampled_tools.insert(doc.tool_name);
    }
    std::set<std::string> cited_tools;
    for (const auto& [tool, api] : out.related_apis) {
        (void)api;
        if (sampled_tools.count(tool) == 0) {
            return std::nullopt;  // names a tool outside the sampled set
        }
        cited_tools.insert(tool);
    }
    if (cited_tools.size() < 2) {
        return std::nullopt;  // single-tool queries are not accepted
    }
    return out;
}

}  // namespace

std::vector<GeneratedQuery> generate_queries(
    const std::vector<ApiDocument>& docs, std::size_t n, std::uint64_t seed,
    backends::ChatBackend& writer, Logger logger) {
    if (docs.size() < 5) {
        throw Error("query generation needs at least 5 catalog docs, got " +
                    std::to_string(docs.size()));
    }
    std::mt19937_64 rng(seed);
    std::vector<GeneratedQuery> out;
    out.reserve(n);
    for (std::size_t qi = 0; qi < n; ++qi) {
        bool produced = false;
        for (int attempt = 1; attempt <= 3 && !produced; ++attempt) {
            const std::size_t k = 2 + static_cast<std::size_t>(rng() % 4);
            std::vector<std::size_t> indices(docs.size());
            std::iota(indices.begin(), indices.end(), 0);
            for (std::size_t i = 0; i < k; ++i) {
                const std::size_t j =
                    i + static_cast<std::size_t>(rng() % (indices.size() - i));
                std::swap(indices[i], indices[j]);
            }
            std::vector<ApiDocument> sampled;
            sampled.reserve(k);
            for (std::size_t i = 0; i < k; ++i) {
                sampled.push_back(docs[indices[i]]);
            }
            const prompts::RenderedPrompt prompt =
                prompts::query_generation(sampled);
            backends::GenerationParams params;
            params.temperature = 1.0;
            params.seed =
                static_cast<std::int64_t>(rng() & 0x7fffffffffffffffull);
            const std::string reply = writer.chat(to_messages(prompt), params);
            if (auto parsed = parse_generated_query(reply, sampled)) {
                out.push_back(std::move(*parsed));
                produced = true;
            }
        }
        if (!produced && logger) {
            logger("stage=queries index=" + std::to_string(qi) +
                   " outcome=skipped detail=unusable reply after 3 attempts");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports.

std::string fixed_decimals(double value, int places) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.*f", places, value);
    return buffer;
}

ReportTable render_report(const std::vector<MetricRow>& rows) {
    ReportTable table;
    table.title = "Simulation Quality";
    table.columns = {"Split", "N", "Judge", "BLEU x100", "Cosine x100"};
    for (const MetricRow& row : rows) {
        table.rows.push_back({row.split, std::to_string(row.n),
                              fixed_decimals(row.judge_mean, 2),
                              fixed_decimals(row.bleu_mean_x100, 1),
                              fixed_decimals(row.cosine_mean_x100, 1)});
    }
    return table;
}

ReportTable render_report(
    const std::vector<std::pair<std::string, SoPRResult>>& rows) {
    ReportTable table;
    table.title = "Solvable Pass Rate (mean +/- population std over 3 runs)";
    table.columns = {"Method", "Run 1", "Run 2", "Run 3", "Mean", "Std"};
    for (const auto& [method, result] : rows) {
        table.rows.push_back({method, fixed_decimals(result.runs[0], 1),
                              fixed_decimals(result.runs[1], 1),
                              fixed_decimals(result.runs[2], 1),
                              fixed_decimals(result.mean, 1),
                              fixed_decimals(result.std_dev, 3)});
    }
    return table;
}

ReportTable render_fac_report(
    const std::vector<std::pair<std::string, double>>& rows) {
    ReportTable table;
    table.title = "Final Answer Check";
    table.columns = {"Method", "FAC"};
    for (const auto& [method, value] : rows) {
        table.rows.push_back({method, fixed_decimals(value, 1)});
    }
    return table;
}

}  // namespace apisim
