#include "apisim/curation.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "apisim/parallel.hpp"
#include "apisim/prompts.hpp"

namespace apisim::curation {
namespace {

std::vector<backends::ChatMessage> as_messages(const prompts::RenderedPrompt& p) {
    std::vector<backends::ChatMessage> messages;
    if (!p.system.empty()) {
        messages.push_back({backends::Role::System, p.system});
    }
    messages.push_back({backends::Role::User, p.user});
    return messages;
}

std::string strip_fence(std::string_view text) {
    auto begin = text.find_first_not_of(" \t\r\n");
    auto end = text.find_last_not_of(" \t\r\n");
    if (begin == std::string_view::npos) {
        return "";
    }
    std::string body(text.substr(begin, end - begin + 1));
    if (body.rfind("```", 0) == 0) {
        const auto first_newline = body.find('\n');
        if (first_newline != std::string::npos) {
            body.erase(0, first_newline + 1);
        }
        const auto fence = body.rfind("```");
        if (fence != std::string::npos) {
            body.erase(fence);
        }
        const auto last = body.find_last_not_of(" \t\r\n");
        body.erase(last == std::string::npos ? 0 : last + 1);
    }
    return body;
}

/// Seeded partial Fisher-Yates: the first k entries of a shuffled index
/// vector. Hand-rolled so results match across platforms.
std::vector<std::size_t> sample_indices(std::vector<std::size_t> candidates,
                                        std::size_t k, std::mt19937_64& rng) {
    for (std::size_t i = 0; i < k && i + 1 < candidates.size(); ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng() % (candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(k);
    return candidates;
}

}  // namespace

std::vector<PairRecord> filter_pairs(const std::vector<PairRecord>& pairs,
                                     const CurationPolicy& policy) {
    std::vector<PairRecord> kept;
    std::vector<PairRecord> failures;
    for (const auto& pair : pairs) {
        if (pair.outcome == CallOutcome::Success) {
            kept.push_back(pair);
        } else if (is_retainable_failure(pair.outcome)) {
            failures.push_back(pair);
        }
    }
    std::stable_sort(failures.begin(), failures.end(),
                     [](const PairRecord& a, const PairRecord& b) {
                         return canonical_key(a.request) < canonical_key(b.request);
                     });
    if (failures.size() > policy.retained_failure_quota) {
        failures.resize(policy.retained_failure_quota);
    }
    kept.insert(kept.end(), failures.begin(), failures.end());
    return kept;
}

std::vector<PairRecord> filter_rationale_length(const std::vector<PairRecord>& pairs,
                                                std::size_t limit,
                                                const TokenCounter& counter) {
    const TokenCounter& count = counter ? counter : count_tokens;
    std::vector<PairRecord> kept;
    for (const auto& pair : pairs) {
        if (!pair.rationale.has_value()) {
            continue;
        }
        const std::string combined =
            *pair.rationale + serialize_envelope(pair.response);
        if (count(combined) <= limit) {
            kept.push_back(pair);
        }
    }
    return kept;
}

std::vector<std::size_t> select_rationale_sample(const std::vector<PairRecord>& pairs,
                                                 std::size_t sample_success,
                                                 std::size_t sample_fail,
                                                 std::uint64_t seed) {
    std::vector<std::size_t> successes;
    std::vector<std::size_t> failures;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].outcome == CallOutcome::Success) {
            successes.push_back(i);
        } else if (is_retainable_failure(pairs[i].outcome)) {
            failures.push_back(i);
        }
    }
    if (sample_success > successes.size() || sample_fail > failures.size()) {
        throw Error("rationale sample larger than available records (" +
                    std::to_string(successes.size()) + " successes, " +
                    std::to_string(failures.size()) + " failures)");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> selected =
        sample_indices(std::move(successes), sample_success, rng);
    std::vector<std::size_t> failed =
        sample_indices(std::move(failures), sample_fail, rng);
    selected.insert(selected.end(), failed.begin(), failed.end());
    std::sort(selected.begin(), selected.end());
    return selected;
}

Curator::Curator(backends::ChatBackend& checker, backends::ChatBackend& generator,
                 backends::ChatBackend& reasoner, const DocCatalog& catalog,
                 TimeSource time, Logger logger)
    : checker_(checker),
      generator_(generator),
      reasoner_(reasoner),
      catalog_(catalog),
      time_(time ? std::move(time) : rfc3339_now),
      logger_(std::move(logger)) {}

const ApiDocument& Curator::resolve_doc(const PairRecord& pair) const {
    const ApiDocument* doc = catalog_.find(pair.doc_key);
    if (doc == nullptr) {
        throw InvalidRecord("no catalog document for key " + pair.doc_key);
    }
    return *doc;
}

AdherenceVerdict Curator::check_adherence(const ApiDocument& doc,
                                          const ApiRequest& request,
                                          const ApiResponse& response) {
    const auto prompt = prompts::adherence_check(doc, request, response);
    const auto messages = as_messages(prompt);
    backends::GenerationParams params;
    params.temperature = 0.0;
    for (int attempt = 0; attempt < 3; ++attempt) {
        params.seed = attempt;
        const std::string completion = checker_.chat(messages, params);
        try {
            const json j = json::parse(strip_fence(completion));
            if (!j.is_object() || !j.contains("overall_eval")) {
                continue;
            }
            AdherenceVerdict verdict;
            if (j["overall_eval"].is_number_integer()) {
                verdict.overall_eval = j["overall_eval"].get<int>();
            } else if (j["overall_eval"].is_string()) {
                verdict.overall_eval = std::stoi(j["overall_eval"].get<std::string>());
            } else {
                continue;
            }
            if (verdict.overall_eval != 0 && verdict.overall_eval != 1) {
                continue;
            }
            if (j.contains("reason") && j["reason"].is_string()) {
                verdict.reason = j["reason"].get<std::string>();
            }
            return verdict;
        } catch (const json::exception&) {
            continue;
        } catch (const std::exception&) {
            continue;
        }
    }
    if (logger_) {
        logger_("stage=adherence api=" + doc.key() +
                " outcome=unchecked reason=malformed-verdict");
    }
    AdherenceVerdict unchecked;
    unchecked.overall_eval = 1;
    unchecked.reason = "checker output unparsable after 3 attempts";
    unchecked.checked = false;
    return unchecked;
}

std::vector<PairRecord> Curator::synthesize_pairs(
    const ApiDocument& doc, const std::vector<PairRecord>& examples,
    backends::GenerationParams params, const std::vector<std::int64_t>& seeds,
    std::unordered_set<std::string>& existing_keys) {
    if (examples.empty()) {
        throw Error("synthesize_pairs: examples must be non-empty");
    }
    for (const auto& example : examples) {
        if (example.provenance != Provenance::Real) {
            throw Error("synthesize_pairs: examples must be real records");
        }
    }
    const auto prompt = prompts::synthesis(doc, examples);
    const auto messages = as_messages(prompt);
    std::vector<PairRecord> batch;
    for (const std::int64_t seed : seeds) {
        std::optional<PairRecord> record;
        for (int attempt = 0; attempt < 3 && !record.has_value(); ++attempt) {
            params.seed = seed + attempt * 1000003;
            const std::string completion = generator_.chat(messages, params);
            try {
                const json j = json::parse(strip_fence(completion));
                ApiRequest request = request_from_json(j.at("request"));
                request.category = doc.category;
                request.tool_name = doc.tool_name;
                request.api_name = doc.api_name;
                canonical_key(request);  // validate tool_input
                ApiResponse response =
                    envelope_from_upstream(j.at("response").dump());
                record = make_pair_record(doc, std::move(request),
                                          std::move(response),
                                          Provenance::Synthetic, std::nullopt,
                                          time_());
            } catch (const json::exception&) {
            } catch (const Error&) {
            }
        }
        if (!record.has_value()) {
            if (logger_) {
                logger_("stage=synthesize api=" + doc.key() +
                        " outcome=skipped reason=unparsable-generation seed=" +
                        std::to_string(seed));
            }
            continue;
        }
        const std::string key = canonical_key(record->request);
        if (existing_keys.contains(key)) {
            continue;  // exact-match dedup against dataset and batch
        }
        existing_keys.insert(key);
        batch.push_back(std::move(*record));
    }
    return batch;
}

std::vector<PairRecord> Curator::quality_check_synthetic(
    const std::vector<PairRecord>& pairs) {
    // Group by canonical key, keeping first-seen order of groups.
    std::vector<std::string> order;
    std::map<std::string, std::vector<const PairRecord*>> groups;
    for (const auto& pair : pairs) {
        const std::string key = canonical_key(pair.request);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) {
            order.push_back(key);
        }
        it->second.push_back(&pair);
    }
    std::vector<PairRecord> survivors;
    for (const auto& key : order) {
        const auto& group = groups[key];
        const std::string first = serialize_envelope(group.front()->response);
        const bool conflicting =
            std::any_of(group.begin(), group.end(), [&](const PairRecord* p) {
                return serialize_envelope(p->response) != first;
            });
        if (conflicting) {
            if (logger_) {
                logger_("stage=quality api=" + group.front()->doc_key +
                        " outcome=dropped reason=conflicting-responses n=" +
                        std::to_string(group.size()));
            }
            continue;  // the whole group goes
        }
        survivors.push_back(*group.front());  // collapse exact duplicates
    }
    std::vector<PairRecord> out;
    for (const auto& pair : survivors) {
        const AdherenceVerdict verdict =
            check_adherence(resolve_doc(pair), pair.request, pair.response);
        if (verdict.overall_eval == 1) {
            out.push_back(pair);
        }
    }
    return out;
}

std::string Curator::generate_rationale(const PairRecord& pair) {
    const ApiDocument& doc = resolve_doc(pair);
    const auto prompt = prompts::rationale(doc, pair.request, pair.response);
    backends::GenerationParams params;
    params.temperature = 0.0;
    params.seed = static_cast<std::int64_t>(
        backends::fnv1a64(canonical_key(pair.request)) & 0x7fffffff);
    return reasoner_.chat(as_messages(prompt), params);
}

std::vector<PairRecord> Curator::annotate_rationales(
    const std::vector<PairRecord>& pairs, const std::vector<std::size_t>& indices,
    int max_workers) {
    std::vector<PairRecord> annotated(indices.size());
    parallel_for(indices.size(), max_workers, [&](std::size_t i) {
        PairRecord pair = pairs.at(indices[i]);
        pair.rationale = generate_rationale(pair);
        annotated[i] = std::move(pair);
    });
    return annotated;
}

}  // namespace apisim::curation
