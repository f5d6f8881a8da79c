#pragma once

#include <string>
#include <vector>

#include "apisim/core.hpp"

namespace apisim::prompts {

// Anchor lines shared by renderers, the mock backend, and tests.
inline constexpr char kCotTag[] = "[CHAIN_OF_THOUGHT]";
inline constexpr char kSftAnchor[] = "Imagine you are an API Server";
inline constexpr char kJudgeAnchor[] = "Act as an impartial judge";
inline constexpr char kAdherenceAnchor[] =
    "evaluate the quality of an API response";
inline constexpr char kCallWritingAnchor[] =
    "Can you write a call to test if the API is reachable?";
inline constexpr char kScenarioAnchor[] =
    "write one realistic usage scenario";
inline constexpr char kScenarioRequestAnchor[] =
    "Write an API request that addresses the task described in the scenario";
inline constexpr char kSynthesisAnchor[] =
    "Generate one new, distinct request-response pair";
inline constexpr char kRationaleAnchor[] =
    "hints about the mechanism behind the API";
inline constexpr char kFacAnchor[] =
    "determine the answer_status";
inline constexpr char kQueryGenAnchor[] =
    "creating a varied, innovative, and detailed user query";

/// System + user pair ready to hand to a chat backend. system may be empty
/// for single-message prompts.
struct RenderedPrompt {
    std::string system;
    std::string user;
};

/// Documentation block used inside every prompt: API name, API description,
/// required parameters, optional parameters, tool name, tool description.
std::string render_document(const ApiDocument& doc);

/// Parameter list as a compact JSON array.
std::string render_parameters(const std::vector<ParameterSpec>& params);

/// Request as its compact JSON object.
std::string render_request(const ApiRequest& request);

// Collection-side prompts.
RenderedPrompt call_writing(const ApiDocument& doc);
RenderedPrompt scenario_generation(const ApiDocument& doc);
RenderedPrompt scenario_request(const ApiDocument& doc, const std::string& scenario);

// Curation-side prompts.
RenderedPrompt adherence_check(const ApiDocument& doc, const ApiRequest& request,
                               const ApiResponse& response);
RenderedPrompt synthesis(const ApiDocument& doc,
                         const std::vector<PairRecord>& examples);
RenderedPrompt rationale(const ApiDocument& doc, const ApiRequest& request,
                         const ApiResponse& response);

// Simulator prompts (training export and gateway serving share these).
RenderedPrompt simulation(const ApiDocument& doc, const ApiRequest& request,
                          SimulationMode mode);

// Evaluation prompts.
RenderedPrompt judge(const ApiDocument& doc, const ApiRequest& request,
                     const ApiResponse& reference, const ApiResponse& answer);
RenderedPrompt fac(const std::string& query, const std::string& final_answer);
RenderedPrompt query_generation(const std::vector<ApiDocument>& sampled);

/// The fixed in-context example triple embedded in both simulator system
/// prompts ("Here is an example:").
const ApiDocument& example_document();
const ApiRequest& example_request();
const ApiResponse& example_response();

}  // namespace apisim::prompts
