#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "apisim/core.hpp"
#include "apisim/prompts.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace apisim;

namespace {

namespace fs = std::filesystem;

ApiDocument fixture_doc() {
    ApiDocument doc;
    doc.category = "Weather";
    doc.tool_name = "open_weather";
    doc.tool_description =
        "Global surface observations and model forecasts aggregated from "
        "national meteorological services.";
    doc.api_name = "current_conditions";
    doc.api_description =
        "Latest observed temperature, wind, and sky cover for a location.";
    doc.required_parameters = {
        {"location", "STRING", "City name or 'lat,lon' pair to observe.",
         std::nullopt}};
    doc.optional_parameters = {
        {"units", "STRING", "Unit system for the readings.", "metric"}};
    doc.validate();
    return doc;
}

ApiRequest fixture_request() {
    ApiRequest request;
    request.category = "Weather";
    request.tool_name = "open_weather";
    request.api_name = "current_conditions";
    request.tool_input = R"({"location":"Oslo","units":"metric"})";
    return request;
}

ApiResponse fixture_response() {
    ApiResponse response;
    response.error = "";
    response.response =
        R"({"temperature_c":-3.5,"wind_kph":14,"sky":"overcast"})";
    return response;
}

// One readable file per prompt: both halves, delimited.
std::string flatten(const prompts::RenderedPrompt& prompt) {
    return "=== SYSTEM ===\n" + prompt.system + "\n=== USER ===\n" +
           prompt.user + "\n";
}

fs::path golden_dir() { return testutil::source_dir() / "tests" / "golden"; }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing golden file ", path.string(),
                    " (regenerate with APISIM_WRITE_GOLDENS=1)");
    return {std::istreambuf_iterator<char>(in),
            std::istreambuf_iterator<char>()};
}

void check_golden(const std::string& name, const std::string& rendered) {
    const fs::path path = golden_dir() / (name + ".txt");
    if (std::getenv("APISIM_WRITE_GOLDENS") != nullptr) {
        fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        out << rendered;
        return;
    }
    CHECK_MESSAGE(rendered == read_file(path), "golden mismatch for ", name);
}

}  // namespace

TEST_CASE("rendered prompts match their golden files byte for byte") {
    const ApiDocument doc = fixture_doc();
    const ApiRequest request = fixture_request();
    const ApiResponse response = fixture_response();

    check_golden("sft_system",
                 prompts::simulation(doc, request, SimulationMode::Sft).system);
    check_golden("cot_system",
                 prompts::simulation(doc, request, SimulationMode::Cot).system);
    check_golden("call_writing", flatten(prompts::call_writing(doc)));
    check_golden("adherence",
                 flatten(prompts::adherence_check(doc, request, response)));
    check_golden("rationale",
                 flatten(prompts::rationale(doc, request, response)));
    ApiResponse answer = response;
    answer.response = R"({"temperature_c":-2.0,"wind_kph":11,"sky":"clear"})";
    check_golden("judge",
                 flatten(prompts::judge(doc, request, response, answer)));
    check_golden("fac", flatten(prompts::fac(
                      "What's the weather like in Oslo right now?",
                      "It is currently -3.5 C and overcast in Oslo.")));
    ApiDocument second = fixture_doc();
    second.tool_name = "storm_watch";
    second.tool_description =
        "Severe-weather alerting built on lightning sensors and warning "
        "feeds.";
    second.api_name = "active_alerts";
    second.api_description =
        "Severe weather alerts currently in force for a region code.";
    second.required_parameters = {
        {"region", "STRING", "ISO region code, e.g. US-TX or DE-BY.",
         std::nullopt}};
    second.optional_parameters.clear();
    check_golden("query_gen",
                 flatten(prompts::query_generation({doc, second})));
}

TEST_CASE("prompts carry their anchor lines") {
    const ApiDocument doc = fixture_doc();
    const ApiRequest request = fixture_request();
    const ApiResponse response = fixture_response();

    const auto sft = prompts::simulation(doc, request, SimulationMode::Sft);
    CHECK(sft.system.find(prompts::kSftAnchor) != std::string::npos);
    CHECK(sft.system.find(prompts::kCotTag) == std::string::npos);

    const auto cot = prompts::simulation(doc, request, SimulationMode::Cot);
    CHECK(cot.system.rfind(prompts::kCotTag, 0) == 0);
    CHECK(cot.system.find("API Server") != std::string::npos);
    CHECK(cot.system.find("mechanism_of_the_api") != std::string::npos);

    // Identical user halves: the mode only changes the instructions.
    CHECK(sft.user == cot.user);
    CHECK(sft.user.find(prompts::render_request(request)) !=
          std::string::npos);

    const auto judge = prompts::judge(doc, request, response, response);
    CHECK(judge.user.find(prompts::kJudgeAnchor) != std::string::npos);
    CHECK(judge.user.find("Rating: [[5]]") != std::string::npos);

    const auto fac = prompts::fac("q", "a");
    const std::string fac_text = fac.system + fac.user;
    CHECK(fac_text.find("Answer Status xxx") != std::string::npos);
    CHECK(fac_text.find(prompts::kFacAnchor) != std::string::npos);

    CHECK(prompts::call_writing(doc).user.find(prompts::kCallWritingAnchor) !=
          std::string::npos);
    CHECK(prompts::scenario_generation(doc).user.find(
              prompts::kScenarioAnchor) != std::string::npos);
    CHECK(prompts::scenario_request(doc, "a scenario")
              .user.find(prompts::kScenarioRequestAnchor) !=
          std::string::npos);
    CHECK(prompts::adherence_check(doc, request, response)
              .system.find(prompts::kAdherenceAnchor) != std::string::npos);
    CHECK(prompts::rationale(doc, request, response)
              .user.find(prompts::kRationaleAnchor) != std::string::npos);
    CHECK(prompts::query_generation({doc, doc})
              .user.find(prompts::kQueryGenAnchor) != std::string::npos);
}

TEST_CASE("document rendering lists every parameter once") {
    const ApiDocument doc = fixture_doc();
    const std::string rendered = prompts::render_document(doc);
    CHECK(rendered.find("current_conditions") != std::string::npos);
    CHECK(rendered.find("open_weather") != std::string::npos);
    CHECK(rendered.find("location") != std::string::npos);
    CHECK(rendered.find("units") != std::string::npos);

    const std::string params = prompts::render_parameters(
        doc.required_parameters);
    CHECK(params.find("\"name\"") != std::string::npos);
    CHECK(prompts::render_parameters({}) == "[]");
}

TEST_CASE("simulator example triple is internally consistent") {
    const ApiDocument& doc = prompts::example_document();
    const ApiRequest& request = prompts::example_request();
    const ApiResponse& response = prompts::example_response();
    CHECK(doc.tool_name == request.tool_name);
    CHECK(doc.api_name == request.api_name);
    CHECK(response.error.empty());
    // Both simulator prompts embed the example verbatim.
    const auto sft = prompts::simulation(fixture_doc(), fixture_request(),
                                         SimulationMode::Sft);
    CHECK(sft.system.find("Here is an example") != std::string::npos);
    CHECK(sft.system.find(prompts::render_request(request)) !=
          std::string::npos);
}

TEST_CASE("synthesis prompt embeds the few-shot examples") {
    const ApiDocument doc = fixture_doc();
    PairRecord example;
    example.doc_key = doc.key();
    example.request = fixture_request();
    example.response = fixture_response();
    example.outcome = CallOutcome::Success;
    example.provenance = Provenance::Real;
    const auto prompt = prompts::synthesis(doc, {example, example});
    CHECK(prompt.user.find(prompts::kSynthesisAnchor) != std::string::npos);
    // Requests re-serialize inside the prompt, so match on the payload value.
    CHECK(prompt.user.find("Oslo") != std::string::npos);
    CHECK(prompt.user.find("Example 2:") != std::string::npos);
}
