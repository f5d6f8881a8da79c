#include "apisim/prompts.hpp"

#include <string_view>
#include <utility>

namespace apisim::prompts {
namespace {

// Replaces every {placeholder} occurrence. Placeholders are chosen so they
// never collide with literal braces in the template bodies.
std::string fill(std::string text,
                 std::initializer_list<std::pair<std::string_view, std::string_view>>
                     substitutions) {
    for (const auto& [name, value] : substitutions) {
        const std::string token = "{" + std::string(name) + "}";
        std::size_t pos = 0;
        while ((pos = text.find(token, pos)) != std::string::npos) {
            text.replace(pos, token.size(), value);
            pos += value.size();
        }
    }
    return text;
}

constexpr char kCallWritingTemplate[] =
    R"__(I have an API at my hand and I want to use this API to solve a problem. Can you write a call to test if the API is reachable? Remember to include all the required parameters. You must follow the API documentation to write your call. Do not make up any parameters Please also note that a tool is a collection of APIs that are used to solve a specific problem.
Your answer should  be in  the following json format:
{
    "category":"",
    "tool_name":"",
    "api_name":"",
    "tool_input":'{}',
}
Tool Documentation: {document})__";

constexpr char kScenarioTemplate[] =
    R"__(You are helping exercise an API the way real users would.
Read the API documentation below and write one realistic usage scenario for this API: a short paragraph describing who the user is, what they are trying to accomplish, and how this API helps them. Ground the scenario in the documented functionality and mention the tool by name. Return only the scenario text.
{document})__";

constexpr char kScenarioRequestTemplate[] =
    R"__(I have an API at my hand and I want to use this API to solve a problem. Below is a usage scenario describing what a user wants to accomplish. Write an API request that addresses the task described in the scenario. Remember to include all the required parameters. You must follow the API documentation to write your call. Do not make up any parameters.
Your answer should be in the following json format:
{
    "category":"",
    "tool_name":"",
    "api_name":"",
    "tool_input":'{}',
}
Scenario: {scenario}
Tool Documentation: {document})__";

constexpr char kAdherenceSystem[] =
    R"__(We have a bunch of APIs at hand but their documentations may be out of date. Please help us evaluate the quality of an API response by assessing its adherence to API documentation.
You will be given the API documentation, containing the API name, description, tool name, tool description, required parameters, and optional parameters. (A tool may contain several APIs and has an overall functionality) You will also receive a user request (in a JSON format) and the API response (in the format of {"error": "error message if there is any, can be empty", "response": "the response content. may be empty if there is an error."}).
# Goals:
Your primary goal is to determine how well the given API response adheres to the provided API documentation.
# Notes:
- If the user request is malformed, a correct response may include an appropriate error message. This is to say if a user request is malformed and the response points it out, then the response is a good one.
- You need to only judge the API response, not the user request.
- As long as the response is a possible valid response following the documentation, it should be considered correct.
- Your analysis should remain neutral with an emphasis on objective evaluation.
# Output:
Provide a detailed evaluation that reflects adherence to the above criteria, clearly identifying any deviations from the expected results.
Respond in the following JSON format:
{"overall_eval":1/0 (1 means meet the goal and 0 otherwise), "reason":"xxx"})__";

constexpr char kAdherenceUser[] =
    R"__(# API Documentation:
API Name: {api_name}
API Description: {api_description}
Tool (the API belongs to) Name: {tool_name}
Tool (the API belongs to) Description: {tool_description}
API Required Parameters: {required_parameters}
API Optional Parameters: {optional_parameters}
# User Request:
{user_request}
# API Response:
{api_response})__";

constexpr char kSynthesisTemplate[] =
    R"__(You are creating additional request-response data for an API, using real observations as style references.
Below is the documentation for one API, followed by request-response pairs observed from the real API. Generate one new, distinct request-response pair for this API. The request must follow the documentation and use only documented parameters; the response must be plausible for this API and consistent with the style and format of the example responses.
Deliver your response in this JSON format:
{"request": {"category": "", "tool_name": "", "api_name": "", "tool_input": ""}, "response": {"error": "", "response": ""}}
Tool Documentation: {document}
Examples:
{examples})__";

constexpr char kRationaleTemplate[] =
    R"__(I have an API and call this API with a specific request. The API returned a response.
Can you give some hints about the mechanism behind the API, i.e. how the API works? This will be used to help an API simulator that behaves like the API you are reasoning about. Note that the simulator will not be able to see the real response so your hint should be instructive and constructive but not leak any specific information about the real response.
You will be given the API's documentation, parameters specification and the response returned by the API.
Make sure to limit your reasoning in 300 words. Return only your reasoning of how the API works, not the response.
API Name: {api_name}
API Description: {api_description}
Required Parameters: {required_parameters}
Optional Parameters: {optional_parameters}
Tool (The API belongs to) Name: {tool_name}
Tool Description: {tool_description}
API Request: {api_request}
API Response: {api_response})__";

constexpr char kSftSystemTemplate[] =
    R"__(Imagine you are an API Server operating within a specialized tool, which contains a collection of distinct APIs. Your role is to deeply understand the function of each API based on their descriptions in the API documentation. As you receive specific inputs for individual API calls within this tool, analyze these inputs to determine their intended purpose. Your task is to craft a JSON formatted response that aligns with the expected output of the API. The JSON scheme is:
{
    "error": "",
    "response": ""
}
The error field should remain empty, indicating no errors in processing. The response field should contain the content you formulate based on the API's functionality and the input provided. Ensure that your responses are meaningful, directly addressing the API's intended functionality.
The key is to maintain the JSON format's integrity while ensuring that your response is an accurate reflection of the API's intended output within the tool.
Please note that your answer should not contain anything other than a json format object, which should be parsable directly to json.
Note that:
- your response should contain rich information given the api input parameters.
- your response must be effective and have practical content.
API calls may fail for various reasons, such as invalid input parameters, authentication issues, or server errors. Your goal is to generate a response that accurately reflects the API's intended functionality, even if the input parameters are incorrect. Your response should be informative and relevant to the API's purpose, providing a clear and concise explanation of the expected output based on the input provided.
Here is an example:
API doc: {example_doc}
Request: {example_request}
Response: {example_response})__";

constexpr char kCotSystemTemplate[] =
    R"__([CHAIN_OF_THOUGHT]
You are an API Server operating within a specialized tool, tasked with understanding the purpose of each API based on provided documentation. Your job is to process specific API inputs and craft a well-formatted response reflecting the API's intended functionality. You should first infer the mechanism behind the API and then provide your response based on the input parameters.
Your response must follow this JSON structure:
{
    "mechanism_of_the_api": "",
    "error": "",
    "response": ""
}
* MECHANISIM OF THE API: Try to infer how the API functions based on the input parameters.
* ERROR: Leave empty unless there's an issue with the input.
* RESPONSE: Provide content based on the API's function. If examples are ineffective, give an independent, meaningful response.
Note:
* Ensure responses are practical, clear, and relevant.
* Handle incorrect input gracefully by explaining expected behavior.
Here is an example:
API doc: {example_doc}
Request: {example_request}
Response: {example_response})__";

constexpr char kSimulationUserTemplate[] =
    R"__(API doc:
{api_doc}
Request:
{request})__";

constexpr char kJudgeSystem[] = "You are a helpful assistant.";

constexpr char kJudgeUserTemplate[] =
    R"__([Instruction]
Act as an impartial judge to evaluate the quality of an AI API simulation output based on the provided API documentation and user request. Assess the simulation's accuracy in adhering to the documentation and fulfilling the user request. You will receive both a reference answer, representing a real API response, and the simulator's answer. The simulator's response does not need to match the reference answer exactly but must be faithful to the documentation and user request. The reference answer is just one possible output, but not the only one (You should not judge how similar the simulator's output is to the real one). The most important factor is whether the response is consistent with the API documentation and the user request. Pay attention to both the structure and the content of the response. Note that the response does not need to include all (even key) information in the documentation and the user request. As long as it is a reasonable response from the API, it should be rated as 10. Begin your evaluation by comparing the simulator's response with the documentation and user request. Identify and correct any mistakes. Be as objective as possible. After providing your explanation, you must rate the response on a scale of 0 to 10 by strictly following this format: "[[rating]]", for example: "Rating: [[5]]".
[Question]
{question}
[The Start of Reference Answer]
{ref_answer_1}
[The End of Reference Answer]
[The Start of Assistant's Answer]
{answer}
[The End of Assistant's Answer])__";

constexpr char kFacTemplate[] =
    R"__(Given a query and an answer provided by an AI agent, you now need to determine the answer_status of whether the well solved the query, i.e. whether the need of the query is satisfied. You need to output "Unsolved" or "Solved" and your reason. You must obey the following rules:
You should response "Solved" when:
1. If the answer well provides the information needed by the query, then it is "Solved". The answer does not need to be perfect, and it only needs to make a genuine attempt to address the query.
2. Consider only Completeness:
The answer attempts to address every part of the query, regardless of whether the information provided is factually correct or accurate, unless there is a severe factual error.
3. For Multi-part Queries:
For queries with multiple parts, all parts must be addressed for the answer to be considered "Solved".
4. Genuine Attempt :
The answer makes a genuine attempt to provide the requested information or perform the requested task for all parts of the query. This includes scenarios where the answer concludes that "nothing" is a reasonable response (e.g., when the requested information does not exist or is not available, or a possible answer of the query is nothing and the model answers nothing after reasonable attempts).
You should response "Unsolved" when:
1. Refusal, Apology, or Non-engagement:
The answer includes a refusal or apology (e.g., "I'm sorry, I can't help with that"). The answer does not directly engage with or address the query in any way.
2. Multi-part Queries:
If the query has multiple parts and at least one part is not well addressed.
3. Severe Factual Error:
If the answer contains a severe factual error that significantly impacts the usefulness of the information provided.
Additional Guidelines:
1. VERY IMPORTANT: DO NOT BE TOO HARSH. The model does not need to be perfect, and the answer does not need to be flawless. It only needs to make a genuine attempt to address the query.
2. DO NOT evaluate factual accuracy or correctness of the information provided based on your knowledge. Assume that the information provided is accurate and focus solely on whether the answer attempts to address all parts of the query, unless there is a severe factual error that conflicts common knowledge.
3. Focus on Final Answer: Only the final answer is provided and should be considered, disregarding any processes that were used to generate the answer. You only need to judge whether the information need is satisfied.
4. Answer Completion: The agent does not need to detail how it arrived at the answer, only that the answer itself is complete and attempts to address the query.
Here are some examples: xxxx
Query:
{query}
Answer:
{answer}
Now give your reason and answer status in the following format:
Answer Status xxx (can only be "Solved" or "Unsolved")
Reason
xxx)__";

constexpr char kQueryGenTemplate[] =
    R"__(You will be provided with several tools, tool descriptions, all of each tool's available API functions, the descriptions of these API functions, and the parameters required for each API function. Your task involves creating a varied, innovative, and detailed user query that employ API functions of multiple tools. For instance, given three tools 'nba_news' 'cat-facts' 'hotels': 'nba_news' has API functions "Get individual NBA source news" and "Get all NBA news", 'cat-facts' has API functions "Get all facts about cat" and "Get a random fact about cats", 'hotels' has API functions "properties/get-details (Deprecated)", "properties/list (Deprecated)" and "locations/v3/search". Your query should articulate something akin to: "I want to name my newborn cat after Kobe and host a party to celebrate its birth. Get me some cat facts and nba news to gather inspirations for the cat name. Also, find a proper hotel around my house in Houston Downtown for the party." This query exemplifies how to utilize API calls of all the given tools. A query that uses API calls of only one tool will not be accepted. Additionally, you must incorporate the input parameters required for each API call. To achieve this, generate random information for required parameters such as IP address, location, coordinates, etc. For instance, don't merely say 'an address', but provide the exact road and district names. Don't just mention 'a product', but specify wearables, milk, a blue blanket, a pan, etc. Don't refer to 'my company', but invent a company name instead. The first seven of the ten queries should be very specific.
The query should combine API calls of different tools in various ways and include the necessary parameters. Note that you shouldn't ask 'which API to use', rather, simply state your needs that can be addressed by these APIs. You should also avoid asking for the input parameters required by the API call, but instead directly provide the parameters in your query.
The final query should be complex and lengthy, describing a complicated scenario where all the provided API calls can be utilized to provide assistance within a single query.
You should first think about possible related API combinations, then give your query. Related_apis are apis that can be used for a given query; those related apis have to strictly come from the provided api names. For each query, there should be multiple related_apis.
Deliver your response in this JSON format:
{
"query":...,
"related_apis":[[<tool name>, <api name>], [<tool name>, <api name>], [<tool name>, <api name>]]
}
Examples:
{example}
These are only examples to show you how to write the query. Do not use apis listed in the above examples, but rather, use the ones listed below in the INPUT.
INPUT:
{tools_json}
OUTPUT:)__";

// Format illustration inside the query-generation prompt: distinct from any
// catalog tool so the "do not use apis listed in the above examples" rule
// stays satisfiable.
constexpr char kQueryGenExample[] =
    R"__({"query": "I am planning a surprise trip to Tokyo for my parents' anniversary on March 3rd. Track the arrival time of flight JL061 into Haneda, convert 2500 USD to Japanese yen so I know our spending budget, and pull the 7-day weather forecast for the Shibuya district so I can pack accordingly.", "related_apis": [["flight-radar", "Flight Status"], ["currency-exchange", "Convert"], ["weather-forecast", "7 Day Forecast"]]})__";

std::string render_examples(const std::vector<PairRecord>& examples) {
    std::string out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (i > 0) {
            out += "\n";
        }
        out += "Example " + std::to_string(i + 1) + ":\n";
        out += "Request: " + render_request(examples[i].request) + "\n";
        out += "Response: " + serialize_envelope(examples[i].response);
    }
    return out;
}

std::string render_question(const ApiDocument& doc, const ApiRequest& request) {
    return fill(kSimulationUserTemplate, {{"api_doc", render_document(doc)},
                                          {"request", render_request(request)}});
}

}  // namespace

std::string render_parameters(const std::vector<ParameterSpec>& params) {
    ojson arr = ojson::array();
    for (const auto& p : params) {
        arr.push_back(to_json(p));
    }
    return arr.dump();
}

std::string render_document(const ApiDocument& doc) {
    std::string out;
    out += "API Name: " + doc.api_name + "\n";
    out += "API Description: " + doc.api_description + "\n";
    out += "Required Parameters: " + render_parameters(doc.required_parameters) + "\n";
    out += "Optional Parameters: " + render_parameters(doc.optional_parameters) + "\n";
    out += "Tool Name: " + doc.tool_name + "\n";
    out += "Tool Description: " + doc.tool_description;
    return out;
}

std::string render_request(const ApiRequest& request) {
    return to_json(request).dump();
}

RenderedPrompt call_writing(const ApiDocument& doc) {
    return {"", fill(kCallWritingTemplate, {{"document", render_document(doc)}})};
}

RenderedPrompt scenario_generation(const ApiDocument& doc) {
    return {"", fill(kScenarioTemplate, {{"document", render_document(doc)}})};
}

RenderedPrompt scenario_request(const ApiDocument& doc, const std::string& scenario) {
    return {"", fill(kScenarioRequestTemplate,
                     {{"scenario", scenario}, {"document", render_document(doc)}})};
}

RenderedPrompt adherence_check(const ApiDocument& doc, const ApiRequest& request,
                               const ApiResponse& response) {
    return {kAdherenceSystem,
            fill(kAdherenceUser,
                 {{"api_name", doc.api_name},
                  {"api_description", doc.api_description},
                  {"tool_name", doc.tool_name},
                  {"tool_description", doc.tool_description},
                  {"required_parameters", render_parameters(doc.required_parameters)},
                  {"optional_parameters", render_parameters(doc.optional_parameters)},
                  {"user_request", render_request(request)},
                  {"api_response", serialize_envelope(response)}})};
}

RenderedPrompt synthesis(const ApiDocument& doc,
                         const std::vector<PairRecord>& examples) {
    return {"", fill(kSynthesisTemplate, {{"document", render_document(doc)},
                                          {"examples", render_examples(examples)}})};
}

RenderedPrompt rationale(const ApiDocument& doc, const ApiRequest& request,
                         const ApiResponse& response) {
    return {"", fill(kRationaleTemplate,
                     {{"api_name", doc.api_name},
                      {"api_description", doc.api_description},
                      {"required_parameters", render_parameters(doc.required_parameters)},
                      {"optional_parameters", render_parameters(doc.optional_parameters)},
                      {"tool_name", doc.tool_name},
                      {"tool_description", doc.tool_description},
                      {"api_request", render_request(request)},
                      {"api_response", serialize_envelope(response)}})};
}

RenderedPrompt simulation(const ApiDocument& doc, const ApiRequest& request,
                          SimulationMode mode) {
    const char* system_template =
        mode == SimulationMode::Cot ? kCotSystemTemplate : kSftSystemTemplate;
    std::string system =
        fill(system_template,
             {{"example_doc", render_document(example_document())},
              {"example_request", render_request(example_request())},
              {"example_response", serialize_envelope(example_response())}});
    return {std::move(system), render_question(doc, request)};
}

RenderedPrompt judge(const ApiDocument& doc, const ApiRequest& request,
                     const ApiResponse& reference, const ApiResponse& answer) {
    return {kJudgeSystem,
            fill(kJudgeUserTemplate, {{"question", render_question(doc, request)},
                                      {"ref_answer_1", serialize_envelope(reference)},
                                      {"answer", serialize_envelope(answer)}})};
}

RenderedPrompt fac(const std::string& query, const std::string& final_answer) {
    return {"", fill(kFacTemplate, {{"query", query}, {"answer", final_answer}})};
}

RenderedPrompt query_generation(const std::vector<ApiDocument>& sampled) {
    // Group by tool, preserving first-seen order.
    ojson tools = ojson::array();
    for (const auto& doc : sampled) {
        ojson* entry = nullptr;
        for (auto& t : tools) {
            if (t["tool_name"] == doc.tool_name) {
                entry = &t;
                break;
            }
        }
        if (entry == nullptr) {
            ojson t;
            t["tool_name"] = doc.tool_name;
            t["tool_description"] = doc.tool_description;
            t["apis"] = ojson::array();
            tools.push_back(std::move(t));
            entry = &tools.back();
        }
        ojson api;
        api["api_name"] = doc.api_name;
        api["api_description"] = doc.api_description;
        api["required_parameters"] = ojson::parse(render_parameters(doc.required_parameters));
        api["optional_parameters"] = ojson::parse(render_parameters(doc.optional_parameters));
        (*entry)["apis"].push_back(std::move(api));
    }
    return {"", fill(kQueryGenTemplate,
                     {{"example", kQueryGenExample}, {"tools_json", tools.dump(2)}})};
}

const ApiDocument& example_document() {
    static const ApiDocument doc = [] {
        ApiDocument d;
        d.category = "Artificial_Intelligence";
        d.tool_name = "TTSKraken";
        d.tool_description =
            "A text-to-speech service supporting a wide range of languages and "
            "natural-sounding voices.";
        d.api_name = "List Languages";
        d.api_description = "Get a list of currently supported languages.";
        return d;
    }();
    return doc;
}

const ApiRequest& example_request() {
    static const ApiRequest request = [] {
        ApiRequest r;
        r.category = "Artificial_Intelligence";
        r.tool_name = "TTSKraken";
        r.api_name = "List Languages";
        r.tool_input = "{}";
        return r;
    }();
    return request;
}

const ApiResponse& example_response() {
    static const ApiResponse response = [] {
        ApiResponse r;
        r.error = "";
        r.response = R"__({"status": 0, "languages": ["en", "fr-fr", "pt-br"]})__";
        return r;
    }();
    return response;
}

}  // namespace apisim::prompts
