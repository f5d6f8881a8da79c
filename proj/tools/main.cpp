#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "CLI11.hpp"
#include "apisim/backends.hpp"
#include "apisim/collection.hpp"
#include "apisim/config.hpp"
#include "apisim/curation.hpp"
#include "apisim/dataset.hpp"
#include "apisim/demo.hpp"
#include "apisim/eval.hpp"
#include "apisim/gateway.hpp"
#include "apisim/jsonl.hpp"
#include "apisim/report.hpp"

namespace fs = std::filesystem;
using namespace apisim;

namespace {

Logger make_logger(bool verbose) {
    if (!verbose) {
        return {};
    }
    return [](std::string_view line) { std::cerr << line << "\n"; };
}

fs::path pick_path(const std::string& flag, const fs::path& configured,
                   const fs::path& out_dir, const char* fallback) {
    if (!flag.empty()) {
        return flag;
    }
    if (!configured.empty()) {
        return configured;
    }
    return out_dir / fallback;
}

std::unique_ptr<collection::Upstream> make_upstream(const std::string& url) {
    if (!url.empty()) {
        return std::make_unique<collection::HttpUpstream>(url);
    }
    return std::make_unique<collection::MockUpstream>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"apisim: tool-API simulation environment pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir_flag;
    std::optional<std::string> fixed_time;
    bool verbose = false;
    app.add_option("--config", config_path, "JSON config file (global_seed, paths, plan, policy, gateway, sizes, roles)");
    app.add_option("--seed", seed, "Override global_seed (and each stage's derived seed)");
    app.add_option("--out-dir", out_dir_flag, "Override paths.out_dir (default: out)");
    app.add_option("--fixed-time", fixed_time, "Pin every written timestamp to this RFC 3339 value");
    app.add_flag("--verbose", verbose, "Structured stage/outcome progress lines on stderr");

    auto resolve_config = [&]() -> AppConfig {
        AppConfig config;
        if (!config_path.empty()) {
            config = load_config(config_path);
        }
        if (seed) {
            config.global_seed = *seed;
            config.plan.seed = static_cast<std::int64_t>(*seed);
        }
        if (out_dir_flag) {
            config.paths.out_dir = *out_dir_flag;
        }
        if (fixed_time) {
            config.fixed_time = *fixed_time;
        }
        return config;
    };

    int exit_code = 0;

    // --- probe ---------------------------------------------------------------
    auto* probe_cmd = app.add_subcommand(
        "probe", "Send one reachability-test call per catalog API");
    std::string probe_catalog;
    std::string probe_upstream;
    probe_cmd->add_option("--catalog", probe_catalog, "API documentation JSONL (default: <out-dir>/catalog.jsonl)");
    probe_cmd->add_option("--upstream-url", probe_upstream, "Marketplace endpoint; omit for the deterministic mock");
    probe_cmd->callback([&] {
        const AppConfig config = resolve_config();
        const DocCatalog catalog = DocCatalog::load(pick_path(
            probe_catalog, config.paths.catalog, config.paths.out_dir,
            "catalog.jsonl"));
        const auto writer = make_chat_backend(config, "writer");
        const auto upstream = make_upstream(probe_upstream);
        collection::Collector collector(*writer, *upstream,
                                        config.time_source(),
                                        make_logger(verbose));
        std::size_t available = 0;
        for (const auto& doc : catalog.docs()) {
            const bool ok = collector.probe_api(doc);
            available += ok ? 1 : 0;
            std::cout << (ok ? "ok    " : "skip  ") << doc.key() << "\n";
        }
        std::cout << available << "/" << catalog.size() << " APIs available\n";
    });

    // --- collect ---------------------------------------------------------------
    auto* collect_cmd = app.add_subcommand(
        "collect", "Generate scenarios and calls, execute them, record pairs");
    std::string collect_catalog;
    std::string collect_out;
    std::string collect_upstream;
    std::optional<int> collect_calls;
    std::optional<int> collect_scenarios;
    std::optional<int> collect_attempts;
    std::optional<double> collect_scenario_temp;
    std::optional<double> collect_request_temp;
    int collect_workers = 4;
    collect_cmd->add_option("--catalog", collect_catalog, "API documentation JSONL");
    collect_cmd->add_option("--out", collect_out, "Raw pair JSONL to write (default: <out-dir>/raw_pairs.jsonl)");
    collect_cmd->add_option("--upstream-url", collect_upstream, "Marketplace endpoint; omit for the deterministic mock");
    collect_cmd->add_option("--calls-per-api", collect_calls, "Requests per API (config plan.calls_per_api; default 200)");
    collect_cmd->add_option("--scenarios-per-api", collect_scenarios, "Scenarios per API (default: one per call)");
    collect_cmd->add_option("--max-attempts-per-call", collect_attempts, "Writer retries per malformed call (default 3)");
    collect_cmd->add_option("--scenario-temperature", collect_scenario_temp, "Sampling temperature for scenario generation");
    collect_cmd->add_option("--request-temperature", collect_request_temp, "Sampling temperature for call writing");
    collect_cmd->add_option("--workers", collect_workers, "Per-API worker threads (default 4)");
    collect_cmd->callback([&] {
        const AppConfig config = resolve_config();
        fs::create_directories(config.paths.out_dir);
        const DocCatalog catalog = DocCatalog::load(pick_path(
            collect_catalog, config.paths.catalog, config.paths.out_dir,
            "catalog.jsonl"));
        collection::CollectionPlan plan = config.plan;
        if (collect_calls) plan.calls_per_api = *collect_calls;
        if (collect_scenarios) plan.scenarios_per_api = *collect_scenarios;
        if (collect_attempts) plan.max_attempts_per_call = *collect_attempts;
        if (collect_scenario_temp) plan.scenario_temperature = *collect_scenario_temp;
        if (collect_request_temp) plan.request_temperature = *collect_request_temp;
        const auto writer = make_chat_backend(config, "writer");
        const auto upstream = make_upstream(collect_upstream);
        collection::Collector collector(*writer, *upstream,
                                        config.time_source(),
                                        make_logger(verbose));
        const auto records =
            collector.collect_catalog(catalog.docs(), plan, collect_workers);
        const fs::path out = pick_path(collect_out, config.paths.raw,
                                       config.paths.out_dir, "raw_pairs.jsonl");
        write_records(out, records);
        std::cout << "collected " << records.size() << " pairs -> "
                  << out.string() << "\n";
    });

    // --- curate ---------------------------------------------------------------
    auto* curate_cmd = app.add_subcommand(
        "curate", "Classify outcomes and keep Success plus quota-capped ParameterChange pairs");
    std::string curate_in;
    std::string curate_out;
    std::optional<std::size_t> curate_quota;
    curate_cmd->add_option("--in", curate_in, "Raw pair JSONL (default: <out-dir>/raw_pairs.jsonl)");
    curate_cmd->add_option("--out", curate_out, "Curated pair JSONL to write (default: <out-dir>/curated_pairs.jsonl)");
    curate_cmd->add_option("--retained-failure-quota", curate_quota, "Cap on retained ParameterChange pairs (default 10000)");
    curate_cmd->callback([&] {
        const AppConfig config = resolve_config();
        fs::create_directories(config.paths.out_dir);
        curation::CurationPolicy policy = config.policy;
        if (curate_quota) policy.retained_failure_quota = *curate_quota;
        const auto raw = read_records(pick_path(curate_in, config.paths.raw,
                                                config.paths.out_dir,
                                                "raw_pairs.jsonl"));
        const auto kept = curation::filter_pairs(raw, policy);
        const fs::path out =
            pick_path(curate_out, config.paths.curated, config.paths.out_dir,
                      "curated_pairs.jsonl");
        write_records(out, kept);
        std::cout << "kept " << kept.size() << " of " << raw.size()
                  << " pairs -> " << out.string() << "\n";
    });

    // --- synthesize -------------------------------------------------------------
    auto* synth_cmd = app.add_subcommand(
        "synthesize", "Augment curated pairs with generated request/response pairs");
    std::string synth_catalog;
    std::string synth_in;
    std::string synth_out;
    int synth_per_api = 1;
    std::optional<std::size_t> synth_examples;
    double synth_temperature = 1.0;
    synth_cmd->add_option("--catalog", synth_catalog, "API documentation JSONL");
    synth_cmd->add_option("--in", synth_in, "Curated pair JSONL (default: <out-dir>/curated_pairs.jsonl)");
    synth_cmd->add_option("--out", synth_out, "Combined pair JSONL to write (default: input path)");
    synth_cmd->add_option("--per-api", synth_per_api, "Synthetic pairs requested per API (default 1)");
    synth_cmd->add_option("--examples-per-prompt", synth_examples, "Few-shot examples per synthesis prompt (default 10)");
    synth_cmd->add_option("--temperature", synth_temperature, "Sampling temperature for synthesis (default 1.0)");
    synth_cmd->callback([&] {
        const AppConfig config = resolve_config();
        fs::create_directories(config.paths.out_dir);
        curation::CurationPolicy policy = config.policy;
        if (synth_examples) policy.synthesis_examples_per_prompt = *synth_examples;
        const DocCatalog catalog = DocCatalog::load(pick_path(
            synth_catalog, config.paths.catalog, config.paths.out_dir,
            "catalog.jsonl"));
        const fs::path in = pick_path(synth_in, config.paths.curated,
                                      config.paths.out_dir,
                                      "curated_pairs.jsonl");
        std::vector<PairRecord> pairs = read_records(in);

        const auto writer = make_chat_backend(config, "writer");
        const auto checker = make_chat_backend(config, "checker");
        const auto reasoner = make_chat_backend(config, "reasoner");
        curation::Curator curator(*checker, *writer, *reasoner, catalog,
                                  config.time_source(), make_logger(verbose));
        std::unordered_set<std::string> existing_keys;
        std::map<std::string, std::vector<PairRecord>> per_api;
        for (const auto& record : pairs) {
            existing_keys.insert(canonical_key(record.request));
            per_api[record.doc_key].push_back(record);
        }
        backends::GenerationParams params;
        params.temperature = synth_temperature;
        std::int64_t next_seed =
            static_cast<std::int64_t>(config.global_seed) * 1000;
        std::vector<PairRecord> synthetic;
        for (const auto& doc : catalog.docs()) {
            const auto it = per_api.find(doc.key());
            if (it == per_api.end()) {
                continue;
            }
            std::vector<PairRecord> examples = it->second;
            if (examples.size() > policy.synthesis_examples_per_prompt) {
                examples.resize(policy.synthesis_examples_per_prompt);
            }
            std::vector<std::int64_t> seeds;
            for (int k = 0; k < synth_per_api; ++k) {
                seeds.push_back(next_seed++);
            }
            const auto batch = curator.synthesize_pairs(doc, examples, params,
                                                        seeds, existing_keys);
            synthetic.insert(synthetic.end(), batch.begin(), batch.end());
        }
        synthetic = curator.quality_check_synthetic(synthetic);
        pairs.insert(pairs.end(), synthetic.begin(), synthetic.end());
        const fs::path out = synth_out.empty() ? in : fs::path(synth_out);
        write_records(out, pairs);
        std::cout << "accepted " << synthetic.size() << " synthetic pairs, "
                  << pairs.size() << " total -> " << out.string() << "\n";
    });

    // --- rationale -------------------------------------------------------------
    auto* rationale_cmd = app.add_subcommand(
        "rationale", "Annotate a seeded sample of pairs with mechanism reasoning");
    std::string rationale_catalog;
    std::string rationale_in;
    std::string rationale_out;
    std::size_t rationale_success = 0;
    std::size_t rationale_fail = 0;
    int rationale_workers = 4;
    rationale_cmd->add_option("--catalog", rationale_catalog, "API documentation JSONL");
    rationale_cmd->add_option("--in", rationale_in, "Curated pair JSONL (default: <out-dir>/curated_pairs.jsonl)");
    rationale_cmd->add_option("--out", rationale_out, "Annotated pair JSONL to write (default: input path)");
    rationale_cmd->add_option("--success", rationale_success, "Success pairs to annotate")->required();
    rationale_cmd->add_option("--fail", rationale_fail, "Retained-failure pairs to annotate")->required();
    rationale_cmd->add_option("--workers", rationale_workers, "Annotation worker threads (default 4)");
    rationale_cmd->callback([&] {
        const AppConfig config = resolve_config();
        const DocCatalog catalog = DocCatalog::load(pick_path(
            rationale_catalog, config.paths.catalog, config.paths.out_dir,
            "catalog.jsonl"));
        const fs::path in = pick_path(rationale_in, config.paths.curated,
                                      config.paths.out_dir,
                                      "curated_pairs.jsonl");
        std::vector<PairRecord> pairs = read_records(in);
        const auto sampled = curation::select_rationale_sample(
            pairs, rationale_success, rationale_fail, config.global_seed);
        const auto writer = make_chat_backend(config, "writer");
        const auto checker = make_chat_backend(config, "checker");
        const auto reasoner = make_chat_backend(config, "reasoner");
        curation::Curator curator(*checker, *writer, *reasoner, catalog,
                                  config.time_source(), make_logger(verbose));
        const auto annotated =
            curator.annotate_rationales(pairs, sampled, rationale_workers);
        for (std::size_t i = 0; i < sampled.size(); ++i) {
            pairs[sampled[i]] = annotated[i];
        }
        const fs::path out = rationale_out.empty() ? in : fs::path(rationale_out);
        write_records(out, pairs);
        std::cout << "annotated " << annotated.size() << " pairs -> "
                  << out.string() << "\n";
    });

    // --- split ---------------------------------------------------------------
    auto* split_cmd = app.add_subcommand(
        "split", "Carve curated pairs into Training, OOD, and ID benchmark splits");
    std::string split_in;
    std::string split_manifest;
    std::string split_sizes = "paper";
    std::optional<std::size_t> split_ood_succ;
    std::optional<std::size_t> split_ood_fail;
    std::optional<std::size_t> split_id_each;
    std::optional<std::size_t> split_held_out;
    split_cmd->add_option("--in", split_in, "Curated pair JSONL (default: <out-dir>/curated_pairs.jsonl)");
    split_cmd->add_option("--manifest", split_manifest, "Manifest JSON to write (default: <out-dir>/manifest.json)");
    split_cmd->add_option("--sizes", split_sizes, "Size preset: paper or desk (default paper)")
        ->check(CLI::IsMember({"paper", "desk"}));
    split_cmd->add_option("--ood-succ", split_ood_succ, "Override OOD-Succ size");
    split_cmd->add_option("--ood-fail", split_ood_fail, "Override OOD-Fail size");
    split_cmd->add_option("--id-each", split_id_each, "Override per-tertile ID size");
    split_cmd->add_option("--held-out-apis", split_held_out, "Override held-out API count");
    split_cmd->callback([&] {
        const AppConfig config = resolve_config();
        fs::create_directories(config.paths.out_dir);
        const auto pairs = read_records(pick_path(split_in, config.paths.curated,
                                                  config.paths.out_dir,
                                                  "curated_pairs.jsonl"));
        SplitSizes sizes =
            split_sizes == "desk" ? SplitSizes::desk() : SplitSizes::paper();
        if (split_ood_succ) sizes.ood_succ = *split_ood_succ;
        if (split_ood_fail) sizes.ood_fail = *split_ood_fail;
        if (split_id_each) sizes.id_each = *split_id_each;
        if (split_held_out) sizes.held_out_apis = *split_held_out;
        const DatasetManifest manifest =
            split_dataset(pairs, sizes, config.global_seed);
        const fs::path out = pick_path(split_manifest, config.paths.manifest,
                                       config.paths.out_dir, "manifest.json");
        save_manifest(out, manifest);
        std::cout << stats(manifest, pairs).render_text() << "manifest -> "
                  << out.string() << "\n";
    });

    // --- export ---------------------------------------------------------------
    auto* export_cmd = app.add_subcommand(
        "export", "Emit SFT/CoT training sample files from the split manifest");
    std::string export_in;
    std::string export_manifest;
    std::string export_catalog;
    std::string export_dir;
    bool export_sequential = false;
    export_cmd->add_option("--in", export_in, "Curated pair JSONL (default: <out-dir>/curated_pairs.jsonl)");
    export_cmd->add_option("--manifest", export_manifest, "Manifest JSON (default: <out-dir>/manifest.json)");
    export_cmd->add_option("--catalog", export_catalog, "API documentation JSONL");
    export_cmd->add_option("--export-dir", export_dir, "Directory for sample files (default: <out-dir>)");
    export_cmd->add_flag("--sequential", export_sequential, "Order samples SFT-then-CoT instead of shuffling");
    export_cmd->callback([&] {
        const AppConfig config = resolve_config();
        const auto pairs = read_records(pick_path(export_in, config.paths.curated,
                                                  config.paths.out_dir,
                                                  "curated_pairs.jsonl"));
        const DatasetManifest manifest = load_manifest(
            pick_path(export_manifest, config.paths.manifest,
                      config.paths.out_dir, "manifest.json"));
        const DocCatalog catalog = DocCatalog::load(pick_path(
            export_catalog, config.paths.catalog, config.paths.out_dir,
            "catalog.jsonl"));
        manifest.validate(pairs);
        std::vector<PairRecord> training;
        training.reserve(manifest.training.size());
        for (const std::size_t idx : manifest.training) {
            training.push_back(pairs[idx]);
        }
        std::vector<PairRecord> annotated;
        for (const auto& record : training) {
            if (record.rationale && !record.rationale->empty()) {
                annotated.push_back(record);
            }
        }
        const auto sft = export_sft(training, catalog);
        const auto cot = export_cot(annotated, catalog);
        const auto combined = export_sequential
                                  ? sequential_training(sft, cot)
                                  : mix_training(sft, cot, config.global_seed);
        const fs::path dir =
            export_dir.empty() ? config.paths.out_dir : fs::path(export_dir);
        fs::create_directories(dir);
        write_samples(dir / "train_sft.jsonl", sft);
        write_samples(dir / "train_cot.jsonl", cot);
        write_samples(dir / "train_mixed.jsonl", combined);
        write_hyperparameter_sidecar(dir / "hyperparameters.json");
        std::cout << "exported " << sft.size() << " plain + " << cot.size()
                  << " reasoning samples (" << combined.size()
                  << (export_sequential ? " sequential" : " mixed") << ") -> "
                  << dir.string() << "\n";
    });

    // --- serve ---------------------------------------------------------------
    auto* serve_cmd = app.add_subcommand(
        "serve", "Run the simulation gateway (POST /simulate, GET /health)");
    std::string serve_catalog;
    std::string serve_cache;
    std::string serve_record;
    std::string serve_listen;
    std::string serve_mode;
    std::optional<std::size_t> serve_max_tokens;
    serve_cmd->add_option("--catalog", serve_catalog, "API documentation JSONL");
    serve_cmd->add_option("--cache", serve_cache, "Cache store JSONL (default: <out-dir>/gateway_cache.jsonl)");
    serve_cmd->add_option("--record", serve_record, "Append served pairs to this JSONL");
    serve_cmd->add_option("--listen", serve_listen, "host:port to bind (default from config, 127.0.0.1:8811)");
    serve_cmd->add_option("--mode", serve_mode, "Default simulation mode: sft or cot")
        ->check(CLI::IsMember({"sft", "cot"}));
    serve_cmd->add_option("--max-observation-tokens", serve_max_tokens, "Response token cap (default 2048)");
    serve_cmd->callback([&] {
        const AppConfig config = resolve_config();
        fs::create_directories(config.paths.out_dir);
        GatewayConfig gateway_config = config.gateway;
        gateway_config.cache_path =
            pick_path(serve_cache, config.paths.cache, config.paths.out_dir,
                      "gateway_cache.jsonl");
        if (!serve_record.empty()) {
            gateway_config.record_path = serve_record;
        } else if (config.paths.records) {
            gateway_config.record_path = *config.paths.records;
        }
        if (!serve_listen.empty()) {
            gateway_config.listen_address = serve_listen;
        }
        if (!serve_mode.empty()) {
            gateway_config.default_mode = mode_from_string(serve_mode);
        }
        if (serve_max_tokens) {
            gateway_config.max_observation_tokens = *serve_max_tokens;
        }
        const fs::path catalog_path = pick_path(
            serve_catalog, config.paths.catalog, config.paths.out_dir,
            "catalog.jsonl");
        gateway_config.doc_catalog_path = catalog_path;
        const DocCatalog catalog = DocCatalog::load(catalog_path);
        const auto simulator = make_chat_backend(config, "simulator");
        Gateway gateway(gateway_config, catalog, *simulator,
                        config.time_source(), make_logger(verbose));
        GatewayServer server(gateway);
        const auto [host, port] =
            split_listen_address(gateway_config.listen_address);
        std::cout << "serving " << catalog.size() << " APIs on " << host << ":"
                  << port << "\n";
        if (!server.run(host, port)) {
            throw Error("could not bind " + gateway_config.listen_address);
        }
    });

    // --- eval ---------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand(
        "eval", "Score simulated responses against references");
    eval_cmd->require_subcommand(1);

    auto* following_cmd = eval_cmd->add_subcommand(
        "following", "LLM-judge documentation-following ratings (0-10)");
    std::string following_refs;
    std::string following_preds;
    std::string following_catalog;
    int following_workers = 4;
    following_cmd->add_option("--refs", following_refs, "Reference pair JSONL")->required();
    following_cmd->add_option("--preds", following_preds, "Predicted pair JSONL, aligned by line")->required();
    following_cmd->add_option("--catalog", following_catalog, "API documentation JSONL");
    following_cmd->add_option("--workers", following_workers, "Judge worker threads (default 4)");
    following_cmd->callback([&] {
        const AppConfig config = resolve_config();
        const DocCatalog catalog = DocCatalog::load(pick_path(
            following_catalog, config.paths.catalog, config.paths.out_dir,
            "catalog.jsonl"));
        const auto refs = read_records(following_refs);
        const auto preds = read_records(following_preds);
        const auto judge = make_chat_backend(config, "checker");
        const FollowingResult result =
            judge_mean_over(refs, preds, catalog, *judge, following_workers,
                            make_logger(verbose));
        std::cout << "judge_mean=" << fixed_decimals(result.judge_mean, 2)
                  << " evaluated=" << result.evaluated
                  << " unevaluated=" << result.unevaluated << "\n";
    });

    auto* bleu_cmd = eval_cmd->add_subcommand(
        "bleu-cosine", "Corpus BLEU-4 and embedding cosine similarity, x100");
    std::string bleu_refs;
    std::string bleu_preds;
    bleu_cmd->add_option("--refs", bleu_refs, "Reference pair JSONL")->required();
    bleu_cmd->add_option("--preds", bleu_preds, "Predicted pair JSONL, aligned by line")->required();
    bleu_cmd->callback([&] {
        const AppConfig config = resolve_config();
        const auto refs = read_records(bleu_refs);
        const auto preds = read_records(bleu_preds);
        const auto embedder = make_embedder(config);
        const PairMetrics metrics = bleu_cosine_over(refs, preds, *embedder);
        std::cout << "bleu_x100=" << fixed_decimals(metrics.bleu_mean_x100, 2)
                  << " cosine_x100="
                  << fixed_decimals(metrics.cosine_mean_x100, 2)
                  << " n=" << metrics.n << "\n";
    });

    auto* sopr_cmd = eval_cmd->add_subcommand(
        "sopr", "Aggregate three run pass rates into mean +/- population std");
    std::vector<double> sopr_scores;
    sopr_cmd->add_option("--run-scores", sopr_scores, "Exactly three per-run scores (100 x pass fraction)")
        ->required()
        ->expected(3);
    sopr_cmd->callback([&] {
        const SoPRResult result = sopr_from_run_scores(sopr_scores);
        std::cout << fixed_decimals(result.mean, 1) << " +/- "
                  << fixed_decimals(result.std_dev, 3) << "\n";
    });

    auto* fac_cmd = eval_cmd->add_subcommand(
        "fac", "Final-answer check over query/answer rows");
    std::string fac_in;
    fac_cmd->add_option("--in", fac_in, "JSONL rows {\"query\":..., \"final_answer\":...}")->required();
    fac_cmd->callback([&] {
        const AppConfig config = resolve_config();
        const auto checker = make_chat_backend(config, "checker");
        std::vector<FacVerdict> verdicts;
        for (const auto& row : read_jsonl(fac_in)) {
            const std::string query = row.value("query", std::string{});
            const std::string answer = row.value("final_answer", std::string{});
            verdicts.push_back(fac_score(query, answer, *checker));
            std::cout << (verdicts.back().status == FacStatus::Solved
                              ? "solved    "
                              : "unsolved  ")
                      << verdicts.back().reason << "\n";
        }
        std::cout << "fac=" << fixed_decimals(fac_aggregate(verdicts), 1)
                  << " over " << verdicts.size() << " queries\n";
    });

    // --- queries ---------------------------------------------------------------
    auto* queries_cmd = app.add_subcommand(
        "queries", "Generate multi-tool user queries for environment comparison");
    std::string queries_catalog;
    std::string queries_out;
    std::size_t queries_n = 10;
    queries_cmd->add_option("--catalog", queries_catalog, "API documentation JSONL");
    queries_cmd->add_option("--out", queries_out, "Query JSONL to write (default: <out-dir>/queries.jsonl)");
    queries_cmd->add_option("--n", queries_n, "Number of queries (default 10)");
    queries_cmd->callback([&] {
        const AppConfig config = resolve_config();
        fs::create_directories(config.paths.out_dir);
        const DocCatalog catalog = DocCatalog::load(pick_path(
            queries_catalog, config.paths.catalog, config.paths.out_dir,
            "catalog.jsonl"));
        const auto writer = make_chat_backend(config, "writer");
        const auto generated =
            generate_queries(catalog.docs(), queries_n, config.global_seed,
                             *writer, make_logger(verbose));
        std::vector<ojson> rows;
        rows.reserve(generated.size());
        for (const auto& query : generated) {
            ojson row;
            row["query"] = query.query;
            ojson apis = ojson::array();
            for (const auto& [tool, api] : query.related_apis) {
                apis.push_back(ojson::array({tool, api}));
            }
            row["related_apis"] = std::move(apis);
            rows.push_back(std::move(row));
        }
        const fs::path out = queries_out.empty()
                                 ? config.paths.out_dir / "queries.jsonl"
                                 : fs::path(queries_out);
        write_jsonl(out, rows);
        std::cout << "wrote " << rows.size() << " queries -> " << out.string()
                  << "\n";
    });

    // --- demo ---------------------------------------------------------------
    auto* demo_cmd = app.add_subcommand(
        "demo", "Full desk-scale pipeline + gateway + eval against mocks");
    demo_cmd->callback([&] {
        const AppConfig config = resolve_config();
        exit_code = run_demo(config, make_logger(verbose));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
