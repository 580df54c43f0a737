#include "crashsev.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace crashsev;

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (auto t = trim(item); !t.empty()) out.emplace_back(t);
    return out;
}

void emit_error(std::string_view code, std::string_view message) {
    nlohmann::json j = {{"error", code}, {"message", message}};
    std::cerr << j.dump() << '\n';
}

void print_reports(const std::vector<EvaluationReport>& reports, const std::string& format) {
    if (format == "md") std::cout << markdown_table(reports);
    else std::cout << reports_json(reports).dump(2) << '\n';
}

struct RunArgs {
    std::string config;
    std::string strategies;
    std::string models;
    std::string mock;
    std::optional<std::uint64_t> seed;
    std::string output_dir;
};

int cmd_run(const RunArgs& a) {
    auto config_path = std::filesystem::path(a.config);
    auto config = ExperimentConfig::from_json(read_json_file(a.config), config_path.parent_path());
    if (!a.strategies.empty()) {
        config.strategies.clear();
        for (const auto& s : split_csv_list(a.strategies)) config.strategies.push_back(parse_strategy(s));
    }
    if (!a.models.empty()) {
        auto wanted = split_csv_list(a.models);
        std::vector<ModelSpec> kept;
        for (const auto& id : wanted) {
            auto it = std::find_if(config.models.begin(), config.models.end(), [&](const auto& m) { return m.model_id == id; });
            if (it == config.models.end()) throw Error(ErrorCode::InvalidConfig, "model " + id + " not in config");
            kept.push_back(*it);
        }
        config.models = std::move(kept);
    }
    if (a.seed) config.seed = *a.seed;
    if (!a.output_dir.empty()) config.output_dir = a.output_dir;
    config.validate();

    std::unique_ptr<ChatBackend> backend;
    if (!a.mock.empty()) backend = std::make_unique<MockBackend>(MockBackend::from_json(read_json_file(a.mock)));
    else backend = std::make_unique<HttpBackend>();

    auto result = run(config, *backend);
    std::cout << markdown_table(result.reports);
    std::cerr << "endpoint calls: " << backend->calls() << ", outputs in " << config.output_dir << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crash severity inference experiments with chat-completion models"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Run the configured strategy x model matrix");
    run_cmd->add_option("--config", run_args.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--strategies", run_args.strategies, "Comma-separated strategy names, e.g. ZS,ZS_PE");
    run_cmd->add_option("--models", run_args.models, "Comma-separated model ids from the config");
    run_cmd->add_option("--mock", run_args.mock, "Mock backend script (JSON) instead of HTTP")->check(CLI::ExistingFile);
    run_cmd->add_option("--seed", run_args.seed, "Sampling seed");
    run_cmd->add_option("--output-dir", run_args.output_dir, "Override output directory");

    std::string transcript, rescore_format = "json", pe_override;
    auto* rescore_cmd = app.add_subcommand("rescore", "Recompute reports from a transcript without network access");
    rescore_cmd->add_option("--transcript", transcript, "transcript.jsonl")->required()->check(CLI::ExistingFile);
    rescore_cmd->add_option("--format", rescore_format, "md or json")->check(CLI::IsMember({"md", "json"}));
    rescore_cmd->add_option("--pe", pe_override, "Label-set overrides, e.g. FS=true,ZS_PE=false");

    std::string data, schema;
    std::size_t n = 50;
    std::uint64_t seed = 0;
    auto* sample_cmd = app.add_subcommand("sample", "Print the stratified sample manifest");
    sample_cmd->add_option("--data", data, "CSV data file")->required()->check(CLI::ExistingFile);
    sample_cmd->add_option("--n", n, "Records per class");
    sample_cmd->add_option("--seed", seed, "Sampling seed");
    sample_cmd->add_option("--schema", schema, "Schema map (JSON)")->check(CLI::ExistingFile);

    std::string report_input, report_format = "md";
    auto* report_cmd = app.add_subcommand("report", "Format a reports.json file");
    report_cmd->add_option("--input", report_input, "reports.json written by run")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--format", report_format, "md or json")->check(CLI::IsMember({"md", "json"}));

    std::string gen_out;
    std::size_t gen_n = 60;
    std::uint64_t gen_seed = 1;
    auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic CSV fixture in the crash schema");
    gen_cmd->add_option("--out", gen_out, "Output CSV path")->required();
    gen_cmd->add_option("--n-per-class", gen_n, "Records per class");
    gen_cmd->add_option("--seed", gen_seed, "Generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        emit_error("Usage", e.what());
        return 2;
    }

    try {
        if (*run_cmd) return cmd_run(run_args);
        if (*rescore_cmd) {
            std::map<std::string, bool> overrides;
            for (const auto& item : split_csv_list(pe_override)) {
                auto eq = item.find('=');
                if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--pe expects STRATEGY=true|false");
                overrides[item.substr(0, eq)] = item.substr(eq + 1) == "true";
            }
            print_reports(rescore(transcript, overrides), rescore_format);
        } else if (*sample_cmd) {
            std::optional<std::string> schema_path;
            if (!schema.empty()) schema_path = schema;
            auto ds = load_dataset(data, schema_path, std::nullopt);
            std::cout << sample_manifest(stratified_sample(ds, n, seed), seed, n).dump(2) << '\n';
        } else if (*report_cmd) {
            std::vector<EvaluationReport> reports;
            for (const auto& r : read_json_file(report_input)) reports.push_back(report_from_json(r));
            print_reports(reports, report_format);
        } else if (*gen_cmd) {
            std::ofstream out(gen_out);
            if (!out) throw Error(ErrorCode::Io, "cannot write " + gen_out);
            serialize_records(out, generate_synthetic(gen_n, gen_seed));
        }
    } catch (const Error& e) {
        emit_error(to_string(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error("Internal", e.what());
        return 1;
    }
    return 0;
}
