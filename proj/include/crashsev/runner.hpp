#pragma once

#include "crashsev/assets.hpp"
#include "crashsev/crash_data.hpp"
#include "crashsev/label_extraction.hpp"
#include "crashsev/llm_client.hpp"
#include "crashsev/metrics.hpp"
#include "crashsev/narrative.hpp"
#include "crashsev/prompting.hpp"
#include "crashsev/reasoning_analysis.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace crashsev {

namespace fs = std::filesystem;

struct ExperimentConfig {
    std::string data_path;
    std::optional<std::string> schema_map_path;
    std::optional<nlohmann::json> severity_mapping;
    std::size_t n_per_class = 50;
    std::uint64_t seed = 0;
    std::uint64_t exemplar_seed = 0;
    std::vector<PromptStrategy> strategies{kBaseStrategies.begin(), kBaseStrategies.end()};
    bool allow_extended_strategies = false;
    std::vector<ModelSpec> models;
    DecodingParams params;
    RetryPolicy retry;
    std::optional<std::string> cache_path;
    std::string output_dir = "out";
    std::optional<std::string> knowledge_facts_path;
    std::optional<std::string> template_path;
    std::optional<std::string> display_map_path;
    std::size_t parallelism = 4;
    std::size_t term_top_k = 50;

    /// Relative paths resolve against base_dir (normally the config file's directory).
    static ExperimentConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
        ExperimentConfig c;
        auto path = [&](const std::string& p) { return (fs::path(p).is_absolute() || base_dir.empty()) ? p : (base_dir / p).string(); };
        auto opt_path = [&](const char* key, std::optional<std::string>& out) {
            if (j.contains(key) && !j[key].is_null()) out = path(j[key].get<std::string>());
        };
        try {
            c.data_path = path(j.at("data_path").get<std::string>());
            opt_path("schema_map_path", c.schema_map_path);
            opt_path("cache_path", c.cache_path);
            opt_path("knowledge_facts_path", c.knowledge_facts_path);
            opt_path("template_path", c.template_path);
            opt_path("display_map_path", c.display_map_path);
            if (j.contains("severity_mapping")) c.severity_mapping = j["severity_mapping"];
            c.n_per_class = j.value("n_per_class", c.n_per_class);
            c.seed = j.value("seed", c.seed);
            c.exemplar_seed = j.value("exemplar_seed", c.exemplar_seed);
            c.allow_extended_strategies = j.value("allow_extended_strategies", false);
            if (j.contains("strategies")) {
                c.strategies.clear();
                for (const auto& s : j["strategies"]) c.strategies.push_back(parse_strategy(s.get<std::string>()));
            }
            for (const auto& m : j.at("models")) c.models.push_back(ModelSpec::from_json(m));
            if (j.contains("params")) c.params = decoding_params_from_json(j["params"]);
            if (j.contains("retry")) c.retry = RetryPolicy::from_json(j["retry"]);
            c.output_dir = path(j.value("output_dir", c.output_dir));
            c.parallelism = j.value("parallelism", c.parallelism);
            c.term_top_k = j.value("term_top_k", c.term_top_k);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, e.what());
        }
        c.validate();
        return c;
    }

    void validate() const {
        if (models.empty()) throw Error(ErrorCode::InvalidConfig, "no models configured");
        if (strategies.empty()) throw Error(ErrorCode::InvalidConfig, "no strategies configured");
        for (const auto& s : strategies)
            if (s.extended() && !allow_extended_strategies)
                throw Error(ErrorCode::InvalidConfig, s.name() + " is an extended strategy; set allow_extended_strategies");
        if (parallelism == 0) throw Error(ErrorCode::InvalidConfig, "parallelism must be positive");
        if (term_top_k == 0) throw Error(ErrorCode::InvalidConfig, "term_top_k must be positive");
        params.validate();
    }
};

/// One evaluated (record, strategy, model) cell.
struct TranscriptEntry {
    std::string record_id;
    std::string strategy;
    std::string model_id;
    std::string digest;
    nlohmann::json messages = nlohmann::json::array();
    std::string response_text;
    bool cached = false;
    std::uint32_t attempts = 0;
    std::uint64_t latency_ms = 0;
    std::string deterministic_control;
    PredictedLabel predicted;
    SeverityClass truth = SeverityClass::MinorOrNonInjury;
    std::optional<std::string> error;

    nlohmann::json to_json() const {
        nlohmann::json j = {{"record_id", record_id},
                            {"strategy", strategy},
                            {"model_id", model_id},
                            {"digest", digest},
                            {"messages", messages},
                            {"response_text", response_text},
                            {"cached", cached},
                            {"attempts", attempts},
                            {"latency_ms", latency_ms},
                            {"deterministic_control", deterministic_control},
                            {"predicted", crashsev::to_string(predicted)},
                            {"true_label", std::string(crashsev::to_string(truth))}};
        if (error) j["error"] = *error;
        return j;
    }

    static TranscriptEntry from_json(const nlohmann::json& j) {
        TranscriptEntry e;
        e.record_id = j.at("record_id").get<std::string>();
        e.strategy = j.at("strategy").get<std::string>();
        e.model_id = j.at("model_id").get<std::string>();
        e.digest = j.value("digest", "");
        e.messages = j.value("messages", nlohmann::json::array());
        e.response_text = j.at("response_text").get<std::string>();
        e.cached = j.value("cached", false);
        e.attempts = j.value("attempts", 0u);
        e.latency_ms = j.value("latency_ms", std::uint64_t{0});
        e.deterministic_control = j.value("deterministic_control", "");
        auto truth = parse_severity_class(j.at("true_label").get<std::string>());
        if (!truth) throw Error(ErrorCode::CorruptTranscript, "bad true_label for " + e.record_id);
        e.truth = *truth;
        if (auto p = j.value("predicted", std::string(kUnresolvedName)); p != kUnresolvedName) {
            auto c = parse_severity_class(p);
            if (!c) throw Error(ErrorCode::CorruptTranscript, "bad predicted label for " + e.record_id);
            e.predicted.label = c;
        }
        if (j.contains("error")) e.error = j["error"].get<std::string>();
        return e;
    }
};

/// Serialized appends to a JSON-lines file.
class TranscriptWriter {
public:
    explicit TranscriptWriter(const fs::path& path) : out_(path, std::ios::trunc) {
        if (!out_) throw Error(ErrorCode::Io, "cannot open transcript " + path.string());
    }

    void append(const TranscriptEntry& e) {
        std::lock_guard lock(mutex_);
        out_ << e.to_json().dump() << '\n';
        out_.flush();
    }

private:
    std::mutex mutex_;
    std::ofstream out_;
};

inline std::vector<TranscriptEntry> read_transcript(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::CorruptTranscript, "cannot open transcript " + path);
    std::vector<TranscriptEntry> entries;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.empty()) continue;
        try {
            entries.push_back(TranscriptEntry::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::CorruptTranscript, path + " line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::CorruptTranscript, path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return entries;
}

/// Calls fn(i) for i in [0, n) on at most `workers` threads.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
}

inline nlohmann::json sample_manifest(const Dataset& sample, std::uint64_t seed, std::size_t n_per_class) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : sample.records())
        records.push_back({{"record_id", r.record_id}, {"label", std::string(to_string(r.label))}});
    return {{"seed", seed}, {"n_per_class", n_per_class}, {"records", records}};
}

inline std::string safe_file_component(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    return s;
}

struct RunResult {
    std::vector<EvaluationReport> reports; // model-major, strategies in config order
    Dataset sample;
    std::vector<std::string> exemplar_ids;
    fs::path transcript_path;
};

inline Dataset load_dataset(const std::string& data_path, const std::optional<std::string>& schema_map_path,
                            const std::optional<nlohmann::json>& severity_mapping) {
    SchemaMap schema;
    if (schema_map_path) schema = SchemaMap::from_json(read_json_file(*schema_map_path));
    SeverityMapping mapping;
    if (severity_mapping) mapping = SeverityMapping::from_json(*severity_mapping);
    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open data file " + data_path);
    return parse_records(in, schema, mapping).checked();
}

inline nlohmann::json reports_json(const std::vector<EvaluationReport>& reports) {
    auto arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    return arr;
}

/// sample -> render -> prompt -> complete -> extract -> score -> report, for
/// every (model, strategy) cell over one shared stratified sample.
inline RunResult run(const ExperimentConfig& config, ChatBackend& backend,
                     LlmClient::Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    config.validate();
    const auto dataset = load_dataset(config.data_path, config.schema_map_path, config.severity_mapping);

    const NarrativeTemplate tpl = config.template_path ? parse_template(read_file(*config.template_path)) : default_template();
    const DisplayMappings mappings = config.display_map_path
                                         ? DisplayMappings::from_json(read_json_file(*config.display_map_path))
                                         : default_display_mappings();
    std::vector<KnowledgeFact> facts;
    if (config.knowledge_facts_path) facts = knowledge_facts_from_json(read_json_file(*config.knowledge_facts_path));
    auto narrate = [&](const CrashRecord& r) { return augment_with_knowledge(render_narrative(r, tpl, mappings), facts, r); };

    RunResult result;
    result.sample = stratified_sample(dataset, config.n_per_class, config.seed);
    const auto& sample = result.sample.records();

    std::vector<Exemplar> exemplars;
    const bool any_few = std::any_of(config.strategies.begin(), config.strategies.end(),
                                     [](const auto& s) { return s.shot == ShotMode::Few; });
    if (any_few) {
        std::set<std::string> exclude;
        for (const auto& r : sample) exclude.insert(r.record_id);
        for (const auto& r : select_exemplar_records(dataset, config.exemplar_seed, exclude)) {
            exemplars.push_back({narrate(r), r.label});
            result.exemplar_ids.push_back(r.record_id);
        }
    }

    std::vector<Narrative> narratives;
    narratives.reserve(sample.size());
    for (const auto& r : sample) narratives.push_back(narrate(r));

    fs::create_directories(config.output_dir);
    const fs::path out_dir(config.output_dir);
    {
        std::ofstream manifest(out_dir / "sample_manifest.json");
        manifest << sample_manifest(result.sample, config.seed, config.n_per_class).dump(2) << '\n';
    }

    std::optional<ResponseCache> cache;
    if (config.cache_path) {
        if (auto parent = fs::path(*config.cache_path).parent_path(); !parent.empty()) fs::create_directories(parent);
        cache.emplace(*config.cache_path);
    }
    LlmClient client(backend, config.retry, config.parallelism, std::move(sleeper));
    result.transcript_path = out_dir / "transcript.jsonl";
    TranscriptWriter transcript(result.transcript_path);

    for (const auto& model : config.models) {
        for (const auto& strategy : config.strategies) {
            const auto& cell_exemplars = strategy.shot == ShotMode::Few ? exemplars : std::vector<Exemplar>{};
            std::vector<TranscriptEntry> entries(sample.size());
            parallel_for(sample.size(), config.parallelism, [&](std::size_t i) {
                auto& e = entries[i];
                e.record_id = sample[i].record_id;
                e.strategy = strategy.name();
                e.model_id = model.model_id;
                e.truth = sample[i].label;
                e.deterministic_control = deterministic_control(model, config.params);
                try {
                    const auto prompt = assemble(strategy, narratives[i], cell_exemplars);
                    e.messages = messages_json(prompt);
                    e.digest = request_digest(model.model_id, prompt, effective_params(config.params, model));
                    const auto response = cache ? client.cached_complete(prompt, model, config.params, *cache)
                                                : client.complete(prompt, model, config.params);
                    e.response_text = response.text;
                    e.cached = response.cached;
                    e.attempts = response.attempts;
                    e.latency_ms = response.latency_ms;
                    e.predicted = extract_label(response.text, strategy.pe);
                } catch (const Error& err) {
                    e.error = err.what();
                    e.predicted = PredictedLabel::unresolved();
                }
            });

            std::vector<LabeledPair> pairs;
            std::vector<ScoredResponse> scored;
            for (const auto& e : entries) {
                transcript.append(e);
                pairs.emplace_back(e.truth, e.predicted);
                scored.push_back({e.response_text, e.truth, e.predicted});
            }
            result.reports.push_back(report(pairs, strategy, model.model_id));

            if (strategy.cot) {
                const auto tables = term_frequencies(scored);
                fs::create_directories(out_dir / "terms");
                for (auto c : kAllClasses) {
                    std::ofstream tsv(out_dir / "terms" /
                                      (safe_file_component(model.model_id) + "__" + strategy.name() + "__" +
                                       std::string(to_string(c)) + ".tsv"));
                    tsv << emit_table(tables[index_of(c)], config.term_top_k);
                }
            }
        }
    }

    std::ofstream(out_dir / "reports.json") << reports_json(result.reports).dump(2) << '\n';
    std::ofstream(out_dir / "summary.md") << markdown_table(result.reports);
    return result;
}

/// Re-extracts labels from stored responses and recomputes every report
/// offline. pe_override forces the label set per strategy name.
inline std::vector<EvaluationReport> rescore(const std::vector<TranscriptEntry>& entries,
                                             const std::map<std::string, bool>& pe_override = {}) {
    std::vector<std::pair<std::string, std::string>> order; // (model, strategy) first-seen order
    std::map<std::pair<std::string, std::string>, std::vector<LabeledPair>> cells;
    for (const auto& e : entries) {
        PromptStrategy strategy;
        try {
            strategy = parse_strategy(e.strategy);
        } catch (const Error&) {
            throw Error(ErrorCode::CorruptTranscript, "unknown strategy " + e.strategy);
        }
        auto it = pe_override.find(e.strategy);
        const bool pe = it != pe_override.end() ? it->second : strategy.pe;
        auto key = std::make_pair(e.model_id, e.strategy);
        if (!cells.count(key)) order.push_back(key);
        cells[key].emplace_back(e.truth, e.error ? PredictedLabel::unresolved() : extract_label(e.response_text, pe));
    }
    std::vector<EvaluationReport> reports;
    for (const auto& key : order) reports.push_back(report(cells[key], parse_strategy(key.second), key.first));
    return reports;
}

inline std::vector<EvaluationReport> rescore(const std::string& transcript_path,
                                             const std::map<std::string, bool>& pe_override = {}) {
    return rescore(read_transcript(transcript_path), pe_override);
}

} // namespace crashsev
