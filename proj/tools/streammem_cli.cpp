#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "streammem/config.hpp"
#include "streammem/error.hpp"
#include "streammem/orchestrator.hpp"
#include "streammem/report.hpp"
#include "streammem/workloads.hpp"

namespace fs = std::filesystem;
using namespace streammem;

namespace {

constexpr int kOk = 0;
constexpr int kIo = 1;
constexpr int kInvalid = 2;
constexpr int kAborted = 3;

std::mutex out_mu;

void say(std::ostream& os, const std::string& line) {
    std::lock_guard lock(out_mu);
    os << line << std::endl;
}

bool has_results(const fs::path& dir) {
    for (const char* f : {"checkpoints.jsonl", "queries.jsonl", "actions.jsonl", "summary.json"}) {
        if (fs::exists(dir / f)) return true;
    }
    return false;
}

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::ConfigError:
        case ErrorCode::ValidationError:
        case ErrorCode::SchemaError:
        case ErrorCode::MissingTimestamp:
        case ErrorCode::DanglingEvidence:
        case ErrorCode::InvalidGap:
        case ErrorCode::IoError: return kInvalid;
        default: return kAborted;
    }
}

int run_one(const RunSpec& run, bool force) {
    const std::string& name = run.experiment.name;
    LoadedDataset data;
    try {
        data = load_dataset(run.dataset);
    } catch (const Error& e) {
        say(std::cerr, name + ": dataset: " + e.what());
        return kInvalid;
    }
    ExperimentResult result;
    try {
        auto backend = make_backend(run.gateway, run.experiment);
        result = run_experiment(run.experiment, data.stream, backend);
    } catch (const Error& e) {
        say(std::cerr, name + ": " + e.what());
        return exit_code_for(e);
    }
    try {
        write_results(run.output_dir, run.experiment, result, {force});
        if (!data.answer_key.empty()) {
            std::ofstream key(run.output_dir / "answer_key.jsonl", std::ios::binary | std::ios::trunc);
            write_answer_key(key, data.answer_key);
        }
    } catch (const Error& e) {
        say(std::cerr, name + ": " + e.what());
        return kInvalid;
    }
    if (result.aborted) {
        say(std::cerr, name + ": aborted: " + result.abort_reason + " (partial results in " + run.output_dir.string() + ")");
        return kAborted;
    }
    const auto mean = overall_mean_f1(result.reports);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", mean.value_or(0.0));
    say(std::cout, name + ": " + std::to_string(result.reports.size()) + " checkpoints, mean F1 " +
                       (mean ? std::string(buf) : std::string("n/a")) + " -> " + run.output_dir.string());
    return kOk;
}

int cmd_run(const std::string& config, const std::vector<std::string>& overrides, int jobs, bool force) {
    std::vector<RunSpec> runs;
    try {
        runs = load_config(config, overrides);
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return e.code() == ErrorCode::IoError ? kIo : kInvalid;
    }
    if (!force) {
        for (const auto& r : runs) {
            if (has_results(r.output_dir)) {
                std::cerr << config << ": output_dir " << r.output_dir.string()
                          << " already holds results; pass --force to overwrite\n";
                return kInvalid;
            }
        }
    }
    std::atomic<std::size_t> next{0};
    std::atomic<int> worst{kOk};
    auto worker = [&] {
        for (std::size_t i = next++; i < runs.size(); i = next++) {
            const int rc = run_one(runs[i], force);
            int prev = worst.load();
            while (rc > prev && !worst.compare_exchange_weak(prev, rc)) {
            }
        }
    };
    const auto n = static_cast<std::size_t>(std::max(1, jobs));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < std::min(n, runs.size()); ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return worst.load();
}

int cmd_validate(const std::string& path, const std::string& format) {
    StreamManifest m;
    try {
        if (format == "locomo") {
            m = load_locomo(path);
        } else {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
            m = read_stream(in, path);
        }
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return e.code() == ErrorCode::IoError ? kIo : kInvalid;
    }
    const auto report = validate_stream(m);
    for (const auto& v : report.violations) {
        std::cout << "request " << v.index << ": " << to_string(v.kind) << ": " << v.detail << '\n';
    }
    std::cout << path << ": " << m.inserts << " inserts, " << m.retrieves << " retrieves, "
              << report.violations.size() << " violation(s)\n";
    return report.ok() ? kOk : kInvalid;
}

int cmd_report(const std::string& dir, const std::string& format, const std::string& out_path) {
    try {
        const auto text = render_report(dir, format == "md" ? ReportFormat::Markdown : ReportFormat::Csv);
        if (out_path.empty()) {
            std::cout << text;
        } else {
            std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorCode::IoError, "cannot write " + out_path);
            out << text;
        }
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return e.code() == ErrorCode::IoError ? kIo : kInvalid;
    }
    return kOk;
}

int cmd_synth(const SyntheticSpec& spec, const std::string& out_path, std::string key_path) {
    SyntheticWorkload w;
    try {
        w = synth_workload(spec);
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return kInvalid;
    }
    if (key_path.empty()) key_path = fs::path(out_path).replace_extension(".answers.jsonl").string();
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    std::ofstream key(key_path, std::ios::binary | std::ios::trunc);
    if (!out || !key) {
        std::cerr << "cannot write " << (!out ? out_path : key_path) << '\n';
        return kIo;
    }
    write_stream(out, w.stream);
    write_answer_key(key, w.answer_key);
    std::cout << out_path << ": " << w.stream.inserts << " inserts, " << w.stream.retrieves << " retrieves; answer key "
              << key_path << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming memory benchmark harness"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment or an ablation grid");
    std::string config;
    std::vector<std::string> overrides;
    int jobs = 1;
    bool force = false;
    run->add_option("-c,--config", config, "Experiment YAML file")->required();
    run->add_option("--set", overrides, "Override a dotted key, e.g. store.backend=fifo_queue");
    run->add_option("--jobs", jobs, "Grid members run in parallel")->check(CLI::PositiveNumber);
    run->add_flag("--force", force, "Overwrite existing result files");

    auto* validate = app.add_subcommand("validate", "Check a stream file");
    std::string stream_path;
    std::string stream_format = "stream";
    validate->add_option("path", stream_path, "Stream file")->required();
    validate->add_option("--format", stream_format, "Input format")->check(CLI::IsMember({"stream", "locomo"}));

    auto* report = app.add_subcommand("report", "Tabulate result directories");
    std::string report_dir;
    std::string report_format = "csv";
    std::string report_out;
    report->add_option("dir", report_dir, "Result directory or grid root")->required();
    report->add_option("--format", report_format, "Output format")->check(CLI::IsMember({"csv", "md"}));
    report->add_option("-o,--out", report_out, "Write to a file instead of stdout");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic fact-update stream");
    SyntheticSpec spec;
    std::string synth_out;
    std::string synth_key;
    synth->add_option("--seed", spec.seed, "Generator seed");
    synth->add_option("--facts", spec.n_facts, "Distinct facts");
    synth->add_option("--update-rate", spec.update_rate, "Share of facts overwritten later");
    synth->add_option("--sessions", spec.n_sessions, "Sessions");
    synth->add_option("--turns", spec.turns_per_session, "Turns per session");
    synth->add_option("--needle-depths", spec.needle_depths, "Insert distances for needle queries")->delimiter(',');
    synth->add_option("--needles-per-depth", spec.needles_per_depth, "Needles per depth");
    synth->add_option("--paraphrase-rate", spec.paraphrase_rate, "Share of needles phrased with synonyms");
    synth->add_option("--rounds", spec.rounds, "Query rounds");
    synth->add_option("--queries-per-round", spec.queries_per_round, "Queries per round");
    synth->add_option("--out", synth_out, "Stream file to write")->required();
    synth->add_option("--key", synth_key, "Answer key file (default <out>.answers.jsonl)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kInvalid;
    }

    if (run->parsed()) return cmd_run(config, overrides, jobs, force);
    if (validate->parsed()) return cmd_validate(stream_path, stream_format);
    if (report->parsed()) return cmd_report(report_dir, report_format, report_out);
    if (synth->parsed()) return cmd_synth(spec, synth_out, synth_key);
    return kInvalid;
}
