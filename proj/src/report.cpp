#include "streammem/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "streammem/error.hpp"
#include "streammem/metrics.hpp"

namespace streammem {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct RunRow {
    std::string name;
    std::vector<std::optional<double>> rounds;
    std::optional<double> mean;
    std::optional<double> degradation;
    ojson latency;
};

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFiles, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool has_results(const fs::path& dir) {
    return fs::is_regular_file(dir / "checkpoints.jsonl") && fs::is_regular_file(dir / "summary.json");
}

RunRow load_run(const fs::path& dir, const std::string& fallback_name) {
    RunRow row;
    ojson summary;
    try {
        summary = ojson::parse(read_all(dir / "summary.json"));
        row.name = summary.at("config").value("name", fallback_name);
        row.latency = summary.at("wall_clock").at("latency");
        std::istringstream lines(read_all(dir / "checkpoints.jsonl"));
        std::string line;
        std::vector<double> present;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            const auto j = ojson::parse(line);
            const auto& m = j.at("mean_f1");
            if (m.is_null()) {
                row.rounds.emplace_back();
            } else {
                row.rounds.emplace_back(m.get<double>());
                present.push_back(m.get<double>());
            }
        }
        if (!summary.at("mean_f1").is_null()) row.mean = summary.at("mean_f1").get<double>();
        if (present.size() >= 2 && present.front() > 0.0) row.degradation = metrics::degradation(present);
    } catch (const ojson::exception& e) {
        throw Error(ErrorCode::SchemaError, dir.string() + ": " + e.what());
    }
    return row;
}

std::string fmt(const std::optional<double>& v, const char* spec) {
    if (!v) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, *v);
    return buf;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string md_cell(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += '\\';
        out += c;
    }
    return out;
}

void emit_row(std::ostringstream& out, const std::vector<std::string>& cells, ReportFormat format) {
    if (format == ReportFormat::Csv) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_cell(cells[i]);
        out << '\n';
    } else {
        out << '|';
        for (const auto& c : cells) out << ' ' << md_cell(c) << " |";
        out << '\n';
    }
}

void emit_table(std::ostringstream& out, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows, ReportFormat format) {
    emit_row(out, header, format);
    if (format == ReportFormat::Markdown) {
        out << '|';
        for (std::size_t i = 0; i < header.size(); ++i) out << (i == 0 ? " --- |" : " ---: |");
        out << '\n';
    }
    for (const auto& r : rows) emit_row(out, r, format);
}

}  // namespace

std::string render_report(const fs::path& dir, ReportFormat format) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFiles, dir.string() + " is not a directory");
    std::vector<RunRow> runs;
    if (has_results(dir)) {
        runs.push_back(load_run(dir, dir.filename().string()));
    } else {
        std::vector<fs::path> subdirs;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_directory() && has_results(e.path())) subdirs.push_back(e.path());
        }
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto& d : subdirs) runs.push_back(load_run(d, d.filename().string()));
    }
    if (runs.empty()) {
        throw Error(ErrorCode::MissingFiles, dir.string() + " holds no checkpoints.jsonl + summary.json");
    }

    std::size_t n_rounds = 0;
    for (const auto& r : runs) n_rounds = std::max(n_rounds, r.rounds.size());

    std::ostringstream out;
    std::vector<std::string> header = {"run"};
    for (std::size_t i = 1; i <= n_rounds; ++i) header.push_back("R" + std::to_string(i));
    header.push_back("Mean");
    header.push_back("Degradation");
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : runs) {
        std::vector<std::string> cells = {r.name};
        for (std::size_t i = 0; i < n_rounds; ++i) cells.push_back(i < r.rounds.size() ? fmt(r.rounds[i], "%.4f") : "");
        cells.push_back(fmt(r.mean, "%.4f"));
        cells.push_back(r.degradation ? fmt(r.degradation, "%.1f") + "%" : "");
        rows.push_back(std::move(cells));
    }
    if (format == ReportFormat::Markdown) out << "## Token F1 per round\n\n";
    emit_table(out, header, rows, format);

    out << '\n';
    if (format == ReportFormat::Markdown) out << "## Stage latency (us)\n\n";
    rows.clear();
    for (const auto& r : runs) {
        for (const auto& [stage, v] : r.latency.items()) {
            rows.push_back({r.name, stage, fmt(v.value("mean_us", 0.0), "%.1f"), fmt(v.value("p50_us", 0.0), "%.1f"),
                            fmt(v.value("p95_us", 0.0), "%.1f"), std::to_string(v.value("count", 0))});
        }
    }
    emit_table(out, {"run", "stage", "mean_us", "p50_us", "p95_us", "count"}, rows, format);
    return out.str();
}

}  // namespace streammem
