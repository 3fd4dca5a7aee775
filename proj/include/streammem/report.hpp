#pragma once

#include <filesystem>
#include <string>

namespace streammem {

enum class ReportFormat { Csv, Markdown };

/// Round-wise F1 table (R1..Rn, Mean, Degradation) followed by a per-stage
/// latency table, for one result directory or every run directory below it.
/// Throws MissingFiles when no complete result set is found.
std::string render_report(const std::filesystem::path& dir, ReportFormat format);

}  // namespace streammem
