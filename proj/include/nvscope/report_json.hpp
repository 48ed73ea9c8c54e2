#pragma once

// JSON serialization of analysis reports. The layout is described by
// docs/report.schema.json; schema_version is bumped on incompatible changes.

#include <optional>
#include <string>
#include <vector>

#include "nvscope/analysis.hpp"

namespace nvscope {

inline constexpr int kReportSchemaVersion = 1;

struct ReportFailure {
    std::string stage;
    std::string kind;
    std::string message;
};

/// Pretty-printed (2-space) JSON. Non-finite numbers are written as null.
/// With a failure, "field" is null unless the estimate stage completed.
std::string report_to_json(const analysis::Report& report, const std::optional<ReportFailure>& failure = std::nullopt,
                           bool field_valid = true);

/// Fitted centers (c1, c2) recorded in a report document; empty when the
/// report has no usable fit.
std::vector<double> report_centers(const std::string& json_text);

}  // namespace nvscope
