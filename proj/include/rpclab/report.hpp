#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rpclab/agent.hpp"
#include "rpclab/evalharness.hpp"

namespace rpclab::cli {

// One report row: ordered (column, value) pairs so the CSV header is stable.
using ReportRow = std::vector<std::pair<std::string, nlohmann::json>>;

void write_jsonl(const std::string& path, const std::vector<ReportRow>& rows);
void write_csv(const std::string& path, const std::vector<ReportRow>& rows);
// Writes <base>.jsonl and <base>.csv.
void write_reports(const std::string& base_path, const std::vector<ReportRow>& rows);

void write_metrics_jsonl(const std::string& path, const std::vector<agent::TrainMetricsRow>& rows);

ReportRow eval_report_row(const evalh::EvalReport& r);

}  // namespace rpclab::cli
