#include "rpclab/report.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace rpclab::cli {

namespace {
std::ofstream open_out(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}
}  // namespace

void write_jsonl(const std::string& path, const std::vector<ReportRow>& rows) {
    auto out = open_out(path);
    for (const auto& row : rows) {
        nlohmann::ordered_json obj;
        for (const auto& [key, value] : row) obj[key] = value;
        out << obj.dump() << "\n";
    }
}

void write_csv(const std::string& path, const std::vector<ReportRow>& rows) {
    auto out = open_out(path);
    if (rows.empty()) return;
    for (size_t i = 0; i < rows.front().size(); ++i) {
        out << (i ? "," : "") << rows.front()[i].first;
    }
    out << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            const auto& v = row[i].second;
            out << (i ? "," : "");
            if (v.is_string()) {
                out << v.get<std::string>();
            } else {
                out << v.dump();
            }
        }
        out << "\n";
    }
}

void write_reports(const std::string& base_path, const std::vector<ReportRow>& rows) {
    write_jsonl(base_path + ".jsonl", rows);
    write_csv(base_path + ".csv", rows);
}

void write_metrics_jsonl(const std::string& path, const std::vector<agent::TrainMetricsRow>& rows) {
    auto out = open_out(path);
    for (const auto& r : rows) {
        nlohmann::ordered_json obj;
        obj["step"] = r.step;
        obj["episode_return"] = r.episode_return;
        obj["info_bits_per_step"] = r.info_bits_per_step;
        obj["lambda"] = r.lambda;
        obj["critic_loss"] = r.critic_loss;
        obj["actor_loss"] = r.actor_loss;
        obj["seed"] = r.seed;
        out << obj.dump() << "\n";
    }
}

ReportRow eval_report_row(const evalh::EvalReport& r) {
    ReportRow row;
    row.emplace_back("mode", r.mode);
    row.emplace_back("dropout_p", r.dropout_p);
    row.emplace_back("epsilon", r.epsilon);
    row.emplace_back("mass_scale", r.mass_scale);
    row.emplace_back("friction_scale", r.friction_scale);
    row.emplace_back("episodes", r.episodes);
    row.emplace_back("mean_return", r.mean_return);
    row.emplace_back("return_std", r.return_std);
    row.emplace_back("mean_info_bits", r.mean_info_bits);
    for (const auto& [k, v] : r.extra) row.emplace_back(k, v);
    return row;
}

}  // namespace rpclab::cli
