#pragma once

#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsrl {

/// One evaluation point for one agent.
struct MetricsRow {
    int epoch = 0;
    int agent_id = 0;
    double avg_score = 0;
    std::optional<double> pct_positive; // empty when nothing was encountered
    long encountered = 0;

    friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// Positive collections as a percentage of everything collected. The score
/// can hide competence (ten crosses and nine circles net the same score as a
/// single cross); this metric does not.
inline double percent_positive(long positives, long negatives) {
    if (positives < 0 || negatives < 0)
        throw std::invalid_argument("percent_positive: negative counts");
    if (positives + negatives < 1)
        throw std::invalid_argument("percent_positive: nothing encountered");
    return 100.0 * static_cast<double>(positives) /
           static_cast<double>(positives + negatives);
}

inline constexpr const char* kMetricsHeader = "epoch,agent_id,avg_score,pct_positive,encountered";

inline void write_metrics_row(std::ostream& out, const MetricsRow& row) {
    std::ostringstream line; // local stream so caller precision is untouched
    line << std::setprecision(17);
    line << row.epoch << ',' << row.agent_id << ',' << row.avg_score << ',';
    if (row.pct_positive) line << *row.pct_positive;
    line << ',' << row.encountered << '\n';
    out << line.str();
}

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << kMetricsHeader << "\n";
    for (const auto& row : rows) write_metrics_row(out, row);
}

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    write_metrics_csv(out, rows);
}

inline std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw std::runtime_error("read_metrics_csv: missing or wrong header");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        // a trailing empty field is not returned by getline; pad for it
        while (fields.size() < 5) fields.push_back("");
        if (fields.size() != 5)
            throw std::runtime_error("read_metrics_csv: bad row '" + line + "'");
        MetricsRow row;
        try {
            row.epoch = std::stoi(fields[0]);
            row.agent_id = std::stoi(fields[1]);
            row.avg_score = std::stod(fields[2]);
            if (!fields[3].empty()) row.pct_positive = std::stod(fields[3]);
            row.encountered = std::stol(fields[4]);
        } catch (const std::exception&) {
            throw std::runtime_error("read_metrics_csv: bad row '" + line + "'");
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_metrics_csv: cannot open " + path);
    return read_metrics_csv(in);
}

} // namespace dsrl
