#include "xcm/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace xcm {

void ResultsTable::validate() const {
    if (classifiers.empty() || datasets.empty())
        throw std::invalid_argument("results table: empty");
    if (accuracy.size() != datasets.size())
        throw std::invalid_argument("results table: row count mismatch");
    for (std::size_t r = 0; r < accuracy.size(); ++r) {
        if (accuracy[r].size() != classifiers.size())
            throw std::invalid_argument("results table: column count mismatch on row " +
                                        datasets[r]);
        for (const auto& v : accuracy[r])
            if (v.has_value() && (*v < 0.0 || *v > 1.0))
                throw std::invalid_argument("results table: accuracy out of [0,1] on row " +
                                            datasets[r]);
    }
}

std::vector<double> average_rank(const ResultsTable& table, TiePolicy ties) {
    table.validate();
    const int k = static_cast<int>(table.classifiers.size());
    if (k < 2) throw std::invalid_argument("average_rank: needs at least 2 classifiers");

    std::vector<double> rank_sum(static_cast<std::size_t>(k), 0.0);
    for (const auto& row : table.accuracy) {
        std::vector<std::pair<double, int>> present;
        for (int c = 0; c < k; ++c)
            if (row[c].has_value()) present.emplace_back(*row[c], c);
        std::sort(present.begin(), present.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });

        std::size_t pos = 0;
        while (pos < present.size()) {
            std::size_t end = pos;
            while (end < present.size() && present[end].first == present[pos].first) ++end;
            const double rank = ties == TiePolicy::Min
                                    ? static_cast<double>(pos + 1)
                                    : (static_cast<double>(pos + 1) + static_cast<double>(end)) / 2.0;
            for (std::size_t i = pos; i < end; ++i)
                rank_sum[static_cast<std::size_t>(present[i].second)] += rank;
            pos = end;
        }
        // Blanks take the worst possible rank.
        for (int c = 0; c < k; ++c)
            if (!row[c].has_value()) rank_sum[static_cast<std::size_t>(c)] += k;
    }

    for (double& s : rank_sum) s /= static_cast<double>(table.datasets.size());
    return rank_sum;
}

std::vector<long> wins_ties(const ResultsTable& table) {
    table.validate();
    const int k = static_cast<int>(table.classifiers.size());
    std::vector<long> wins(static_cast<std::size_t>(k), 0);
    for (const auto& row : table.accuracy) {
        double best = -1.0;
        for (int c = 0; c < k; ++c)
            if (row[c].has_value()) best = std::max(best, *row[c]);
        if (best < 0.0) continue;
        for (int c = 0; c < k; ++c)
            if (row[c].has_value() && *row[c] == best) wins[static_cast<std::size_t>(c)] += 1;
    }
    return wins;
}

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}
}  // namespace

ResultsTable load_results_csv(const std::string& path, bool percent) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open results csv: " + path);
    ResultsTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (line_no == 1) {
            if (fields.size() < 2)
                throw std::runtime_error("results csv: header needs at least one classifier (" +
                                         path + ":1)");
            table.classifiers.assign(fields.begin() + 1, fields.end());
            continue;
        }
        if (fields.size() != table.classifiers.size() + 1)
            throw std::runtime_error("results csv: wrong field count at line " +
                                     std::to_string(line_no) + " of " + path);
        table.datasets.push_back(fields[0]);
        std::vector<std::optional<double>> row;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            if (fields[i].empty()) {
                row.push_back(std::nullopt);
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(fields[i].c_str(), &end);
            if (end == nullptr || *end != '\0')
                throw std::runtime_error("results csv: bad value '" + fields[i] + "' at line " +
                                         std::to_string(line_no) + " of " + path);
            row.push_back(percent ? v / 100.0 : v);
        }
        table.accuracy.push_back(std::move(row));
    }
    table.validate();
    return table;
}

void save_results_csv(const ResultsTable& table, const std::string& path) {
    table.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write results csv: " + path);
    f << "dataset";
    for (const std::string& c : table.classifiers) f << "," << c;
    f << "\n";
    char buf[40];
    for (std::size_t r = 0; r < table.datasets.size(); ++r) {
        f << table.datasets[r];
        for (const auto& v : table.accuracy[r]) {
            f << ",";
            if (v.has_value()) {
                std::snprintf(buf, sizeof(buf), "%.10g", *v);
                f << buf;
            }
        }
        f << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace xcm
