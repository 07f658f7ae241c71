#ifndef XCM_REPORT_HPP
#define XCM_REPORT_HPP

#include <optional>
#include <string>
#include <vector>

namespace xcm {

// Datasets x classifiers accuracy matrix, fractions in [0,1]. A blank entry
// marks a classifier that produced no result on that dataset (e.g. ran out
// of memory in the published benchmark).
struct ResultsTable {
    std::vector<std::string> datasets;
    std::vector<std::string> classifiers;
    std::vector<std::vector<std::optional<double>>> accuracy;  // [dataset][classifier]

    void validate() const;
};

enum class TiePolicy {
    Min,   // tied classifiers all take the best position of the tie group
    Mean,  // tied classifiers take the mean of the tied positions
};

// Per-classifier mean rank (rank 1 = best accuracy per dataset). Blanks get
// the worst rank (the classifier count). Min ties reproduce the published
// UEA benchmark aggregation; Mean is the fractional-ranking alternative.
std::vector<double> average_rank(const ResultsTable& table, TiePolicy ties = TiePolicy::Min);

// Number of datasets on which each classifier attains the maximum accuracy;
// shared maxima credit every tied classifier, blanks never win.
std::vector<long> wins_ties(const ResultsTable& table);

// CSV with a header row of classifier names, dataset names in the first
// column, empty cells = blanks. `percent` divides values by 100 on load.
ResultsTable load_results_csv(const std::string& path, bool percent = false);
void save_results_csv(const ResultsTable& table, const std::string& path);

}  // namespace xcm

#endif
