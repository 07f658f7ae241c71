#ifndef XCM_TRAIN_HPP
#define XCM_TRAIN_HPP

#include <string>
#include <vector>

#include "xcm/adam.hpp"
#include "xcm/dataset.hpp"
#include "xcm/model.hpp"

namespace xcm {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 0;
    bool shuffle_each_epoch = true;
    AdamConfig adam;
};

struct TrainResult {
    std::vector<double> epoch_loss;  // mean per-sample training objective
    long steps = 0;
};

// 100-epoch style protocol: shuffled mini-batches, categorical cross entropy
// (+ any l2 penalties), Adam. The final partial batch is trained on, not
// dropped. Aborts with a diagnostic if the loss goes non-finite.
TrainResult train(Model& model, const MTSDataset& train_set, const TrainConfig& config);

struct MetricsReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> precision;  // per class; 0/0 defined as 0
    std::vector<double> recall;
    std::vector<std::vector<long>> confusion;  // [true][predicted]
    int n = 0;
};

MetricsReport evaluate(Model& model, const MTSDataset& test_set);

struct GridSpec {
    std::vector<int> batch_sizes = {1, 8, 32};
    std::vector<double> window_pcts = {0.2, 0.4, 0.6, 0.8, 1.0};
    int k_folds = 5;
};

struct CvRow {
    int batch_size;
    double window_pct;
    int fold;
    double val_accuracy;
};

struct GridSearchResult {
    int best_batch_size = 0;
    double best_window_pct = 0.0;
    double best_mean_accuracy = 0.0;
    std::vector<CvRow> table;  // one row per (cell, fold)
};

// Stratified k-fold cross validation over the (batch size, window) grid.
// Winner = best mean validation accuracy; ties break toward the larger batch
// size, then the smaller window. Cells x folds run independently with seeds
// derived from (seed, cell, fold), so results are identical for any thread
// count.
GridSearchResult grid_search(const ModelSpec& spec_template, const MTSDataset& train_set,
                             const GridSpec& grid, const TrainConfig& config, std::uint64_t seed,
                             int threads = 1);

void write_cv_table_csv(const std::vector<CvRow>& table, const std::string& path);

}  // namespace xcm

#endif
