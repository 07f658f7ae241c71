#include "xcm/train.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace xcm {

namespace {

// Stack dataset samples (already [D,T]) into a [B,D,T] batch.
Tensor make_batch(const MTSDataset& ds, const std::vector<int>& order, int begin, int end) {
    const int B = end - begin;
    Tensor batch({B, ds.dims(), ds.length()});
    const std::size_t stride = ds.samples[0].data.size();
    for (int i = 0; i < B; ++i)
        std::copy(ds.samples[order[begin + i]].data.begin(),
                  ds.samples[order[begin + i]].data.end(), batch.data.begin() + i * stride);
    return batch;
}

}  // namespace

TrainResult train(Model& model, const MTSDataset& train_set, const TrainConfig& config) {
    if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (config.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (train_set.size() == 0) throw std::invalid_argument("train: empty dataset");
    train_set.validate();
    if (train_set.dims() != model.spec().input_d || train_set.length() != model.spec().input_t)
        throw std::invalid_argument("train: dataset shape does not match the model spec");
    if (train_set.n_classes() > model.spec().classes)
        throw std::invalid_argument("train: dataset has more classes than the model");

    const int N = train_set.size();
    Rng rng(Rng::derive(config.seed, 0x7247ULL));
    std::vector<int> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    auto params = model.params();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle_each_epoch) rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int begin = 0, batch_idx = 0; begin < N; begin += config.batch_size, ++batch_idx) {
            const int end = std::min(begin + config.batch_size, N);
            const Tensor batch = make_batch(train_set, order, begin, end);
            std::vector<int> labels;
            for (int i = begin; i < end; ++i) labels.push_back(train_set.labels[order[i]]);

            Trace trace;
            const Tensor logits =
                model.forward(model.to_input(batch), Mode::Train, &rng, trace);
            const Tensor probs = softmax_rows(logits);
            const double loss = cross_entropy_loss(probs, labels, model.spec().classes) +
                                model.regularization_penalty();
            if (!std::isfinite(loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batch_idx));
            epoch_loss += loss * (end - begin);

            model.backward(softmax_xent_backward(probs, labels), trace,
                           /*accumulate_param_grads=*/true);
            model.add_regularization_gradients();
            adam_step(params, config.adam);
            ++result.steps;
        }
        result.epoch_loss.push_back(epoch_loss / N);
    }
    return result;
}

MetricsReport evaluate(Model& model, const MTSDataset& test_set) {
    if (test_set.size() == 0) throw std::invalid_argument("evaluate: empty test set");
    test_set.validate();
    const int C = model.spec().classes;

    MetricsReport report;
    report.n = test_set.size();
    report.confusion.assign(C, std::vector<long>(C, 0));

    // Batch in chunks to bound memory on larger sets.
    const int chunk = 64;
    std::vector<int> order(static_cast<std::size_t>(test_set.size()));
    std::iota(order.begin(), order.end(), 0);
    for (int begin = 0; begin < test_set.size(); begin += chunk) {
        const int end = std::min(begin + chunk, test_set.size());
        const Tensor batch = make_batch(test_set, order, begin, end);
        const Prediction pred = model.predict(batch);
        for (int i = 0; i < end - begin; ++i)
            report.confusion[test_set.labels[begin + i]][pred.labels[i]] += 1;
    }

    long correct = 0;
    for (int c = 0; c < C; ++c) correct += report.confusion[c][c];
    report.accuracy = static_cast<double>(correct) / report.n;

    report.precision.assign(C, 0.0);
    report.recall.assign(C, 0.0);
    double f1_sum = 0.0;
    for (int c = 0; c < C; ++c) {
        long tp = report.confusion[c][c], fp = 0, fn = 0;
        for (int o = 0; o < C; ++o) {
            if (o == c) continue;
            fp += report.confusion[o][c];
            fn += report.confusion[c][o];
        }
        report.precision[c] = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        report.recall[c] = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        const double p = report.precision[c], r = report.recall[c];
        f1_sum += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    report.macro_f1 = f1_sum / C;
    return report;
}

GridSearchResult grid_search(const ModelSpec& spec_template, const MTSDataset& train_set,
                             const GridSpec& grid, const TrainConfig& config, std::uint64_t seed,
                             int threads) {
    if (grid.batch_sizes.empty() || grid.window_pcts.empty())
        throw std::invalid_argument("grid_search: empty grid axis");
    if (grid.k_folds < 1) throw std::invalid_argument("grid_search: k_folds must be >= 1");
    const FoldAssignment folds = stratified_folds(train_set, grid.k_folds, Rng::derive(seed, 0xf01dULL));

    struct Job {
        int cell, fold, batch_size;
        double window_pct;
    };
    std::vector<Job> jobs;
    const int n_cells = static_cast<int>(grid.batch_sizes.size() * grid.window_pcts.size());
    for (int ci = 0; ci < n_cells; ++ci) {
        const int bi = ci / static_cast<int>(grid.window_pcts.size());
        const int wi = ci % static_cast<int>(grid.window_pcts.size());
        for (int f = 0; f < grid.k_folds; ++f)
            jobs.push_back({ci, f, grid.batch_sizes[bi], grid.window_pcts[wi]});
    }

    std::vector<double> accuracy(jobs.size(), 0.0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;

    auto worker = [&]() {
        while (true) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            try {
                const Job& job = jobs[j];
                const MTSDataset fit = train_set.subset(folds.complement_indices(job.fold));
                const MTSDataset val = train_set.subset(folds.fold_indices(job.fold));

                ModelSpec spec = spec_template;
                spec.window_pct = job.window_pct;
                const std::uint64_t job_seed =
                    Rng::derive(seed, static_cast<std::uint64_t>(job.cell) * 64 + job.fold);
                Model model = Model::build(spec, job_seed);

                TrainConfig cell_config = config;
                cell_config.batch_size = job.batch_size;
                cell_config.seed = job_seed;
                xcm::train(model, fit, cell_config);
                accuracy[j] = evaluate(model, val).accuracy;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };

    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    GridSearchResult result;
    std::vector<double> cell_mean(static_cast<std::size_t>(n_cells), 0.0);
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        result.table.push_back(
            {jobs[j].batch_size, jobs[j].window_pct, jobs[j].fold, accuracy[j]});
        cell_mean[static_cast<std::size_t>(jobs[j].cell)] += accuracy[j] / grid.k_folds;
    }

    int best = 0;
    for (int ci = 1; ci < n_cells; ++ci) {
        const auto key = [&](int c) {
            const int bi = c / static_cast<int>(grid.window_pcts.size());
            const int wi = c % static_cast<int>(grid.window_pcts.size());
            // max accuracy, then larger batch, then smaller window
            return std::make_tuple(cell_mean[static_cast<std::size_t>(c)], grid.batch_sizes[bi],
                                   -grid.window_pcts[wi]);
        };
        if (key(ci) > key(best)) best = ci;
    }
    result.best_batch_size = grid.batch_sizes[best / grid.window_pcts.size()];
    result.best_window_pct = grid.window_pcts[best % grid.window_pcts.size()];
    result.best_mean_accuracy = cell_mean[static_cast<std::size_t>(best)];
    return result;
}

void write_cv_table_csv(const std::vector<CvRow>& table, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write cv table: " + path);
    f << "batch_size,window_pct,fold,val_accuracy\n";
    char buf[64];
    for (const CvRow& row : table) {
        std::snprintf(buf, sizeof(buf), "%d,%g,%d,%.10g\n", row.batch_size, row.window_pct,
                      row.fold, row.val_accuracy);
        f << buf;
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace xcm
