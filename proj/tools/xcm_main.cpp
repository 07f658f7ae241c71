// Command-line front end: reproducible dataset generation, training,
// evaluation, attribution, grid search, and result aggregation. All
// randomness flows from --seed; with --threads 1 every output file is
// byte-identical across reruns.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "xcm/dataset.hpp"
#include "xcm/gradcam.hpp"
#include "xcm/manifest.hpp"
#include "xcm/model.hpp"
#include "xcm/report.hpp"
#include "xcm/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalFlags {
    std::uint64_t seed = 42;
    std::string out = ".";
    int threads = 1;
};

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write: " + path);
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string fmt(double v, const char* spec = "%.10g") {
    char buf[40];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

// Regions sidecar for synthetic data: one row per planted region.
void write_regions_csv(const std::string& path, const xcm::MTSDataset& train,
                       const xcm::MTSDataset& test) {
    std::string csv = "split,index,dim,t_start,t_end\n";
    auto add = [&csv](const char* split, const xcm::MTSDataset& ds) {
        for (int i = 0; i < ds.size(); ++i)
            if (!ds.regions.empty() && ds.regions[i].has_value()) {
                const auto& r = *ds.regions[i];
                csv += std::string(split) + "," + std::to_string(i) + "," + std::to_string(r.dim) +
                       "," + std::to_string(r.t_start) + "," + std::to_string(r.t_end) + "\n";
            }
    };
    add("train", train);
    add("test", test);
    write_text(path, csv);
}

void load_regions_csv(const std::string& path, const std::string& split, xcm::MTSDataset& ds) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open regions csv: " + path);
    ds.regions.assign(ds.samples.size(), std::nullopt);
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (first || line.empty()) {
            first = false;
            continue;
        }
        std::string s;
        int index, dim, t0, t1;
        char sep;
        std::istringstream ls(line);
        std::getline(ls, s, ',');
        ls >> index >> sep >> dim >> sep >> t0 >> sep >> t1;
        if (s == split && index >= 0 && index < ds.size())
            ds.regions[index] = xcm::GroundTruthRegion{dim, t0, t1};
    }
}

int cmd_synth(const GlobalFlags& g, int n_per_class, int length, double noise) {
    xcm::SyntheticParams params;
    params.n_per_class = n_per_class;
    params.length = length;
    params.noise_sigma = noise;
    params.pulse_start = static_cast<int>(std::lround(0.6 * length));
    params.pulse_end = static_cast<int>(std::lround(0.8 * length));
    xcm::MTSDataset full = xcm::generate_synthetic(params, g.seed);

    // 50/50 stratified split.
    const xcm::FoldAssignment halves =
        xcm::stratified_folds(full, 2, xcm::Rng::derive(g.seed, 0x5b117ULL));
    xcm::MTSDataset train = full.subset(halves.fold_indices(0));
    xcm::MTSDataset test = full.subset(halves.fold_indices(1));
    train.name = "synthetic";
    test.name = "synthetic";

    fs::create_directories(g.out);
    xcm::save_ts_file(train, join_path(g.out, "synthetic_TRAIN.ts"));
    xcm::save_ts_file(test, join_path(g.out, "synthetic_TEST.ts"));
    write_regions_csv(join_path(g.out, "synthetic_regions.csv"), train, test);

    xcm::RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = g.seed;
    manifest.threads = g.threads;
    manifest.params = {{"n_per_class", std::to_string(n_per_class)},
                       {"length", std::to_string(length)},
                       {"noise", fmt(noise)}};
    manifest.metrics = {{"train_samples", static_cast<double>(train.size())},
                        {"test_samples", static_cast<double>(test.size())}};
    manifest.outputs = {"synthetic_TRAIN.ts", "synthetic_TEST.ts", "synthetic_regions.csv"};
    xcm::persist_run(manifest, g.out);
    std::cout << "wrote " << train.size() << " train / " << test.size() << " test samples to "
              << g.out << "\n";
    return 0;
}

int cmd_train(const GlobalFlags& g, const std::string& arch, const std::string& train_path,
              int batch, double window_pct, int epochs) {
    xcm::MTSDataset train_set = xcm::load_ts_file(train_path);

    xcm::ModelSpec spec;
    spec.architecture = xcm::architecture_from_name(arch);
    spec.input_t = train_set.length();
    spec.input_d = train_set.dims();
    spec.classes = train_set.n_classes();
    spec.window_pct = window_pct;
    xcm::Model model = xcm::Model::build(spec, g.seed);

    xcm::TrainConfig config;
    config.epochs = epochs;
    config.batch_size = batch;
    config.seed = g.seed;
    const xcm::TrainResult result = xcm::train(model, train_set, config);

    fs::create_directories(g.out);
    const std::string ckpt = join_path(g.out, "model.ckpt");
    model.save(ckpt, train_set.class_names);

    std::string curve = "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
        curve += std::to_string(e) + "," + fmt(result.epoch_loss[e], "%.17g") + "\n";
    write_text(join_path(g.out, "loss_curve.csv"), curve);

    const xcm::MetricsReport train_metrics = xcm::evaluate(model, train_set);

    xcm::RunManifest manifest;
    manifest.command = "train";
    manifest.seed = g.seed;
    manifest.threads = g.threads;
    manifest.params = {{"arch", arch},
                       {"train", train_path},
                       {"batch", std::to_string(batch)},
                       {"window_pct", fmt(window_pct)},
                       {"epochs", std::to_string(epochs)},
                       {"parameters", std::to_string(model.count_parameters())},
                       {"retrained_on_full_training_set", "true"}};
    manifest.metrics = {{"final_loss", result.epoch_loss.back()},
                        {"train_accuracy", train_metrics.accuracy},
                        {"optimizer_steps", static_cast<double>(result.steps)}};
    manifest.outputs = {"model.ckpt", "loss_curve.csv"};
    xcm::persist_run(manifest, g.out);
    std::cout << "trained " << arch << " (" << model.count_parameters() << " parameters), final loss "
              << result.epoch_loss.back() << ", train accuracy " << train_metrics.accuracy << "\n";
    return 0;
}

int cmd_eval(const GlobalFlags& g, const std::string& ckpt_path, const std::string& test_path) {
    std::vector<std::string> class_names;
    xcm::Model model = xcm::Model::load(ckpt_path, &class_names);
    const xcm::MTSDataset test_set = xcm::load_ts_file(test_path);
    const xcm::MetricsReport m = xcm::evaluate(model, test_set);

    fs::create_directories(g.out);
    json doc;
    doc["accuracy"] = m.accuracy;
    doc["macro_f1"] = m.macro_f1;
    doc["n"] = m.n;
    doc["precision"] = m.precision;
    doc["recall"] = m.recall;
    write_text(join_path(g.out, "metrics.json"), doc.dump(2) + "\n");

    std::string csv;
    for (std::size_t r = 0; r < m.confusion.size(); ++r) {
        for (std::size_t c = 0; c < m.confusion[r].size(); ++c) {
            if (c) csv += ",";
            csv += std::to_string(m.confusion[r][c]);
        }
        csv += "\n";
    }
    write_text(join_path(g.out, "confusion.csv"), csv);

    xcm::RunManifest manifest;
    manifest.command = "eval";
    manifest.seed = g.seed;
    manifest.threads = g.threads;
    manifest.params = {{"checkpoint", ckpt_path}, {"test", test_path}};
    manifest.metrics = {{"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}};
    manifest.outputs = {"metrics.json", "confusion.csv"};
    xcm::persist_run(manifest, g.out);
    std::cout << "accuracy " << m.accuracy << ", macro-F1 " << m.macro_f1 << " on " << m.n
              << " samples\n";
    return 0;
}

int cmd_explain(const GlobalFlags& g, const std::string& ckpt_path, const std::string& data_path,
                int index, const std::string& cls, double threshold,
                const std::string& regions_path, const std::string& regions_split) {
    std::vector<std::string> class_names;
    xcm::Model model = xcm::Model::load(ckpt_path, &class_names);
    xcm::MTSDataset ds = xcm::load_ts_file(data_path);
    if (index < 0 || index >= ds.size())
        throw std::runtime_error("explain: sample index " + std::to_string(index) +
                                 " out of range (dataset has " + std::to_string(ds.size()) +
                                 " samples)");
    if (!regions_path.empty()) load_regions_csv(regions_path, regions_split, ds);

    const xcm::Tensor& sample = ds.samples[index];
    int target;
    if (cls == "auto") {
        target = model.predict_sample(sample).labels[0];
    } else {
        target = std::stoi(cls);
    }

    const int T = model.spec().input_t, D = model.spec().input_d;
    xcm::AttributionMap vars_map, time_map;
    if (model.spec().architecture == xcm::Architecture::MTEXCNN) {
        vars_map = xcm::gradcam_generic(model, xcm::kTapVariables, sample, target, T, D);
        time_map = xcm::gradcam_generic(model, xcm::kTapTime, sample, target, T, D);
        time_map.kind = xcm::MapKind::Time;
    } else {
        vars_map = xcm::gradcam_variables(model, sample, target);
        time_map = xcm::gradcam_time(model, sample, target);
    }

    fs::create_directories(g.out);
    xcm::write_attribution_csv(vars_map, join_path(g.out, "attribution_variables.csv"));
    xcm::write_attribution_csv(time_map, join_path(g.out, "attribution_time.csv"));
    xcm::write_attribution_ppm(vars_map, join_path(g.out, "attribution_variables.ppm"));
    xcm::write_attribution_ppm(time_map, join_path(g.out, "attribution_time.ppm"));

    xcm::RunManifest manifest;
    manifest.command = "explain";
    manifest.seed = g.seed;
    manifest.threads = g.threads;
    manifest.params = {{"checkpoint", ckpt_path}, {"data", data_path},
                       {"index", std::to_string(index)}, {"class", cls},
                       {"threshold", fmt(threshold)}};
    manifest.metrics = {{"target_class", static_cast<double>(target)}};
    manifest.outputs = {"attribution_variables.csv", "attribution_time.csv",
                        "attribution_variables.ppm", "attribution_time.ppm"};

    if (!ds.regions.empty() && ds.regions[index].has_value()) {
        const xcm::GroundTruthRegion& truth = *ds.regions[index];
        const double iou_time =
            xcm::iou(xcm::threshold_mask(time_map, threshold), truth, xcm::IouScope::TimeOnly);
        const double iou_cells =
            xcm::iou(xcm::threshold_mask(vars_map, threshold), truth, xcm::IouScope::Cells);
        json doc;
        doc["threshold"] = threshold;
        doc["time_map_iou_time_only"] = iou_time;
        doc["variables_map_iou_cells"] = iou_cells;
        write_text(join_path(g.out, "iou.json"), doc.dump(2) + "\n");
        manifest.metrics["time_map_iou_time_only"] = iou_time;
        manifest.metrics["variables_map_iou_cells"] = iou_cells;
        manifest.outputs.push_back("iou.json");
        std::cout << "time-map IoU (time axis) " << iou_time << ", variables-map IoU (cells) "
                  << iou_cells << "\n";
    }
    xcm::persist_run(manifest, g.out);
    std::cout << "explained sample " << index << " for class " << target << " -> " << g.out << "\n";
    return 0;
}

int cmd_gridsearch(const GlobalFlags& g, const std::string& arch, const std::string& train_path,
                   std::vector<int> batches, std::vector<double> windows, int epochs, int folds) {
    const xcm::MTSDataset train_set = xcm::load_ts_file(train_path);

    xcm::ModelSpec spec;
    spec.architecture = xcm::architecture_from_name(arch);
    spec.input_t = train_set.length();
    spec.input_d = train_set.dims();
    spec.classes = train_set.n_classes();

    xcm::GridSpec grid;
    if (!batches.empty()) grid.batch_sizes = std::move(batches);
    if (!windows.empty()) grid.window_pcts = std::move(windows);
    grid.k_folds = folds;

    xcm::TrainConfig config;
    config.epochs = epochs;
    const xcm::GridSearchResult result =
        xcm::grid_search(spec, train_set, grid, config, g.seed, g.threads);

    fs::create_directories(g.out);
    xcm::write_cv_table_csv(result.table, join_path(g.out, "cv_table.csv"));

    xcm::RunManifest manifest;
    manifest.command = "gridsearch";
    manifest.seed = g.seed;
    manifest.threads = g.threads;
    manifest.params = {{"arch", arch},
                       {"train", train_path},
                       {"epochs", std::to_string(epochs)},
                       {"folds", std::to_string(folds)}};
    manifest.metrics = {{"best_batch_size", static_cast<double>(result.best_batch_size)},
                        {"best_window_pct", result.best_window_pct},
                        {"best_mean_accuracy", result.best_mean_accuracy}};
    manifest.outputs = {"cv_table.csv"};
    xcm::persist_run(manifest, g.out);
    std::cout << "winner: batch " << result.best_batch_size << ", window "
              << result.best_window_pct << " (mean CV accuracy " << result.best_mean_accuracy
              << ")\n";
    return 0;
}

int cmd_report(const GlobalFlags& g, const std::string& results_path, bool percent,
               const std::string& ties) {
    const xcm::ResultsTable table = xcm::load_results_csv(results_path, percent);
    const xcm::TiePolicy policy = ties == "mean" ? xcm::TiePolicy::Mean : xcm::TiePolicy::Min;
    const std::vector<double> ranks = xcm::average_rank(table, policy);
    const std::vector<long> wins = xcm::wins_ties(table);

    std::string csv = "classifier,average_rank,wins_ties\n";
    for (std::size_t c = 0; c < table.classifiers.size(); ++c)
        csv += table.classifiers[c] + "," + fmt(ranks[c]) + "," + std::to_string(wins[c]) + "\n";
    fs::create_directories(g.out);
    write_text(join_path(g.out, "ranks.csv"), csv);

    xcm::RunManifest manifest;
    manifest.command = "report";
    manifest.seed = g.seed;
    manifest.threads = g.threads;
    manifest.params = {{"results", results_path}, {"percent", percent ? "true" : "false"},
                       {"ties", ties}};
    manifest.outputs = {"ranks.csv"};
    xcm::persist_run(manifest, g.out);

    for (std::size_t c = 0; c < table.classifiers.size(); ++c)
        std::cout << table.classifiers[c] << ": average rank " << fmt(ranks[c]) << ", wins/ties "
                  << wins[c] << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"XCM multivariate time series classification and attribution"};
    app.require_subcommand(1);

    GlobalFlags g;
    app.add_option("--seed", g.seed, "Run seed; all randomness derives from it");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads for independent grid cells/folds")
        ->check(CLI::PositiveNumber);

    auto* synth = app.add_subcommand("synth", "Generate the synthetic square-pulse dataset");
    int n_per_class = 10, length = 100;
    double noise = 0.05;
    synth->add_option("--n-per-class", n_per_class, "Samples per class before the 50/50 split");
    synth->add_option("--length", length, "Series length");
    synth->add_option("--noise", noise, "Gaussian noise sigma");

    auto* train = app.add_subcommand("train", "Train a model on a .ts dataset");
    std::string arch = "xcm", train_path;
    int batch = 1, epochs = 100;
    double window_pct = 0.2;
    train->add_option("--arch", arch, "xcm | xcm-seq | mtex-cnn");
    train->add_option("--train", train_path, "Training .ts file")->required();
    train->add_option("--batch", batch, "Batch size");
    train->add_option("--window-pct", window_pct, "Time window size as a fraction of T");
    train->add_option("--epochs", epochs, "Training epochs");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a .ts dataset");
    std::string ckpt_path, test_path;
    eval->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
    eval->add_option("--test", test_path, "Test .ts file")->required();

    auto* explain = app.add_subcommand("explain", "Attribution maps for one sample");
    std::string data_path, cls = "auto", regions_path, regions_split = "test";
    int index = 0;
    double threshold = 0.6;
    explain->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
    explain->add_option("--data", data_path, ".ts file with the sample")->required();
    explain->add_option("--index", index, "Sample index")->required();
    explain->add_option("--class", cls, "Class id, or 'auto' for the predicted class");
    explain->add_option("--threshold", threshold, "Attribution mask threshold");
    explain->add_option("--regions", regions_path, "Ground-truth regions CSV for IoU scoring");
    explain->add_option("--regions-split", regions_split, "Split column to match in the regions CSV");

    auto* gridsearch = app.add_subcommand("gridsearch", "Stratified-CV hyperparameter grid search");
    std::vector<int> batches;
    std::vector<double> windows;
    int folds = 5;
    gridsearch->add_option("--arch", arch, "xcm | xcm-seq | mtex-cnn");
    gridsearch->add_option("--train", train_path, "Training .ts file")->required();
    gridsearch->add_option("--batches", batches, "Batch-size axis (default 1 8 32)");
    gridsearch->add_option("--windows", windows, "Window axis (default 0.2 0.4 0.6 0.8 1.0)");
    gridsearch->add_option("--epochs", epochs, "Epochs per cell");
    gridsearch->add_option("--folds", folds, "CV folds");

    auto* report = app.add_subcommand("report", "Average ranks and wins/ties from a results CSV");
    std::string results_path, ties = "min";
    bool percent = false;
    report->add_option("--results", results_path, "Accuracy CSV (datasets x classifiers)")
        ->required();
    report->add_flag("--percent", percent, "Values are percentages, divide by 100");
    report->add_option("--ties", ties, "Tie policy: min | mean")
        ->check(CLI::IsMember({"min", "mean"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(g, n_per_class, length, noise);
        if (train->parsed()) return cmd_train(g, arch, train_path, batch, window_pct, epochs);
        if (eval->parsed()) return cmd_eval(g, ckpt_path, test_path);
        if (explain->parsed())
            return cmd_explain(g, ckpt_path, data_path, index, cls, threshold, regions_path,
                               regions_split);
        if (gridsearch->parsed())
            return cmd_gridsearch(g, arch, train_path, batches, windows, epochs, folds);
        if (report->parsed()) return cmd_report(g, results_path, percent, ties);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
