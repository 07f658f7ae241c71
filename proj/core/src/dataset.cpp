#include "xcm/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "xcm/rng.hpp"

namespace xcm {

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_value(const std::string& tok, const std::string& context) {
    const std::string t = trim(tok);
    if (t == "?" || t.empty())
        throw std::runtime_error("unsupported dataset feature: missing value in " + context);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == nullptr || *end != '\0')
        throw std::runtime_error("ts parse error: bad numeric value '" + t + "' in " + context);
    return v;
}

}  // namespace

void MTSDataset::validate() const {
    if (samples.size() != labels.size())
        throw std::invalid_argument("dataset: samples/labels count mismatch");
    if (!regions.empty() && regions.size() != samples.size())
        throw std::invalid_argument("dataset: regions count mismatch");
    const int d = dims(), t = length();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].rank() != 2 || samples[i].dim(0) != d || samples[i].dim(1) != t)
            throw std::invalid_argument("dataset: sample " + std::to_string(i) +
                                        " shape differs: " + samples[i].shape_str());
        if (labels[i] < 0 || labels[i] >= n_classes())
            throw std::invalid_argument("dataset: label out of range at sample " +
                                        std::to_string(i));
        if (!regions.empty() && regions[i].has_value()) {
            const GroundTruthRegion& r = *regions[i];
            if (r.dim < 0 || r.dim >= d || r.t_start < 0 || r.t_start >= r.t_end || r.t_end > t)
                throw std::invalid_argument("dataset: invalid ground-truth region at sample " +
                                            std::to_string(i));
        }
    }
}

MTSDataset MTSDataset::subset(const std::vector<int>& indices) const {
    MTSDataset out;
    out.name = name;
    out.class_names = class_names;
    for (int i : indices) {
        out.samples.push_back(samples.at(i));
        out.labels.push_back(labels.at(i));
        if (!regions.empty()) out.regions.push_back(regions.at(i));
    }
    return out;
}

MTSDataset load_ts_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open ts file: " + path);

    MTSDataset ds;
    int declared_dims = -1;
    int series_length = -1;
    bool in_data = false;
    bool equal_length = true;
    bool has_class_labels = false;
    std::unordered_map<std::string, int> class_of;

    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const std::string where = path + ":" + std::to_string(line_no);

        if (!in_data && line[0] == '@') {
            std::istringstream ls(line);
            std::string directive;
            ls >> directive;
            directive = lower(directive);
            if (directive == "@problemname") {
                ls >> ds.name;
            } else if (directive == "@univariate") {
                std::string v;
                ls >> v;
                if (lower(v) == "true" && declared_dims < 0) declared_dims = 1;
            } else if (directive == "@dimensions") {
                ls >> declared_dims;
            } else if (directive == "@equallength") {
                std::string v;
                ls >> v;
                equal_length = lower(v) == "true";
                if (!equal_length)
                    throw std::runtime_error(
                        "unsupported dataset feature: variable-length series (" + where + ")");
            } else if (directive == "@serieslength") {
                ls >> series_length;
            } else if (directive == "@classlabel") {
                std::string v;
                ls >> v;
                has_class_labels = lower(v) == "true";
                if (!has_class_labels)
                    throw std::runtime_error("unsupported dataset feature: no class labels (" +
                                             where + ")");
                std::string name;
                while (ls >> name) {
                    class_of.emplace(name, static_cast<int>(ds.class_names.size()));
                    ds.class_names.push_back(name);
                }
            } else if (directive == "@data") {
                in_data = true;
            }
            // Unknown directives (e.g. @timeStamps, @missing false) are ignored.
            continue;
        }

        if (!in_data)
            throw std::runtime_error("ts parse error: record before @data (" + where + ")");

        std::vector<std::string> fields = split(line, ':');
        if (fields.size() < 2)
            throw std::runtime_error("ts parse error: record without label field (" + where + ")");
        const std::string label_tok = trim(fields.back());
        fields.pop_back();

        const int d = static_cast<int>(fields.size());
        if (declared_dims >= 0 && d != declared_dims)
            throw std::runtime_error("ts parse error: expected " + std::to_string(declared_dims) +
                                     " dimensions, got " + std::to_string(d) + " (" + where + ")");

        std::vector<std::vector<double>> dims_vals;
        dims_vals.reserve(d);
        for (int di = 0; di < d; ++di) {
            std::vector<double> vals;
            for (const std::string& tok : split(fields[di], ','))
                vals.push_back(parse_value(tok, where));
            dims_vals.push_back(std::move(vals));
        }
        const int t = static_cast<int>(dims_vals[0].size());
        for (const auto& v : dims_vals)
            if (static_cast<int>(v.size()) != t)
                throw std::runtime_error("unsupported dataset feature: unequal lengths (" + where +
                                         ")");
        if (series_length > 0 && t != series_length)
            throw std::runtime_error("unsupported dataset feature: unequal lengths (" + where +
                                     ")");
        if (!ds.samples.empty() && ds.samples[0].dim(1) != t)
            throw std::runtime_error("unsupported dataset feature: unequal lengths (" + where +
                                     ")");

        auto it = class_of.find(label_tok);
        if (it == class_of.end())
            throw std::runtime_error("ts parse error: unknown class label '" + label_tok + "' (" +
                                     where + ")");

        Tensor sample({d, t});
        for (int di = 0; di < d; ++di)
            std::copy(dims_vals[di].begin(), dims_vals[di].end(), &sample.at(di, 0));
        ds.samples.push_back(std::move(sample));
        ds.labels.push_back(it->second);
    }

    if (!in_data) throw std::runtime_error("ts parse error: no @data section in " + path);
    ds.validate();
    return ds;
}

void save_ts_file(const MTSDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream f(path, std::ios::binary);  // binary: no newline translation
    if (!f) throw std::runtime_error("cannot write ts file: " + path);

    f << "@problemName " << (ds.name.empty() ? "dataset" : ds.name) << "\n";
    f << "@timeStamps false\n";
    f << "@missing false\n";
    f << "@univariate " << (ds.dims() == 1 ? "true" : "false") << "\n";
    f << "@dimensions " << ds.dims() << "\n";
    f << "@equalLength true\n";
    f << "@seriesLength " << ds.length() << "\n";
    f << "@classLabel true";
    for (const std::string& c : ds.class_names) f << " " << c;
    f << "\n@data\n";

    char buf[40];
    for (int i = 0; i < ds.size(); ++i) {
        const Tensor& s = ds.samples[i];
        for (int d = 0; d < ds.dims(); ++d) {
            if (d) f << ":";
            for (int t = 0; t < ds.length(); ++t) {
                if (t) f << ",";
                std::snprintf(buf, sizeof(buf), "%.17g", s.at(d, t));
                f << buf;
            }
        }
        f << ":" << ds.class_names[ds.labels[i]] << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

MTSDataset generate_synthetic(const SyntheticParams& p, std::uint64_t seed) {
    if (p.pulse_start < 0 || p.pulse_end > p.length || p.pulse_start >= p.pulse_end)
        throw std::invalid_argument("synthetic: pulse window out of range");
    Rng rng(seed);
    MTSDataset ds;
    ds.name = "synthetic";
    ds.class_names = {"negative", "positive"};
    const double two_pi = 6.283185307179586476925286766559;

    for (int cls = 0; cls < 2; ++cls) {
        for (int i = 0; i < p.n_per_class; ++i) {
            Tensor sample({2, p.length});
            for (int d = 0; d < 2; ++d) {
                const double phase = p.randomize_phase ? rng.uniform(0.0, two_pi) : 0.0;
                for (int t = 0; t < p.length; ++t) {
                    double v = p.sine_amplitude * std::sin(two_pi * t / p.sine_period + phase);
                    if (cls == 1 && d == 0 && t >= p.pulse_start && t < p.pulse_end)
                        v = p.pulse_amplitude;
                    if (p.noise_sigma > 0.0) v += p.noise_sigma * rng.normal();
                    sample.at(d, t) = v;
                }
            }
            ds.samples.push_back(std::move(sample));
            ds.labels.push_back(cls);
            if (cls == 1)
                ds.regions.push_back(GroundTruthRegion{0, p.pulse_start, p.pulse_end});
            else
                ds.regions.push_back(std::nullopt);
        }
    }
    ds.validate();
    return ds;
}

std::vector<int> FoldAssignment::fold_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < fold_of_sample.size(); ++i)
        if (fold_of_sample[i] == fold) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> FoldAssignment::complement_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < fold_of_sample.size(); ++i)
        if (fold_of_sample[i] != fold) out.push_back(static_cast<int>(i));
    return out;
}

FoldAssignment stratified_folds(const MTSDataset& ds, int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("stratified_folds: k must be >= 1");
    std::vector<std::vector<int>> by_class(ds.n_classes());
    for (int i = 0; i < ds.size(); ++i) by_class.at(ds.labels[i]).push_back(i);
    for (int c = 0; c < ds.n_classes(); ++c)
        if (static_cast<int>(by_class[c].size()) < k)
            throw std::invalid_argument("stratified_folds: class '" + ds.class_names[c] +
                                        "' has fewer than " + std::to_string(k) + " members");

    FoldAssignment fa;
    fa.k = k;
    fa.fold_of_sample.assign(ds.size(), 0);
    Rng rng(seed);
    for (int c = 0; c < ds.n_classes(); ++c) {
        std::vector<int>& idx = by_class[c];
        rng.shuffle(idx);
        for (std::size_t j = 0; j < idx.size(); ++j)
            fa.fold_of_sample[idx[j]] = static_cast<int>(j % k);
    }
    return fa;
}

Tensor to_onehot(const std::vector<int>& labels, int classes) {
    Tensor out({static_cast<int>(labels.size()), classes});
    for (std::size_t b = 0; b < labels.size(); ++b) {
        if (labels[b] < 0 || labels[b] >= classes)
            throw std::out_of_range("to_onehot: label index out of range");
        out.at(static_cast<int>(b), labels[b]) = 1.0;
    }
    return out;
}

}  // namespace xcm
