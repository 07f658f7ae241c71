#include "xcm/model.hpp"

#include "xcm/adam.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace xcm {

using nlohmann::json;

std::string architecture_name(Architecture a) {
    switch (a) {
        case Architecture::XCM: return "xcm";
        case Architecture::XCMSeq: return "xcm-seq";
        case Architecture::MTEXCNN: return "mtex-cnn";
    }
    throw std::logic_error("unknown architecture");
}

Architecture architecture_from_name(const std::string& name) {
    if (name == "xcm") return Architecture::XCM;
    if (name == "xcm-seq" || name == "xcmseq") return Architecture::XCMSeq;
    if (name == "mtex-cnn" || name == "mtexcnn") return Architecture::MTEXCNN;
    throw std::invalid_argument("unknown architecture: " + name);
}

int ModelSpec::window_size() const {
    const int w = std::max(1, static_cast<int>(std::lround(window_pct * input_t)));
    return std::min(w, input_t);
}

void ModelSpec::validate() const {
    if (input_t < 1 || input_d < 1) throw std::invalid_argument("model spec: input shape invalid");
    if (classes < 2) throw std::invalid_argument("model spec: needs at least 2 classes");
    if (filters < 1) throw std::invalid_argument("model spec: filters must be positive");
    if (window_pct <= 0.0 || window_pct > 1.0)
        throw std::invalid_argument("model spec: window_pct must be in (0,1]");
}

int Model::add_node(std::unique_ptr<Layer> layer, std::vector<int> inputs, std::string tap) {
    const int id = static_cast<int>(nodes_.size());
    for (int in : inputs)
        if (in < -1 || in >= id) throw std::logic_error("model: bad node wiring");
    if (!tap.empty()) taps_[tap] = id;
    nodes_.push_back(Node{std::move(layer), std::move(inputs), std::move(tap)});
    return id;
}

void Model::finish_build(std::uint64_t seed) {
    Rng rng(Rng::derive(seed, 0x1417ULL));
    for (auto& node : nodes_) node.layer->init_params(rng);
}

Model Model::build(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Model m;
    switch (spec.architecture) {
        case Architecture::XCM: m = build_xcm(spec); break;
        case Architecture::XCMSeq: m = build_xcm_seq(spec); break;
        case Architecture::MTEXCNN: m = build_mtex_cnn(spec); break;
    }
    m.finish_build(seed);
    return m;
}

// Parallel 2D and 1D convolution branches over the raw input, 1x1 reductions,
// width concatenation, one more 1D block, then GAP + dense head.
Model Model::build_xcm(const ModelSpec& spec) {
    Model m;
    m.spec_ = spec;
    const int T = spec.input_t, D = spec.input_d, F = spec.filters, w = spec.window_size();

    // Branch A: per-variable features at full resolution.
    int a = m.add_node(std::make_unique<Conv>(1, D, F, w, 1, 1, Padding::Same), {-1});
    a = m.add_node(std::make_unique<BatchNorm>(F), {a});
    a = m.add_node(std::make_unique<ReLU>(), {a}, kTapVariables);  // [B,F,T,D]
    a = m.add_node(std::make_unique<Conv>(F, D, 1, 1, 1, 1, Padding::Same), {a});
    a = m.add_node(std::make_unique<ReLU>(), {a});  // [B,1,T,D]

    // Branch B: cross-variable time features.
    int b = m.add_node(std::make_unique<Conv>(1, D, F, w, D, 1, Padding::Same), {-1});
    b = m.add_node(std::make_unique<BatchNorm>(F), {b});
    b = m.add_node(std::make_unique<ReLU>(), {b}, kTapTime);  // [B,F,T,1]
    b = m.add_node(std::make_unique<Conv>(F, 1, 1, 1, 1, 1, Padding::Same), {b});
    b = m.add_node(std::make_unique<ReLU>(), {b});  // [B,1,T,1]

    int c = m.add_node(std::make_unique<ConcatWidth>(), {a, b});  // [B,1,T,D+1]
    c = m.add_node(std::make_unique<Conv>(1, D + 1, F, w, D + 1, 1, Padding::Same), {c});
    c = m.add_node(std::make_unique<BatchNorm>(F), {c});
    c = m.add_node(std::make_unique<ReLU>(), {c});  // [B,F,T,1]
    c = m.add_node(std::make_unique<Gap1d>(), {c});
    m.add_node(std::make_unique<Dense>(F, spec.classes), {c});
    (void)T;
    return m;
}

// Same blocks as XCM but wired in sequence: the 1D block consumes the reduced
// output of the 2D block instead of the raw input.
Model Model::build_xcm_seq(const ModelSpec& spec) {
    Model m;
    m.spec_ = spec;
    const int D = spec.input_d, F = spec.filters, w = spec.window_size();

    int n = m.add_node(std::make_unique<Conv>(1, D, F, w, 1, 1, Padding::Same), {-1});
    n = m.add_node(std::make_unique<BatchNorm>(F), {n});
    n = m.add_node(std::make_unique<ReLU>(), {n}, kTapVariables);
    n = m.add_node(std::make_unique<Conv>(F, D, 1, 1, 1, 1, Padding::Same), {n});
    n = m.add_node(std::make_unique<ReLU>(), {n});  // [B,1,T,D]

    n = m.add_node(std::make_unique<Conv>(1, D, F, w, D, 1, Padding::Same), {n});
    n = m.add_node(std::make_unique<BatchNorm>(F), {n});
    n = m.add_node(std::make_unique<ReLU>(), {n}, kTapTime);  // [B,F,T,1]
    n = m.add_node(std::make_unique<Conv>(F, 1, 1, 1, 1, 1, Padding::Same), {n});
    n = m.add_node(std::make_unique<ReLU>(), {n});  // [B,1,T,1]

    n = m.add_node(std::make_unique<Conv>(1, 1, F, w, 1, 1, Padding::Same), {n});
    n = m.add_node(std::make_unique<BatchNorm>(F), {n});
    n = m.add_node(std::make_unique<ReLU>(), {n});
    n = m.add_node(std::make_unique<Gap1d>(), {n});
    m.add_node(std::make_unique<Dense>(F, spec.classes), {n});
    return m;
}

// Two-stage reference network: stride-2 2D convolutions with dropout, a 1x1
// channel collapse, a stride-2 1D convolution, then flatten + dense layers
// (the 128-unit layer carries the l2 penalty).
Model Model::build_mtex_cnn(const ModelSpec& spec) {
    if (spec.input_t < 4)
        throw std::invalid_argument("mtex-cnn: series length must be >= 4");
    Model m;
    m.spec_ = spec;
    const int T = spec.input_t, D = spec.input_d;

    int n = m.add_node(std::make_unique<Conv>(1, D, 64, 8, 1, 2, Padding::Same), {-1});
    n = m.add_node(std::make_unique<ReLU>(), {n}, kTapVariables);  // [B,64,ceil(T/2),D]
    n = m.add_node(std::make_unique<Dropout>(0.4), {n});
    n = m.add_node(std::make_unique<Conv>(64, D, 128, 6, 1, 2, Padding::Same), {n});
    n = m.add_node(std::make_unique<ReLU>(), {n});
    n = m.add_node(std::make_unique<Dropout>(0.4), {n});
    n = m.add_node(std::make_unique<Conv>(128, D, 1, 1, 1, 1, Padding::Same), {n});
    n = m.add_node(std::make_unique<ReLU>(), {n});  // [B,1,T2,D]

    const int t1 = Conv::out_extent(T, 8, 2, Padding::Same);
    const int t2 = Conv::out_extent(t1, 6, 2, Padding::Same);
    const int t3 = Conv::out_extent(t2, 2, 2, Padding::Same);

    n = m.add_node(std::make_unique<Conv>(1, D, 128, 2, D, 2, Padding::Same), {n});
    n = m.add_node(std::make_unique<ReLU>(), {n}, kTapTime);  // [B,128,t3,1]
    n = m.add_node(std::make_unique<Dropout>(0.4), {n});
    n = m.add_node(std::make_unique<Flatten>(), {n});
    n = m.add_node(std::make_unique<Dense>(128 * t3, 128, /*l2=*/0.2), {n});
    n = m.add_node(std::make_unique<ReLU>(), {n});
    m.add_node(std::make_unique<Dense>(128, spec.classes), {n});
    return m;
}

Tensor Model::forward(const Tensor& input, Mode mode, Rng* rng, Trace& trace) {
    if (input.rank() != 4 || input.dim(1) != 1 || input.dim(2) != spec_.input_t ||
        input.dim(3) != spec_.input_d)
        throw std::invalid_argument("model forward: input " + input.shape_str() +
                                    " does not match spec [B,1," + std::to_string(spec_.input_t) +
                                    "," + std::to_string(spec_.input_d) + "]");
    trace.out.assign(nodes_.size(), Tensor{});
    trace.cache.assign(nodes_.size(), Cache{});
    trace.grad.clear();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        std::vector<const Tensor*> ins;
        ins.reserve(nodes_[i].inputs.size());
        for (int src : nodes_[i].inputs)
            ins.push_back(src < 0 ? &input : &trace.out[static_cast<std::size_t>(src)]);
        trace.out[i] = nodes_[i].layer->forward(ins, mode, rng, trace.cache[i]);
    }
    return trace.out.back();
}

Tensor Model::backward(const Tensor& grad_logits, Trace& trace, bool accumulate_param_grads) {
    if (trace.out.size() != nodes_.size())
        throw std::logic_error("model backward: run forward first");
    trace.grad.assign(nodes_.size(), Tensor{});
    trace.grad.back() = grad_logits;
    Tensor input_grad;

    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        Tensor& g = trace.grad[static_cast<std::size_t>(i)];
        if (g.numel() == 0) {
            // Node's output feeds nothing that received gradient; skip.
            continue;
        }
        std::vector<Tensor> gin = nodes_[static_cast<std::size_t>(i)].layer->backward(
            g, trace.cache[static_cast<std::size_t>(i)], accumulate_param_grads);
        const std::vector<int>& srcs = nodes_[static_cast<std::size_t>(i)].inputs;
        for (std::size_t j = 0; j < srcs.size(); ++j) {
            Tensor& dst = srcs[j] < 0 ? input_grad : trace.grad[static_cast<std::size_t>(srcs[j])];
            if (dst.numel() == 0)
                dst = std::move(gin[j]);
            else
                dst.add_scaled(gin[j], 1.0);
        }
    }
    return input_grad;
}

const Tensor& Model::tap_activation(const Trace& trace, const std::string& tap) const {
    auto it = taps_.find(tap);
    if (it == taps_.end()) throw std::invalid_argument("model: no tap named '" + tap + "'");
    if (trace.out.size() != nodes_.size())
        throw std::logic_error("model: trace has no activations; run forward first");
    return trace.out[static_cast<std::size_t>(it->second)];
}

const Tensor& Model::tap_gradient(const Trace& trace, const std::string& tap) const {
    auto it = taps_.find(tap);
    if (it == taps_.end()) throw std::invalid_argument("model: no tap named '" + tap + "'");
    if (trace.grad.size() != nodes_.size())
        throw std::logic_error("model: trace has no gradients; run backward first");
    return trace.grad[static_cast<std::size_t>(it->second)];
}

std::vector<ParamTensor*> Model::params() {
    std::vector<ParamTensor*> out;
    for (auto& node : nodes_)
        for (ParamTensor* p : node.layer->params()) out.push_back(p);
    return out;
}

long Model::count_parameters() const {
    long n = 0;
    for (const auto& node : nodes_)
        for (ParamTensor* p : const_cast<Layer*>(node.layer.get())->params()) n += p->value.numel();
    return n;
}

Tensor Model::to_input(const Tensor& batch_dt) const {
    if (batch_dt.rank() != 3 || batch_dt.dim(1) != spec_.input_d ||
        batch_dt.dim(2) != spec_.input_t)
        throw std::invalid_argument("predict: batch " + batch_dt.shape_str() +
                                    " does not match spec [B," + std::to_string(spec_.input_d) +
                                    "," + std::to_string(spec_.input_t) + "]");
    const int B = batch_dt.dim(0), D = batch_dt.dim(1), T = batch_dt.dim(2);
    Tensor x({B, 1, T, D});
    for (int b = 0; b < B; ++b)
        for (int d = 0; d < D; ++d)
            for (int t = 0; t < T; ++t) x.at(b, 0, t, d) = batch_dt.at(b, d, t);
    return x;
}

Prediction Model::predict(const Tensor& batch_dt) {
    Trace trace;
    const Tensor logits = forward(to_input(batch_dt), Mode::Inference, nullptr, trace);
    Prediction pred;
    pred.probs = softmax_rows(logits);
    const int B = pred.probs.dim(0), C = pred.probs.dim(1);
    pred.labels.resize(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
        int best = 0;
        for (int c = 1; c < C; ++c)
            if (pred.probs.at(b, c) > pred.probs.at(b, best)) best = c;
        pred.labels[static_cast<std::size_t>(b)] = best;
    }
    return pred;
}

Prediction Model::predict_sample(const Tensor& sample_dt) {
    if (sample_dt.rank() != 2)
        throw std::invalid_argument("predict_sample: expects a [D,T] matrix");
    Tensor batch({1, sample_dt.dim(0), sample_dt.dim(1)}, sample_dt.data);
    return predict(batch);
}

double Model::regularization_penalty() {
    return xcm::regularization_penalty(params());
}

void Model::add_regularization_gradients() {
    xcm::add_regularization_gradients(params());
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

std::vector<Model::NamedTensor> Model::state_tensors() {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const std::string prefix = "node" + std::to_string(i) + ".";
        for (ParamTensor* p : nodes_[i].layer->params())
            out.push_back({prefix + p->name, &p->value, true});
        if (auto* bn = dynamic_cast<BatchNorm*>(nodes_[i].layer.get())) {
            out.push_back({prefix + "bn.running_mean", &bn->running_mean(), false});
            out.push_back({prefix + "bn.running_var", &bn->running_var(), false});
        }
    }
    return out;
}

namespace {
constexpr char kCheckpointMagic[] = "XCMCKPT1";

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}
}  // namespace

void Model::save(const std::string& path, const std::vector<std::string>& class_names) const {
    Model* self = const_cast<Model*>(this);
    json header;
    header["format"] = kCheckpointMagic;
    header["spec"] = {{"architecture", architecture_name(spec_.architecture)},
                      {"input_t", spec_.input_t},
                      {"input_d", spec_.input_d},
                      {"classes", spec_.classes},
                      {"filters", spec_.filters},
                      {"window_pct", spec_.window_pct}};
    if (!class_names.empty()) header["class_names"] = class_names;
    json tensors = json::array();
    for (auto& nt : self->state_tensors())
        tensors.push_back({{"name", nt.name}, {"shape", nt.tensor->shape}});
    header["tensors"] = std::move(tensors);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    const std::string head = header.dump();
    f.write(kCheckpointMagic, 8);
    write_u64(f, head.size());
    f.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (auto& nt : self->state_tensors()) {
        for (double v : nt.tensor->data) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            write_u64(f, bits);
        }
    }
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

Model Model::load(const std::string& path, std::vector<std::string>* class_names) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[9] = {0};
    f.read(magic, 8);
    if (!f || std::string(magic) != kCheckpointMagic)
        throw std::runtime_error("corrupt checkpoint (bad magic): " + path);
    const std::uint64_t head_len = read_u64(f);
    if (!f || head_len > (1ull << 30))
        throw std::runtime_error("corrupt checkpoint (bad header length): " + path);
    std::string head(head_len, '\0');
    f.read(head.data(), static_cast<std::streamsize>(head_len));
    if (!f) throw std::runtime_error("corrupt checkpoint (truncated header): " + path);

    json header;
    try {
        header = json::parse(head);
    } catch (const json::exception& e) {
        throw std::runtime_error("corrupt checkpoint (header parse): " + std::string(e.what()));
    }

    ModelSpec spec;
    spec.architecture = architecture_from_name(header.at("spec").at("architecture"));
    spec.input_t = header.at("spec").at("input_t");
    spec.input_d = header.at("spec").at("input_d");
    spec.classes = header.at("spec").at("classes");
    spec.filters = header.at("spec").at("filters");
    spec.window_pct = header.at("spec").at("window_pct");
    if (class_names != nullptr) {
        class_names->clear();
        if (header.contains("class_names"))
            *class_names = header.at("class_names").get<std::vector<std::string>>();
    }

    Model m = Model::build(spec, /*seed=*/0);
    auto tensors = m.state_tensors();
    const auto& manifest = header.at("tensors");
    if (manifest.size() != tensors.size())
        throw std::runtime_error("corrupt checkpoint: tensor manifest mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (manifest[i].at("name") != tensors[i].name ||
            manifest[i].at("shape").get<std::vector<int>>() != tensors[i].tensor->shape)
            throw std::runtime_error("corrupt checkpoint: tensor '" + tensors[i].name +
                                     "' does not match the architecture");
        for (double& v : tensors[i].tensor->data) {
            const std::uint64_t bits = read_u64(f);
            std::memcpy(&v, &bits, 8);
        }
        if (!f) throw std::runtime_error("corrupt checkpoint (truncated tensor data): " + path);
    }
    return m;
}

}  // namespace xcm
