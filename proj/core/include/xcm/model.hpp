#ifndef XCM_MODEL_HPP
#define XCM_MODEL_HPP

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "xcm/layers.hpp"

namespace xcm {

enum class Architecture { XCM, XCMSeq, MTEXCNN };

std::string architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& name);

struct ModelSpec {
    Architecture architecture = Architecture::XCM;
    int input_t = 0;
    int input_d = 0;
    int classes = 0;
    int filters = 128;
    double window_pct = 0.2;

    // Kernel size along time, derived from the window percentage.
    int window_size() const;
    void validate() const;

    bool operator==(const ModelSpec&) const = default;
};

// Tap names exposed for attribution: post-activation feature maps of the
// first per-variable (2D) and first time (1D) convolution blocks.
inline constexpr const char* kTapVariables = "vars_block";
inline constexpr const char* kTapTime = "time_block";

// Per-forward-invocation activations and caches. Gradients per node are
// filled in by backward. Keeping this outside the model makes concurrent
// inference/explanation on one frozen model safe.
struct Trace {
    std::vector<Tensor> out;
    std::vector<Cache> cache;
    std::vector<Tensor> grad;  // gradient wrt each node's output (after backward)
};

struct Prediction {
    Tensor probs;  // [B, C]
    std::vector<int> labels;
};

// An ordered graph of layers. Node inputs refer to earlier nodes by index
// (-1 = the model input); the last node produces the pre-softmax logits.
class Model {
public:
    static Model build(const ModelSpec& spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }

    // Forward to pre-softmax logits for a [B, 1, T, D] input batch.
    Tensor forward(const Tensor& input, Mode mode, Rng* rng, Trace& trace);

    // Backpropagates a [B, C] logit gradient through the graph, filling
    // trace.grad; returns the gradient wrt the model input. Parameter
    // gradients accumulate only when requested (training path).
    Tensor backward(const Tensor& grad_logits, Trace& trace, bool accumulate_param_grads);

    const Tensor& tap_activation(const Trace& trace, const std::string& tap) const;
    const Tensor& tap_gradient(const Trace& trace, const std::string& tap) const;
    bool has_tap(const std::string& tap) const { return taps_.count(tap) > 0; }

    std::vector<ParamTensor*> params();
    long count_parameters() const;

    // Inference on a [B, D, T] dataset-layout batch (dropout off, running
    // batch-norm statistics); ties in the argmax go to the lowest class id.
    Prediction predict(const Tensor& batch_dt);
    Prediction predict_sample(const Tensor& sample_dt);

    // Converts a [B, D, T] batch to the [B, 1, T, D] layer layout.
    Tensor to_input(const Tensor& batch_dt) const;

    double regularization_penalty();
    void add_regularization_gradients();

    // Checkpoint: JSON header (spec, layer list, tensor manifest, class
    // names) followed by raw little-endian doubles. Reload reproduces
    // bit-identical predictions.
    void save(const std::string& path, const std::vector<std::string>& class_names = {}) const;
    static Model load(const std::string& path, std::vector<std::string>* class_names = nullptr);

private:
    struct Node {
        std::unique_ptr<Layer> layer;
        std::vector<int> inputs;  // node indices; -1 = model input
        std::string tap;          // optional tap name
    };

    Model() = default;
    int add_node(std::unique_ptr<Layer> layer, std::vector<int> inputs, std::string tap = "");
    void finish_build(std::uint64_t seed);

    static Model build_xcm(const ModelSpec& spec);
    static Model build_xcm_seq(const ModelSpec& spec);
    static Model build_mtex_cnn(const ModelSpec& spec);

    // Every tensor a checkpoint must carry, in a fixed order: trainable
    // parameters plus batch-norm running statistics.
    struct NamedTensor {
        std::string name;
        Tensor* tensor;
        bool trainable;
    };
    std::vector<NamedTensor> state_tensors();

    ModelSpec spec_;
    std::vector<Node> nodes_;
    std::unordered_map<std::string, int> taps_;
};

}  // namespace xcm

#endif
