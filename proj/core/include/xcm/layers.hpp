#ifndef XCM_LAYERS_HPP
#define XCM_LAYERS_HPP

#include <memory>
#include <string>
#include <vector>

#include "xcm/rng.hpp"
#include "xcm/tensor.hpp"

namespace xcm {

enum class Mode { Train, Inference };

// Same: zero padding along time so stride-1 convolutions preserve the time
// extent; when the total padding is odd, the extra element goes at the END of
// the axis. Valid: no padding.
enum class Padding { Same, Valid };

// One trainable tensor plus its gradient and Adam state.
struct ParamTensor {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    long adam_step = 0;
    double l2 = 0.0;  // coefficient of an l2 * sum(w^2) loss penalty

    explicit ParamTensor(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(shape), adam_m(shape), adam_v(shape) {}

    void zero_grad() { grad.fill(0.0); }
};

// Invocation-local storage for whatever a layer's backward pass needs.
// Caches never live on the layer itself, so concurrent inference/explanation
// passes over one frozen model cannot interfere.
struct Cache {
    std::vector<Tensor> saved;
    Mode mode = Mode::Inference;
};

// Layer primitive. forward takes one or more input activations (all layers
// here take one except the width concatenation) and returns the output;
// backward maps the output gradient to one gradient per input, accumulating
// parameter gradients only when asked to.
class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    virtual Tensor forward(const std::vector<const Tensor*>& in, Mode mode, Rng* rng,
                           Cache& cache) = 0;
    virtual std::vector<Tensor> backward(const Tensor& grad_out, const Cache& cache,
                                         bool accumulate_param_grads) = 0;
    virtual std::vector<ParamTensor*> params() { return {}; }
    virtual void init_params(Rng&) {}
};

// Convolution over [B, C, T, W] tensors. The kernel is kernel_h x kernel_w
// with kernel_w either 1 (per-variable 2D filters, output width = W) or the
// full input width (time 1D filters, output width = 1). Stride applies along
// time only; the width axis is never strided or padded.
class Conv : public Layer {
public:
    Conv(int in_channels, int in_width, int filters, int kernel_h, int kernel_w, int stride_h,
         Padding padding);

    std::string kind() const override { return "conv"; }
    Tensor forward(const std::vector<const Tensor*>& in, Mode mode, Rng* rng,
                   Cache& cache) override;
    std::vector<Tensor> backward(const Tensor& grad_out, const Cache& cache,
                                 bool accumulate_param_grads) override;
    std::vector<ParamTensor*> params() override { return {&weights_, &bias_}; }
    void init_params(Rng& rng) override;

    int filters() const { return filters_; }
    int kernel_h() const { return kernel_h_; }
    int kernel_w() const { return kernel_w_; }
    int stride_h() const { return stride_h_; }
    Padding padding() const { return padding_; }

    ParamTensor& weights() { return weights_; }
    ParamTensor& bias() { return bias_; }

    // Output time extent and begin-padding for an input of t timesteps.
    static int out_extent(int t, int kernel, int stride, Padding padding);
    static int pad_begin(int t, int kernel, int stride, Padding padding);

private:
    int in_channels_, in_width_, filters_, kernel_h_, kernel_w_, stride_h_;
    Padding padding_;
    ParamTensor weights_;  // [F, C, KH, KW]
    ParamTensor bias_;     // [F]
};

// Per-channel batch normalization over (batch, time, width). Train mode uses
// batch statistics and updates the running estimates; inference uses the
// running estimates (initialized to mean 0 / var 1).
class BatchNorm : public Layer {
public:
    explicit BatchNorm(int channels, double eps = 1e-3, double momentum = 0.99);

    std::string kind() const override { return "batchnorm"; }
    Tensor forward(const std::vector<const Tensor*>& in, Mode mode, Rng* rng,
                   Cache& cache) override;
    std::vector<Tensor> backward(const Tensor& grad_out, const Cache& cache,
                                 bool accumulate_param_grads) override;
    std::vector<ParamTensor*> params() override { return {&gamma_, &beta_}; }

    Tensor& running_mean() { return running_mean_; }
    Tensor& running_var() { return running_var_; }
    double eps() const { return eps_; }

private:
    int channels_;
    double eps_, momentum_;
    ParamTensor gamma_, beta_;
    Tensor running_mean_, running_var_;
};

// Elementwise max(0, x); the subgradient at exactly 0 is 0.
class ReLU : public Layer {
public:
    std::string kind() const override { return "relu"; }
    Tensor forward(const std::vector<const Tensor*>& in, Mode mode, Rng* rng,
                   Cache& cache) override;
    std::vector<Tensor> backward(const Tensor& grad_out, const Cache& cache,
                                 bool accumulate_param_grads) override;
};

// Inverted dropout: train-time zeroing with 1/(1-rate) rescaling of the
// survivors, identity at inference.
class Dropout : public Layer {
public:
    explicit Dropout(double rate);

    std::string kind() const override { return "dropout"; }
    Tensor forward(const std::vector<const Tensor*>& in, Mode mode, Rng* rng,
                   Cache& cache) override;
    std::vector<Tensor> backward(const Tensor& grad_out, const Cache& cache,
                                 bool accumulate_param_grads) override;
    double rate() const { return rate_; }

private:
    double rate_;
};

// Concatenates two [B, C, T, *] activations along the width axis; the second
// input occupies the trailing columns.
class ConcatWidth : public Layer {
public:
    std::string kind() const override { return "concat_width"; }
    Tensor forward(const std::vector<const Tensor*>& in, Mode mode, Rng* rng,
                   Cache& cache) override;
    std::vector<Tensor> backward(const Tensor& grad_out, const Cache& cache,
                                 bool accumulate_param_grads) override;
};

// 1D global average pooling: [B, F, T, 1] -> [B, F].
class Gap1d : public Layer {
public:
    std::string kind() const override { return "gap1d"; }
    Tensor forward(const std::vector<const Tensor*>& in, Mode mode, Rng* rng,
                   Cache& cache) override;
    std::vector<Tensor> backward(const Tensor& grad_out, const Cache& cache,
                                 bool accumulate_param_grads) override;
};

// [B, C, T, W] -> [B, C*T*W].
class Flatten : public Layer {
public:
    std::string kind() const override { return "flatten"; }
    Tensor forward(const std::vector<const Tensor*>& in, Mode mode, Rng* rng,
                   Cache& cache) override;
    std::vector<Tensor> backward(const Tensor& grad_out, const Cache& cache,
                                 bool accumulate_param_grads) override;
};

// Fully connected [B, in] -> [B, out]; weights stored [in, out].
class Dense : public Layer {
public:
    Dense(int in_features, int out_features, double l2 = 0.0);

    std::string kind() const override { return "dense"; }
    Tensor forward(const std::vector<const Tensor*>& in, Mode mode, Rng* rng,
                   Cache& cache) override;
    std::vector<Tensor> backward(const Tensor& grad_out, const Cache& cache,
                                 bool accumulate_param_grads) override;
    std::vector<ParamTensor*> params() override { return {&weights_, &bias_}; }
    void init_params(Rng& rng) override;

private:
    int in_features_, out_features_;
    ParamTensor weights_, bias_;
};

// Row-wise softmax of [B, C] logits (shift-invariant).
Tensor softmax_rows(const Tensor& logits);

// Mean categorical cross entropy; probs clamped to [1e-12, 1] before log.
double cross_entropy_loss(const Tensor& probs, const std::vector<int>& labels, int classes);
double cross_entropy_loss(const Tensor& probs, const Tensor& onehot);

// Combined softmax + cross entropy gradient wrt the logits: (p - onehot) / B.
Tensor softmax_xent_backward(const Tensor& probs, const std::vector<int>& labels);

}  // namespace xcm

#endif
