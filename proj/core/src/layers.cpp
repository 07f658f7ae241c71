#include "xcm/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xcm {

namespace {

const Tensor& single_input(const std::vector<const Tensor*>& in, const char* who) {
    if (in.size() != 1 || in[0] == nullptr)
        throw std::invalid_argument(std::string(who) + ": expects exactly one input");
    return *in[0];
}

void require_rank4(const Tensor& t, const char* who) {
    if (t.rank() != 4)
        throw std::invalid_argument(std::string(who) + ": expects a [B,C,T,W] tensor, got " +
                                    t.shape_str());
}

// Layers stash the dims backward needs as a small meta tensor in the cache.
Tensor meta(std::initializer_list<int> vals) {
    Tensor m({static_cast<int>(vals.size())});
    int i = 0;
    for (int v : vals) m.data[i++] = static_cast<double>(v);
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv

Conv::Conv(int in_channels, int in_width, int filters, int kernel_h, int kernel_w, int stride_h,
           Padding padding)
    : in_channels_(in_channels),
      in_width_(in_width),
      filters_(filters),
      kernel_h_(kernel_h),
      kernel_w_(kernel_w),
      stride_h_(stride_h),
      padding_(padding),
      weights_("conv.weights", {filters, in_channels, kernel_h, kernel_w}),
      bias_("conv.bias", {filters}) {
    if (filters <= 0) throw std::invalid_argument("conv: filters must be positive");
    if (kernel_h < 1 || kernel_w < 1) throw std::invalid_argument("conv: kernel must be >= 1");
    if (stride_h < 1) throw std::invalid_argument("conv: stride must be >= 1");
    if (kernel_w > in_width)
        throw std::invalid_argument("conv: kernel width exceeds input width");
}

int Conv::out_extent(int t, int kernel, int stride, Padding padding) {
    if (padding == Padding::Same) return (t + stride - 1) / stride;
    if (kernel > t) throw std::invalid_argument("conv: kernel exceeds input");
    return (t - kernel) / stride + 1;
}

int Conv::pad_begin(int t, int kernel, int stride, Padding padding) {
    if (padding == Padding::Valid) return 0;
    const int out = out_extent(t, kernel, stride, padding);
    const int total = std::max((out - 1) * stride + kernel - t, 0);
    return total / 2;  // odd total padding puts the extra element at the end
}

Tensor Conv::forward(const std::vector<const Tensor*>& in, Mode mode, Rng*, Cache& cache) {
    const Tensor& x = single_input(in, "conv");
    require_rank4(x, "conv");
    const int B = x.dim(0), C = x.dim(1), T = x.dim(2), W = x.dim(3);
    if (C != in_channels_ || W != in_width_)
        throw std::invalid_argument("conv: input " + x.shape_str() + " does not match layer (C=" +
                                    std::to_string(in_channels_) +
                                    ", W=" + std::to_string(in_width_) + ")");

    const int To = out_extent(T, kernel_h_, stride_h_, padding_);
    const int pb = pad_begin(T, kernel_h_, stride_h_, padding_);
    const int total_pad =
        padding_ == Padding::Same ? std::max((To - 1) * stride_h_ + kernel_h_ - T, 0) : 0;
    const int Tp = T + total_pad;
    const int Wo = W - kernel_w_ + 1;

    // Materialize the zero-padded input once; backward reuses it.
    Tensor xp({B, C, Tp, W});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            std::copy_n(&x.data[(static_cast<std::size_t>(b) * C + c) * T * W],
                        static_cast<std::size_t>(T) * W,
                        &xp.data[((static_cast<std::size_t>(b) * C + c) * Tp + pb) * W]);

    Tensor out({B, filters_, To, Wo});
    const double* wts = weights_.value.data.data();
    for (int b = 0; b < B; ++b) {
        for (int f = 0; f < filters_; ++f) {
            double* ob = &out.data[((static_cast<std::size_t>(b) * filters_ + f) * To) * Wo];
            const double bf = bias_.value.data[f];
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(To) * Wo; ++i) ob[i] = bf;
            for (int c = 0; c < C; ++c) {
                const double* xb = &xp.data[((static_cast<std::size_t>(b) * C + c) * Tp) * W];
                const double* wfc =
                    &wts[((static_cast<std::size_t>(f) * C + c) * kernel_h_) * kernel_w_];
                for (int u = 0; u < kernel_h_; ++u) {
                    if (kernel_w_ == 1) {
                        const double wv = wfc[u];
                        for (int to = 0; to < To; ++to) {
                            const double* xr = &xb[static_cast<std::size_t>(to * stride_h_ + u) * W];
                            double* orow = &ob[static_cast<std::size_t>(to) * Wo];
                            for (int w = 0; w < Wo; ++w) orow[w] += wv * xr[w];
                        }
                    } else {
                        const double* wrow = &wfc[static_cast<std::size_t>(u) * kernel_w_];
                        for (int to = 0; to < To; ++to) {
                            const double* xr = &xb[static_cast<std::size_t>(to * stride_h_ + u) * W];
                            double* orow = &ob[static_cast<std::size_t>(to) * Wo];
                            for (int w = 0; w < Wo; ++w) {
                                double acc = 0.0;
                                for (int kw = 0; kw < kernel_w_; ++kw) acc += wrow[kw] * xr[w + kw];
                                orow[w] += acc;
                            }
                        }
                    }
                }
            }
        }
    }

    cache.mode = mode;
    cache.saved.clear();
    cache.saved.push_back(std::move(xp));
    cache.saved.push_back(meta({B, C, T, W, pb}));
    return out;
}

std::vector<Tensor> Conv::backward(const Tensor& g, const Cache& cache, bool accumulate) {
    const Tensor& xp = cache.saved.at(0);
    const Tensor& m = cache.saved.at(1);
    const int B = static_cast<int>(m.data[0]), C = static_cast<int>(m.data[1]);
    const int T = static_cast<int>(m.data[2]), W = static_cast<int>(m.data[3]);
    const int pb = static_cast<int>(m.data[4]);
    const int Tp = xp.dim(2);
    const int To = g.dim(2), Wo = g.dim(3);

    Tensor dxp({B, C, Tp, W});
    const double* wts = weights_.value.data.data();
    double* dw = weights_.grad.data.data();

    for (int b = 0; b < B; ++b) {
        for (int f = 0; f < filters_; ++f) {
            const double* gb = &g.data[((static_cast<std::size_t>(b) * filters_ + f) * To) * Wo];
            if (accumulate) {
                double acc = 0.0;
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(To) * Wo; ++i) acc += gb[i];
                bias_.grad.data[f] += acc;
            }
            for (int c = 0; c < C; ++c) {
                const double* xb = &xp.data[((static_cast<std::size_t>(b) * C + c) * Tp) * W];
                double* dxb = &dxp.data[((static_cast<std::size_t>(b) * C + c) * Tp) * W];
                const double* wfc =
                    &wts[((static_cast<std::size_t>(f) * C + c) * kernel_h_) * kernel_w_];
                double* dwfc = &dw[((static_cast<std::size_t>(f) * C + c) * kernel_h_) * kernel_w_];
                for (int u = 0; u < kernel_h_; ++u) {
                    if (kernel_w_ == 1) {
                        const double wv = wfc[u];
                        double dwv = 0.0;
                        for (int to = 0; to < To; ++to) {
                            const double* xr = &xb[static_cast<std::size_t>(to * stride_h_ + u) * W];
                            double* dxr = &dxb[static_cast<std::size_t>(to * stride_h_ + u) * W];
                            const double* gr = &gb[static_cast<std::size_t>(to) * Wo];
                            for (int w = 0; w < Wo; ++w) {
                                dwv += gr[w] * xr[w];
                                dxr[w] += wv * gr[w];
                            }
                        }
                        if (accumulate) dwfc[u] += dwv;
                    } else {
                        const double* wrow = &wfc[static_cast<std::size_t>(u) * kernel_w_];
                        double* dwrow = &dwfc[static_cast<std::size_t>(u) * kernel_w_];
                        for (int to = 0; to < To; ++to) {
                            const double* xr = &xb[static_cast<std::size_t>(to * stride_h_ + u) * W];
                            double* dxr = &dxb[static_cast<std::size_t>(to * stride_h_ + u) * W];
                            const double* gr = &gb[static_cast<std::size_t>(to) * Wo];
                            for (int w = 0; w < Wo; ++w) {
                                const double gv = gr[w];
                                if (gv == 0.0) continue;
                                for (int kw = 0; kw < kernel_w_; ++kw) {
                                    if (accumulate) dwrow[kw] += gv * xr[w + kw];
                                    dxr[w + kw] += wrow[kw] * gv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // Crop the padding rows back off.
    Tensor dx({B, C, T, W});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            std::copy_n(&dxp.data[((static_cast<std::size_t>(b) * C + c) * Tp + pb) * W],
                        static_cast<std::size_t>(T) * W,
                        &dx.data[(static_cast<std::size_t>(b) * C + c) * T * W]);
    return {std::move(dx)};
}

void Conv::init_params(Rng& rng) {
    const int fan_in = in_channels_ * kernel_h_ * kernel_w_;
    const double limit = std::sqrt(6.0 / fan_in);
    for (double& w : weights_.value.data) w = rng.uniform(-limit, limit);
    bias_.value.fill(0.0);
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(int channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_("bn.gamma", {channels}),
      beta_("bn.beta", {channels}),
      running_mean_({channels}),
      running_var_({channels}) {
    gamma_.value.fill(1.0);
    running_var_.fill(1.0);
}

Tensor BatchNorm::forward(const std::vector<const Tensor*>& in, Mode mode, Rng*, Cache& cache) {
    const Tensor& x = single_input(in, "batchnorm");
    require_rank4(x, "batchnorm");
    const int B = x.dim(0), C = x.dim(1), T = x.dim(2), W = x.dim(3);
    if (C != channels_) throw std::invalid_argument("batchnorm: channel mismatch");
    const std::int64_t N = static_cast<std::int64_t>(B) * T * W;
    const std::int64_t plane = static_cast<std::int64_t>(T) * W;

    Tensor mean({C}), var({C});
    if (mode == Mode::Train) {
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            for (int b = 0; b < B; ++b) {
                const double* p = &x.data[(static_cast<std::size_t>(b) * C + c) * plane];
                for (std::int64_t i = 0; i < plane; ++i) s += p[i];
            }
            const double mu = s / static_cast<double>(N);
            double sq = 0.0;
            for (int b = 0; b < B; ++b) {
                const double* p = &x.data[(static_cast<std::size_t>(b) * C + c) * plane];
                for (std::int64_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mu;
                    sq += d * d;
                }
            }
            mean.data[c] = mu;
            var.data[c] = sq / static_cast<double>(N);  // biased, as used for normalization
            running_mean_.data[c] = momentum_ * running_mean_.data[c] + (1.0 - momentum_) * mu;
            running_var_.data[c] = momentum_ * running_var_.data[c] + (1.0 - momentum_) * var.data[c];
        }
    } else {
        mean = running_mean_;
        var = running_var_;
    }

    Tensor invstd({C});
    for (int c = 0; c < C; ++c) invstd.data[c] = 1.0 / std::sqrt(var.data[c] + eps_);

    Tensor xhat(x.shape);
    Tensor out(x.shape);
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const double mu = mean.data[c], is = invstd.data[c];
            const double gm = gamma_.value.data[c], bt = beta_.value.data[c];
            const std::size_t base = (static_cast<std::size_t>(b) * C + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                const double h = (x.data[base + i] - mu) * is;
                xhat.data[base + i] = h;
                out.data[base + i] = gm * h + bt;
            }
        }
    }

    cache.mode = mode;
    cache.saved.clear();
    cache.saved.push_back(std::move(xhat));
    cache.saved.push_back(std::move(invstd));
    return out;
}

std::vector<Tensor> BatchNorm::backward(const Tensor& g, const Cache& cache, bool accumulate) {
    const Tensor& xhat = cache.saved.at(0);
    const Tensor& invstd = cache.saved.at(1);
    const int B = g.dim(0), C = g.dim(1), T = g.dim(2), W = g.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(T) * W;
    const std::int64_t N = static_cast<std::int64_t>(B) * plane;

    Tensor dx(g.shape);
    for (int c = 0; c < C; ++c) {
        double sum_g = 0.0, sum_gh = 0.0;
        for (int b = 0; b < B; ++b) {
            const std::size_t base = (static_cast<std::size_t>(b) * C + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                sum_g += g.data[base + i];
                sum_gh += g.data[base + i] * xhat.data[base + i];
            }
        }
        if (accumulate) {
            gamma_.grad.data[c] += sum_gh;
            beta_.grad.data[c] += sum_g;
        }
        const double gm = gamma_.value.data[c], is = invstd.data[c];
        if (cache.mode == Mode::Train) {
            // Full backward through the batch statistics.
            const double k = gm * is / static_cast<double>(N);
            for (int b = 0; b < B; ++b) {
                const std::size_t base = (static_cast<std::size_t>(b) * C + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i)
                    dx.data[base + i] = k * (static_cast<double>(N) * g.data[base + i] - sum_g -
                                             xhat.data[base + i] * sum_gh);
            }
        } else {
            // Running statistics are constants.
            for (int b = 0; b < B; ++b) {
                const std::size_t base = (static_cast<std::size_t>(b) * C + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) dx.data[base + i] = gm * is * g.data[base + i];
            }
        }
    }
    return {std::move(dx)};
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::forward(const std::vector<const Tensor*>& in, Mode mode, Rng*, Cache& cache) {
    const Tensor& x = single_input(in, "relu");
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
    cache.mode = mode;
    cache.saved.clear();
    cache.saved.push_back(x);
    return out;
}

std::vector<Tensor> ReLU::backward(const Tensor& g, const Cache& cache, bool) {
    const Tensor& x = cache.saved.at(0);
    Tensor dx(g.shape);
    for (std::size_t i = 0; i < g.data.size(); ++i) dx.data[i] = x.data[i] > 0.0 ? g.data[i] : 0.0;
    return {std::move(dx)};
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
}

Tensor Dropout::forward(const std::vector<const Tensor*>& in, Mode mode, Rng* rng, Cache& cache) {
    const Tensor& x = single_input(in, "dropout");
    cache.mode = mode;
    cache.saved.clear();
    if (mode == Mode::Inference || rate_ == 0.0) return x;
    if (rng == nullptr) throw std::invalid_argument("dropout: training forward needs an rng");
    const double scale = 1.0 / (1.0 - rate_);
    Tensor mask(x.shape);
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double keep = rng->uniform() < rate_ ? 0.0 : scale;
        mask.data[i] = keep;
        out.data[i] = x.data[i] * keep;
    }
    cache.saved.push_back(std::move(mask));
    return out;
}

std::vector<Tensor> Dropout::backward(const Tensor& g, const Cache& cache, bool) {
    if (cache.saved.empty()) return {g};
    const Tensor& mask = cache.saved.at(0);
    Tensor dx(g.shape);
    for (std::size_t i = 0; i < g.data.size(); ++i) dx.data[i] = g.data[i] * mask.data[i];
    return {std::move(dx)};
}

// ---------------------------------------------------------------------------
// ConcatWidth

Tensor ConcatWidth::forward(const std::vector<const Tensor*>& in, Mode mode, Rng*, Cache& cache) {
    if (in.size() != 2) throw std::invalid_argument("concat_width: expects two inputs");
    const Tensor& a = *in[0];
    const Tensor& b = *in[1];
    require_rank4(a, "concat_width");
    require_rank4(b, "concat_width");
    if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument("concat_width: inputs disagree on [B,C,T]: " + a.shape_str() +
                                    " vs " + b.shape_str());
    const int B = a.dim(0), C = a.dim(1), T = a.dim(2), Wa = a.dim(3), Wb = b.dim(3);
    Tensor out({B, C, T, Wa + Wb});
    for (int bi = 0; bi < B; ++bi)
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < T; ++t) {
                double* o = &out.at(bi, c, t, 0);
                std::copy_n(&a.at(bi, c, t, 0), Wa, o);
                std::copy_n(&b.at(bi, c, t, 0), Wb, o + Wa);
            }
    cache.mode = mode;
    cache.saved.clear();
    cache.saved.push_back(meta({Wa, Wb}));
    return out;
}

std::vector<Tensor> ConcatWidth::backward(const Tensor& g, const Cache& cache, bool) {
    const Tensor& m = cache.saved.at(0);
    const int Wa = static_cast<int>(m.data[0]), Wb = static_cast<int>(m.data[1]);
    const int B = g.dim(0), C = g.dim(1), T = g.dim(2);
    Tensor da({B, C, T, Wa}), db({B, C, T, Wb});
    for (int bi = 0; bi < B; ++bi)
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < T; ++t) {
                const double* gr = &g.at(bi, c, t, 0);
                std::copy_n(gr, Wa, &da.at(bi, c, t, 0));
                std::copy_n(gr + Wa, Wb, &db.at(bi, c, t, 0));
            }
    return {std::move(da), std::move(db)};
}

// ---------------------------------------------------------------------------
// Gap1d

Tensor Gap1d::forward(const std::vector<const Tensor*>& in, Mode mode, Rng*, Cache& cache) {
    const Tensor& x = single_input(in, "gap1d");
    require_rank4(x, "gap1d");
    if (x.dim(3) != 1)
        throw std::invalid_argument("gap1d: expects width 1, got " + x.shape_str());
    const int B = x.dim(0), F = x.dim(1), T = x.dim(2);
    Tensor out({B, F});
    for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f) {
            double s = 0.0;
            for (int t = 0; t < T; ++t) s += x.at(b, f, t, 0);
            out.at(b, f) = s / T;
        }
    cache.mode = mode;
    cache.saved.clear();
    cache.saved.push_back(meta({T}));
    return out;
}

std::vector<Tensor> Gap1d::backward(const Tensor& g, const Cache& cache, bool) {
    const int T = static_cast<int>(cache.saved.at(0).data[0]);
    const int B = g.dim(0), F = g.dim(1);
    Tensor dx({B, F, T, 1});
    for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f) {
            const double v = g.at(b, f) / T;
            for (int t = 0; t < T; ++t) dx.at(b, f, t, 0) = v;
        }
    return {std::move(dx)};
}

// ---------------------------------------------------------------------------
// Flatten

Tensor Flatten::forward(const std::vector<const Tensor*>& in, Mode mode, Rng*, Cache& cache) {
    const Tensor& x = single_input(in, "flatten");
    require_rank4(x, "flatten");
    const int B = x.dim(0), C = x.dim(1), T = x.dim(2), W = x.dim(3);
    Tensor out({B, C * T * W}, x.data);
    cache.mode = mode;
    cache.saved.clear();
    cache.saved.push_back(meta({C, T, W}));
    return out;
}

std::vector<Tensor> Flatten::backward(const Tensor& g, const Cache& cache, bool) {
    const Tensor& m = cache.saved.at(0);
    const int C = static_cast<int>(m.data[0]), T = static_cast<int>(m.data[1]),
              W = static_cast<int>(m.data[2]);
    Tensor dx({g.dim(0), C, T, W}, g.data);
    return {std::move(dx)};
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(int in_features, int out_features, double l2)
    : in_features_(in_features),
      out_features_(out_features),
      weights_("dense.weights", {in_features, out_features}),
      bias_("dense.bias", {out_features}) {
    if (in_features <= 0 || out_features <= 0)
        throw std::invalid_argument("dense: features must be positive");
    weights_.l2 = l2;
}

Tensor Dense::forward(const std::vector<const Tensor*>& in, Mode mode, Rng*, Cache& cache) {
    const Tensor& x = single_input(in, "dense");
    if (x.rank() != 2 || x.dim(1) != in_features_)
        throw std::invalid_argument("dense: expected [B," + std::to_string(in_features_) +
                                    "], got " + x.shape_str());
    const int B = x.dim(0);
    Tensor out({B, out_features_});
    const double* wts = weights_.value.data.data();
    for (int b = 0; b < B; ++b) {
        double* o = &out.at(b, 0);
        std::copy_n(bias_.value.data.data(), out_features_, o);
        for (int i = 0; i < in_features_; ++i) {
            const double xv = x.at(b, i);
            const double* wrow = &wts[static_cast<std::size_t>(i) * out_features_];
            for (int j = 0; j < out_features_; ++j) o[j] += xv * wrow[j];
        }
    }
    cache.mode = mode;
    cache.saved.clear();
    cache.saved.push_back(x);
    return out;
}

std::vector<Tensor> Dense::backward(const Tensor& g, const Cache& cache, bool accumulate) {
    const Tensor& x = cache.saved.at(0);
    const int B = g.dim(0);
    Tensor dx({B, in_features_});
    const double* wts = weights_.value.data.data();
    for (int b = 0; b < B; ++b) {
        const double* gr = &g.at(b, 0);
        for (int i = 0; i < in_features_; ++i) {
            const double* wrow = &wts[static_cast<std::size_t>(i) * out_features_];
            double acc = 0.0;
            for (int j = 0; j < out_features_; ++j) acc += gr[j] * wrow[j];
            dx.at(b, i) = acc;
        }
        if (accumulate) {
            double* dwts = weights_.grad.data.data();
            for (int i = 0; i < in_features_; ++i) {
                const double xv = x.at(b, i);
                double* dwrow = &dwts[static_cast<std::size_t>(i) * out_features_];
                for (int j = 0; j < out_features_; ++j) dwrow[j] += xv * gr[j];
            }
            for (int j = 0; j < out_features_; ++j) bias_.grad.data[j] += gr[j];
        }
    }
    return {std::move(dx)};
}

void Dense::init_params(Rng& rng) {
    const double limit = std::sqrt(6.0 / in_features_);
    for (double& w : weights_.value.data) w = rng.uniform(-limit, limit);
    bias_.value.fill(0.0);
}

// ---------------------------------------------------------------------------
// Softmax / cross entropy

Tensor softmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) throw std::invalid_argument("softmax: expects [B,C] logits");
    const int B = logits.dim(0), C = logits.dim(1);
    Tensor p(logits.shape);
    for (int b = 0; b < B; ++b) {
        double mx = logits.at(b, 0);
        for (int c = 1; c < C; ++c) mx = std::max(mx, logits.at(b, c));
        double z = 0.0;
        for (int c = 0; c < C; ++c) {
            const double e = std::exp(logits.at(b, c) - mx);
            p.at(b, c) = e;
            z += e;
        }
        for (int c = 0; c < C; ++c) p.at(b, c) /= z;
    }
    return p;
}

namespace {
double clamped_log(double p) {
    return std::log(std::clamp(p, 1e-12, 1.0));
}
}  // namespace

double cross_entropy_loss(const Tensor& probs, const std::vector<int>& labels, int classes) {
    if (probs.rank() != 2 || probs.dim(1) != classes)
        throw std::invalid_argument("cross_entropy: probs/classes mismatch");
    const int B = probs.dim(0);
    if (static_cast<int>(labels.size()) != B)
        throw std::invalid_argument("cross_entropy: labels/batch mismatch");
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
        const int y = labels[b];
        if (y < 0 || y >= classes) throw std::out_of_range("cross_entropy: label index out of range");
        loss -= clamped_log(probs.at(b, y));
    }
    return loss / B;
}

double cross_entropy_loss(const Tensor& probs, const Tensor& onehot) {
    if (!probs.same_shape(onehot))
        throw std::invalid_argument("cross_entropy: probs/onehot shape mismatch");
    const int B = probs.dim(0), C = probs.dim(1);
    double loss = 0.0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            if (onehot.at(b, c) != 0.0) loss -= onehot.at(b, c) * clamped_log(probs.at(b, c));
    return loss / B;
}

Tensor softmax_xent_backward(const Tensor& probs, const std::vector<int>& labels) {
    const int B = probs.dim(0), C = probs.dim(1);
    Tensor g(probs.shape);
    for (int b = 0; b < B; ++b) {
        const int y = labels[b];
        if (y < 0 || y >= C) throw std::out_of_range("softmax_xent: label index out of range");
        for (int c = 0; c < C; ++c) g.at(b, c) = (probs.at(b, c) - (c == y ? 1.0 : 0.0)) / B;
    }
    return g;
}

}  // namespace xcm
