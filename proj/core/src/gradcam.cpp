#include "xcm/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace xcm {

namespace {

// Forward the sample, backprop the pre-softmax logit of the target class,
// and return (tap activations, tap gradients), both [1, F, H, W].
std::pair<Tensor, Tensor> tap_activation_and_gradient(Model& model, const std::string& tap,
                                                      const Tensor& sample_dt, int target_class) {
    if (sample_dt.rank() != 2)
        throw std::invalid_argument("gradcam: sample must be a [D,T] matrix");
    if (target_class < 0 || target_class >= model.spec().classes)
        throw std::out_of_range("gradcam: class index out of range");
    if (!model.has_tap(tap)) throw std::invalid_argument("gradcam: no tap named '" + tap + "'");

    Tensor batch({1, sample_dt.dim(0), sample_dt.dim(1)}, sample_dt.data);
    Trace trace;
    model.forward(model.to_input(batch), Mode::Inference, nullptr, trace);

    Tensor g_logits({1, model.spec().classes});
    g_logits.at(0, target_class) = 1.0;
    model.backward(g_logits, trace, /*accumulate_param_grads=*/false);

    return {model.tap_activation(trace, tap), model.tap_gradient(trace, tap)};
}

// ReLU(sum_k w_k A^k) with w_k the spatial mean of the gradient on map k.
Tensor weighted_combination(const Tensor& act, const Tensor& grad) {
    const int F = act.dim(1), H = act.dim(2), W = act.dim(3);
    Tensor raw({H, W});
    for (int k = 0; k < F; ++k) {
        double w = 0.0;
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) w += grad.at(0, k, i, j);
        w /= static_cast<double>(H) * W;
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) raw.at(i, j) += w * act.at(0, k, i, j);
    }
    for (double& v : raw.data) v = v > 0.0 ? v : 0.0;
    return raw;
}

// Half-pixel-centered bilinear resize of a [H, W] map.
Tensor bilinear_resize(const Tensor& src, int out_h, int out_w) {
    const int H = src.dim(0), W = src.dim(1);
    if (H == out_h && W == out_w) return src;
    Tensor dst({out_h, out_w});
    const double sy = static_cast<double>(H) / out_h;
    const double sx = static_cast<double>(W) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(H - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, H - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(W - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, W - 1);
            const double wx = fx - x0;
            dst.at(y, x) = (1 - wy) * ((1 - wx) * src.at(y0, x0) + wx * src.at(y0, x1)) +
                           wy * ((1 - wx) * src.at(y1, x0) + wx * src.at(y1, x1));
        }
    }
    return dst;
}

}  // namespace

AttributionMap normalize_map(AttributionMap map) {
    double mx = 0.0;
    for (double v : map.values.data) mx = std::max(mx, v);
    if (mx > 0.0)
        for (double& v : map.values.data) v /= mx;
    map.normalized = true;
    return map;
}

AttributionMap gradcam_variables(Model& model, const Tensor& sample_dt, int target_class) {
    auto [act, grad] = tap_activation_and_gradient(model, kTapVariables, sample_dt, target_class);
    const int T = model.spec().input_t, D = model.spec().input_d;
    if (act.dim(2) != T || act.dim(3) != D)
        throw std::invalid_argument(
            "gradcam_variables: tap is not at input resolution (" + act.shape_str() +
            "); use gradcam_generic for reduced feature maps");
    AttributionMap map;
    map.kind = MapKind::Variables;
    map.target_class = target_class;
    map.values = weighted_combination(act, grad);
    return normalize_map(std::move(map));
}

AttributionMap gradcam_time(Model& model, const Tensor& sample_dt, int target_class) {
    auto [act, grad] = tap_activation_and_gradient(model, kTapTime, sample_dt, target_class);
    const int T = model.spec().input_t, D = model.spec().input_d;
    if (act.dim(2) != T || act.dim(3) != 1)
        throw std::invalid_argument(
            "gradcam_time: tap is not at input resolution (" + act.shape_str() +
            "); use gradcam_generic for reduced feature maps");
    const Tensor column = weighted_combination(act, grad);  // [T, 1]
    AttributionMap map;
    map.kind = MapKind::Time;
    map.target_class = target_class;
    map.values = Tensor({T, D});
    // Upsampling across variables only replicates the time column.
    for (int t = 0; t < T; ++t)
        for (int d = 0; d < D; ++d) map.values.at(t, d) = column.at(t, 0);
    return normalize_map(std::move(map));
}

AttributionMap gradcam_generic(Model& model, const std::string& tap, const Tensor& sample_dt,
                               int target_class, int out_t, int out_d) {
    auto [act, grad] = tap_activation_and_gradient(model, tap, sample_dt, target_class);
    AttributionMap map;
    map.kind = tap == kTapTime ? MapKind::Time : MapKind::Variables;
    map.target_class = target_class;
    map.values = bilinear_resize(weighted_combination(act, grad), out_t, out_d);
    return normalize_map(std::move(map));
}

ExplanationMask threshold_mask(const AttributionMap& map, double threshold) {
    if (!map.normalized)
        throw std::invalid_argument("threshold_mask: map must be normalized first");
    ExplanationMask mask;
    mask.t = map.values.dim(0);
    mask.d = map.values.dim(1);
    mask.threshold = threshold;
    mask.cells.resize(map.values.data.size());
    for (std::size_t i = 0; i < map.values.data.size(); ++i)
        mask.cells[i] = map.values.data[i] > threshold ? 1 : 0;
    return mask;
}

double iou(const ExplanationMask& mask, const GroundTruthRegion& truth, IouScope scope) {
    if (truth.t_start < 0 || truth.t_end > mask.t || truth.t_start >= truth.t_end ||
        truth.dim < 0 || truth.dim >= mask.d)
        throw std::invalid_argument("iou: ground-truth region out of range");

    long inter = 0, uni = 0;
    if (scope == IouScope::TimeOnly) {
        for (int t = 0; t < mask.t; ++t) {
            bool selected = false;
            for (int d = 0; d < mask.d && !selected; ++d) selected = mask.at(t, d);
            const bool in_truth = t >= truth.t_start && t < truth.t_end;
            inter += selected && in_truth;
            uni += selected || in_truth;
        }
    } else {
        for (int t = 0; t < mask.t; ++t)
            for (int d = 0; d < mask.d; ++d) {
                const bool selected = mask.at(t, d);
                const bool in_truth = d == truth.dim && t >= truth.t_start && t < truth.t_end;
                inter += selected && in_truth;
                uni += selected || in_truth;
            }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void write_attribution_csv(const AttributionMap& map, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write attribution csv: " + path);
    const int T = map.values.dim(0), D = map.values.dim(1);
    char buf[40];
    for (int t = 0; t < T; ++t) {
        for (int d = 0; d < D; ++d) {
            if (d) f << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", map.values.at(t, d));
            f << buf;
        }
        f << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

void write_attribution_ppm(const AttributionMap& map, const std::string& path) {
    if (!map.normalized)
        throw std::invalid_argument("attribution ppm: map must be normalized first");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write attribution ppm: " + path);
    const int T = map.values.dim(0), D = map.values.dim(1);
    f << "P6\n" << T << " " << D << "\n255\n";
    std::string row(static_cast<std::size_t>(T) * 3, '\0');
    for (int d = 0; d < D; ++d) {
        for (int t = 0; t < T; ++t) {
            const double v = std::clamp(map.values.at(t, d), 0.0, 1.0);
            const unsigned char gb = static_cast<unsigned char>(std::lround(255.0 * (1.0 - v)));
            row[static_cast<std::size_t>(t) * 3 + 0] = static_cast<char>(255);
            row[static_cast<std::size_t>(t) * 3 + 1] = static_cast<char>(gb);
            row[static_cast<std::size_t>(t) * 3 + 2] = static_cast<char>(gb);
        }
        f.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace xcm
