#ifndef XCM_GRADCAM_HPP
#define XCM_GRADCAM_HPP

#include <string>

#include "xcm/dataset.hpp"
#include "xcm/model.hpp"

namespace xcm {

enum class MapKind { Variables, Time };

// A [T, D] heatmap of nonnegative relevance values for one (sample, class)
// pair; `normalized` means max-scaled into [0, 1].
struct AttributionMap {
    MapKind kind = MapKind::Variables;
    Tensor values;  // [T, D]
    int target_class = 0;
    bool normalized = false;
};

struct ExplanationMask {
    std::vector<std::uint8_t> cells;  // row-major [T, D], 1 = selected
    int t = 0, d = 0;
    double threshold = 0.0;

    bool at(int ti, int di) const { return cells[static_cast<std::size_t>(ti) * d + di] != 0; }
};

// Observed-variables map: feature-map weights are the gradient of the
// pre-softmax class score, average-pooled over (T, D); the weighted sum of
// the tap activations is rectified and max-normalized. Produced at exactly
// (T, D) — no interpolation on this path.
AttributionMap gradcam_variables(Model& model, const Tensor& sample_dt, int target_class);

// Time map: same construction on the [F, T, 1] time-block tap, replicated
// across the D columns.
AttributionMap gradcam_time(Model& model, const Tensor& sample_dt, int target_class);

// Generic path for taps with reduced spatial extent (stride-2 feature maps):
// rectified weighted combination, then half-pixel-centered bilinear
// interpolation up to (T, D), then max-normalization.
AttributionMap gradcam_generic(Model& model, const std::string& tap, const Tensor& sample_dt,
                               int target_class, int out_t, int out_d);

// Max-normalizes into [0, 1]; a zero map stays zero. Idempotent.
AttributionMap normalize_map(AttributionMap map);

// Strict greater-than threshold on a normalized map.
ExplanationMask threshold_mask(const AttributionMap& map, double threshold = 0.6);

enum class IouScope { TimeOnly, Cells };

// Intersection-over-union between a mask and a ground-truth region. TimeOnly
// projects the mask onto the time axis (a timestamp counts if any dimension
// is selected); Cells compares (t, d) cells. Empty union scores 0.
double iou(const ExplanationMask& mask, const GroundTruthRegion& truth, IouScope scope);

// CSV: one row per timestamp, one column per dimension, %.17g values.
void write_attribution_csv(const AttributionMap& map, const std::string& path);

// Binary P6 PPM, white-to-red: v -> (255, round(255*(1-v)), round(255*(1-v))).
// Image is T pixels wide (time) by D pixels tall (dimensions).
void write_attribution_ppm(const AttributionMap& map, const std::string& path);

}  // namespace xcm

#endif
