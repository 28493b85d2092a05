#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "painscope/model.hpp"
#include "painscope/types.hpp"

namespace painscope {

enum class AttributionMethod { GradCam, IntegratedGradients };
std::string to_string(AttributionMethod method);

/// Importance grid aligned with the input's spatial extent, row-major [H,W].
struct AttributionMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;
    ClassLabel target = ClassLabel::Pain;
    AttributionMethod method = AttributionMethod::GradCam;
    /// Model's Pain confidence on the explained image.
    double confidence = 0.0;
    /// Set when no positive evidence existed and the map is all zeros.
    bool all_zero = false;

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Grad-CAM from last-conv activations [C,h,w] and the gradient of the target
/// score with respect to them: ReLU(sum_c mean(grad_c) * A_c), bilinearly
/// upsampled to out_h x out_w and divided by its maximum when positive.
AttributionMap grad_cam_from(const Tensor& activations, std::span<const double> gradients,
                             int out_height, int out_width);

/// Grad-CAM on the model's last conv layer for the target-class logit.
AttributionMap grad_cam(const Model& model, const Tensor& image, ClassLabel target);

inline constexpr int kDefaultIgSteps = 256;

/// Scalar function and its input gradient: returns F(x), writes dF/dx.
using ScalarGradientFn = std::function<double(const Tensor& x, std::vector<double>& gradient)>;

/// (x_i - x'_i) / m * sum_{k=1..m} dF(x' + k/m (x - x'))/dx_i, per element.
/// Throws DimensionError on shape mismatch, ContractError when steps < 1.
Tensor integrated_gradients(const ScalarGradientFn& f, const Tensor& image, const Tensor& baseline,
                            int steps = kDefaultIgSteps);

/// Target-class logit and its input gradient for a model in eval mode.
ScalarGradientFn logit_function(const Model& model, ClassLabel target);

/// Integrated Gradients toward the target logit, summed over channels into
/// a [H,W] map. An empty baseline means all zeros.
AttributionMap integrated_gradients(const Model& model, const Tensor& image, ClassLabel target,
                                    const Tensor& baseline = {}, int steps = kDefaultIgSteps);

struct ExportedFiles {
    std::string mask_png;
    std::string overlay_png;
    std::string values_csv;
};

/// Writes `<stem>_mask.png` (|map| scaled by its maximum, gray),
/// `<stem>_overlay.png` (heat colours blended 50/50 over the image) and
/// `<stem>.csv` (raw values). Throws IoError when a file cannot be written.
ExportedFiles export_attribution(const AttributionMap& map, const Tensor& image,
                                 const std::string& stem);

/// Reads a grid written by export_attribution.
std::vector<std::vector<double>> read_attribution_csv(const std::string& path);

} // namespace painscope
