#include "painscope/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "painscope/errors.hpp"
#include "painscope/image.hpp"
#include "painscope/ops.hpp"

namespace painscope {

std::string to_string(AttributionMethod method) {
    return method == AttributionMethod::GradCam ? "gradcam" : "ig";
}

AttributionMap grad_cam_from(const Tensor& activations, std::span<const double> gradients,
                             int out_height, int out_width) {
    if (activations.rank() != 3 || gradients.size() != activations.size()) {
        throw DimensionError("grad_cam: activations and gradients must be matching [C,h,w]");
    }
    const std::size_t C = activations.dim(0), h = activations.dim(1), w = activations.dim(2);
    const std::size_t plane = h * w;
    std::vector<double> cam(plane, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        double weight = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            weight += gradients[c * plane + i];
        }
        weight /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            cam[i] += weight * activations[c * plane + i];
        }
    }
    for (double& v : cam) {
        v = std::max(v, 0.0);
    }

    AttributionMap map;
    map.method = AttributionMethod::GradCam;
    map.height = out_height;
    map.width = out_width;
    map.values = resize_plane(cam, static_cast<int>(h), static_cast<int>(w), out_height, out_width);
    const double top = *std::max_element(map.values.begin(), map.values.end());
    if (top > 0.0) {
        for (double& v : map.values) {
            v = std::max(v / top, 0.0);
        }
    } else {
        std::fill(map.values.begin(), map.values.end(), 0.0);
        map.all_zero = true;
    }
    return map;
}

AttributionMap grad_cam(const Model& model, const Tensor& image, ClassLabel target) {
    Tape tape;
    // The image is tracked only so the activations downstream of it are.
    const Var x = tape.variable(image);
    const auto fwd = model.forward(tape, x, Mode::Eval, nullptr, false);
    const Var score = select(tape, fwd.logits, static_cast<std::size_t>(class_index(target)));
    backward(tape, score);
    const Tensor& acts = tape.value(fwd.last_conv);
    std::vector<double> grads(acts.size(), 0.0);
    const auto g = tape.grad(fwd.last_conv);
    std::copy(g.begin(), g.end(), grads.begin());

    AttributionMap map = grad_cam_from(acts, grads, static_cast<int>(image.dim(1)),
                                       static_cast<int>(image.dim(2)));
    map.target = target;
    map.confidence = tape.value(fwd.probabilities)[1];
    return map;
}

Tensor integrated_gradients(const ScalarGradientFn& f, const Tensor& image, const Tensor& baseline,
                            int steps) {
    if (image.shape() != baseline.shape()) {
        throw DimensionError("integrated_gradients: baseline shape " +
                             shape_string(baseline.shape()) + " != image shape " +
                             shape_string(image.shape()));
    }
    if (steps < 1) {
        throw ContractError("integrated_gradients needs at least one step");
    }
    const std::size_t n = image.size();
    std::vector<double> total(n, 0.0);
    std::vector<double> grad(n, 0.0);
    Tensor point(image.shape());
    for (int k = 1; k <= steps; ++k) {
        const double alpha = static_cast<double>(k) / steps;
        for (std::size_t i = 0; i < n; ++i) {
            point[i] = baseline[i] + alpha * (image[i] - baseline[i]);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        f(point, grad);
        for (std::size_t i = 0; i < n; ++i) {
            total[i] += grad[i];
        }
    }
    Tensor attributions(image.shape());
    for (std::size_t i = 0; i < n; ++i) {
        attributions[i] = (image[i] - baseline[i]) * total[i] / steps;
    }
    return attributions;
}

ScalarGradientFn logit_function(const Model& model, ClassLabel target) {
    return [&model, target](const Tensor& x, std::vector<double>& gradient) {
        Tape tape;
        const Var in = tape.variable(x);
        const auto fwd = model.forward(tape, in, Mode::Eval, nullptr, false);
        const Var score = select(tape, fwd.logits, static_cast<std::size_t>(class_index(target)));
        backward(tape, score);
        const auto g = tape.grad(in);
        gradient.assign(g.begin(), g.end());
        if (gradient.empty()) {
            gradient.assign(x.size(), 0.0);
        }
        return tape.value(score)[0];
    };
}

AttributionMap integrated_gradients(const Model& model, const Tensor& image, ClassLabel target,
                                    const Tensor& baseline, int steps) {
    model.check_input(image);
    const Tensor zero_baseline = baseline.size() == 0 ? Tensor(image.shape(), 0.0) : baseline;
    const Tensor attr = integrated_gradients(logit_function(model, target), image, zero_baseline, steps);

    AttributionMap map;
    map.method = AttributionMethod::IntegratedGradients;
    map.target = target;
    map.height = static_cast<int>(image.dim(1));
    map.width = static_cast<int>(image.dim(2));
    map.values.assign(static_cast<std::size_t>(map.height) * map.width, 0.0);
    const std::size_t plane = map.values.size();
    for (std::size_t c = 0; c < image.dim(0); ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            map.values[i] += attr[c * plane + i];
        }
    }
    map.all_zero = std::all_of(map.values.begin(), map.values.end(), [](double v) { return v == 0.0; });
    map.confidence = predict(model, image).p_pain;
    return map;
}

namespace {

// Piecewise-linear blue -> cyan -> yellow -> red ramp.
void heat_colour(double v, double rgb[3]) {
    v = std::clamp(v, 0.0, 1.0);
    static constexpr double stops[4][3] = {{0, 0, 0.5}, {0, 1, 1}, {1, 1, 0}, {1, 0, 0}};
    const double pos = v * 3.0;
    const int i = std::min(2, static_cast<int>(pos));
    const double t = pos - i;
    for (int c = 0; c < 3; ++c) {
        rgb[c] = stops[i][c] * (1.0 - t) + stops[i + 1][c] * t;
    }
}

} // namespace

ExportedFiles export_attribution(const AttributionMap& map, const Tensor& image,
                                 const std::string& stem) {
    if (image.rank() != 3 || static_cast<int>(image.dim(1)) != map.height ||
        static_cast<int>(image.dim(2)) != map.width) {
        throw DimensionError("export_attribution: map and image extents differ");
    }
    ExportedFiles files{stem + "_mask.png", stem + "_overlay.png", stem + ".csv"};

    double top = 0.0;
    for (double v : map.values) {
        top = std::max(top, std::abs(v));
    }
    std::vector<double> norm(map.values.size(), 0.0);
    if (top > 0.0) {
        for (std::size_t i = 0; i < norm.size(); ++i) {
            norm[i] = std::abs(map.values[i]) / top;
        }
    }

    const std::size_t C = image.dim(0);
    Image8 mask{map.width, map.height, 1, {}};
    Image8 overlay{map.width, map.height, 3, {}};
    mask.pixels.resize(norm.size());
    overlay.pixels.resize(norm.size() * 3);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * map.width + x;
            mask.pixels[i] = static_cast<std::uint8_t>(std::lround(norm[i] * 255.0));
            double heat[3];
            heat_colour(norm[i], heat);
            for (int c = 0; c < 3; ++c) {
                const double base = image.at(C == 3 ? static_cast<std::size_t>(c) : 0,
                                             static_cast<std::size_t>(y), static_cast<std::size_t>(x));
                const double v = std::clamp(0.5 * base + 0.5 * heat[c], 0.0, 1.0);
                overlay.pixels[i * 3 + static_cast<std::size_t>(c)] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    write_png(mask, files.mask_png);
    write_png(overlay, files.overlay_png);

    std::ofstream csv(files.values_csv);
    if (!csv) {
        throw IoError("cannot write " + files.values_csv);
    }
    char buf[32];
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            std::snprintf(buf, sizeof(buf), "%.17g", map.at(y, x));
            csv << (x ? "," : "") << buf;
        }
        csv << '\n';
    }
    if (!csv) {
        throw IoError("failed writing " + files.values_csv);
    }
    return files;
}

std::vector<std::vector<double>> read_attribution_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::vector<std::vector<double>> grid;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            row.push_back(std::stod(cell));
        }
        grid.push_back(std::move(row));
    }
    return grid;
}

} // namespace painscope
