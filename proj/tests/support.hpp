#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "painscope/autodiff.hpp"
#include "painscope/model.hpp"
#include "painscope/ops.hpp"

namespace testing {

using namespace painscope;

inline Tensor random_tensor(Shape shape, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) {
        v = dist(gen);
    }
    return t;
}

/// Values bounded away from zero, so relu kinks are never crossed by a
/// finite-difference step.
inline Tensor random_away_from_zero(Shape shape, std::mt19937_64& gen, double gap = 0.05) {
    std::uniform_real_distribution<double> mag(gap, 1.0);
    std::bernoulli_distribution sign(0.5);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) {
        v = sign(gen) ? mag(gen) : -mag(gen);
    }
    return t;
}

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Builds a scalar loss from leaf handles.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double evaluate(const LossBuilder& build, const std::vector<Tensor>& leaves) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : leaves) {
        vars.push_back(tape.constant(t));
    }
    return tape.value(build(tape, vars))[0];
}

struct GradCheck {
    double max_error = 0.0;
    std::size_t checked = 0;
    /// Coordinates skipped because the two one-sided slopes disagree,
    /// i.e. the step straddles a relu kink or a pooling tie.
    std::size_t skipped_kinks = 0;
};

/// Central differences (step h) against backward() on every coordinate of
/// every leaf, or on `per_leaf` random coordinates when nonzero.
inline GradCheck check_gradients(const LossBuilder& build, std::vector<Tensor> leaves,
                                 std::mt19937_64& gen, std::size_t per_leaf = 0, double h = 1e-4,
                                 bool skip_kinks = false) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : leaves) {
        vars.push_back(tape.variable(t));
    }
    const Var loss = build(tape, vars);
    backward(tape, loss);
    const double f0 = tape.value(loss)[0];

    GradCheck out;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        const auto grad = tape.grad(vars[l]);
        std::vector<std::size_t> coords(leaves[l].size());
        for (std::size_t i = 0; i < coords.size(); ++i) {
            coords[i] = i;
        }
        if (per_leaf > 0 && per_leaf < coords.size()) {
            std::shuffle(coords.begin(), coords.end(), gen);
            coords.resize(per_leaf);
        }
        for (std::size_t i : coords) {
            const double x = leaves[l][i];
            leaves[l][i] = x + h;
            const double fp = evaluate(build, leaves);
            leaves[l][i] = x - h;
            const double fm = evaluate(build, leaves);
            leaves[l][i] = x;
            const double numeric = (fp - fm) / (2 * h);
            if (skip_kinks) {
                const double right = (fp - f0) / h, left = (f0 - fm) / h;
                if (relative_error(right, left) > 1e-3) {
                    ++out.skipped_kinks;
                    continue;
                }
            }
            const double analytic = grad.empty() ? 0.0 : grad[i];
            out.max_error = std::max(out.max_error, relative_error(analytic, numeric));
            ++out.checked;
        }
    }
    return out;
}

inline double model_loss(const Model& model, const Tensor& image, const LabelDistribution& target) {
    Tape tape;
    const auto fwd = model.forward(tape, tape.constant(image), Mode::Eval, nullptr, false);
    return tape.value(cross_entropy_soft(tape, fwd.probabilities, target))[0];
}

/// Composed check through Model::forward: `per_param` random coordinates of
/// every parameter tensor and of the image. A coordinate is skipped as a kink
/// when its one-sided slopes differ by more than `kink_tol` relative; the
/// central difference of a kept coordinate is then off by at most about
/// kink_tol / 2 from either side.
inline GradCheck check_model_gradients(const Model& model, const Tensor& image,
                                       const LabelDistribution& target, std::mt19937_64& gen,
                                       std::size_t per_param, double h = 1e-5,
                                       double kink_tol = 1e-3) {
    Tape tape;
    const Var x = tape.variable(image);
    const auto fwd = model.forward(tape, x, Mode::Eval, nullptr, true);
    const Var loss = cross_entropy_soft(tape, fwd.probabilities, target);
    backward(tape, loss);
    const double f0 = tape.value(loss)[0];

    GradCheck out;
    Model probe = model;
    Tensor probe_image = image;
    const std::size_t n_params = probe.parameters().size();
    for (std::size_t l = 0; l <= n_params; ++l) {
        Tensor& leaf = l < n_params ? probe.parameters()[l].tensor : probe_image;
        const auto grad = tape.grad(l < n_params ? fwd.parameters[l] : x);
        std::uniform_int_distribution<std::size_t> pick(0, leaf.size() - 1);
        for (std::size_t k = 0; k < per_param; ++k) {
            const std::size_t i = pick(gen);
            const double v = leaf[i];
            leaf[i] = v + h;
            const double fp = model_loss(probe, probe_image, target);
            leaf[i] = v - h;
            const double fm = model_loss(probe, probe_image, target);
            leaf[i] = v;
            const double right = (fp - f0) / h, left = (f0 - fm) / h;
            if (relative_error(right, left) > kink_tol && std::abs(right - left) > 1e-8) {
                ++out.skipped_kinks;
                continue;
            }
            const double numeric = (fp - fm) / (2 * h);
            const double analytic = grad.empty() ? 0.0 : grad[i];
            out.max_error = std::max(out.max_error, relative_error(analytic, numeric));
            ++out.checked;
        }
    }
    return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("painscope_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing
