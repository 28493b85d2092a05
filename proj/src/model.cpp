#include "painscope/model.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "painscope/errors.hpp"
#include "painscope/ops.hpp"
#include "painscope/rng.hpp"

namespace painscope {

ModelConfig ModelConfig::compact(int input_size) {
    ModelConfig c;
    c.input_size = input_size;
    c.large_filters = 4;
    c.small_filters = 4;
    c.merge_filters = 8;
    c.dense_width = 32;
    return c;
}

namespace {

struct Field {
    const char* key;
    int ModelConfig::*int_member;
};

constexpr std::array<Field, 11> kIntFields{{
    {"input_size", &ModelConfig::input_size},
    {"input_channels", &ModelConfig::input_channels},
    {"pool_window", &ModelConfig::pool_window},
    {"pool_stride", &ModelConfig::pool_stride},
    {"large_filters", &ModelConfig::large_filters},
    {"large_kernel", &ModelConfig::large_kernel},
    {"small_filters", &ModelConfig::small_filters},
    {"small_kernel", &ModelConfig::small_kernel},
    {"merge_filters", &ModelConfig::merge_filters},
    {"merge_kernel", &ModelConfig::merge_kernel},
    {"dense_width", &ModelConfig::dense_width},
}};

int conv_extent(int extent, int kernel, bool same) {
    return same ? extent : extent - kernel + 1;
}

int conv_padding(int kernel, bool same) {
    return same ? kernel / 2 : 0;
}

int pool_extent(int extent, int window, int stride) {
    return (extent - window) / stride + 1;
}

} // namespace

std::string ModelConfig::to_text() const {
    std::ostringstream out;
    for (const auto& f : kIntFields) {
        out << f.key << '=' << this->*f.int_member << '\n';
    }
    out << "same_padding=" << (same_padding ? 1 : 0) << '\n';
    out.precision(17);
    out << "dropout_rate=" << dropout_rate << '\n';
    return out.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
    ModelConfig c;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("model config line without '=': " + line);
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        bool known = false;
        try {
            for (const auto& f : kIntFields) {
                if (key == f.key) {
                    c.*f.int_member = std::stoi(value);
                    known = true;
                }
            }
            if (key == "same_padding") {
                c.same_padding = std::stoi(value) != 0;
                known = true;
            } else if (key == "dropout_rate") {
                c.dropout_rate = std::stod(value);
                known = true;
            }
        } catch (const std::logic_error&) {
            throw ConfigError("model config value for '" + key + "' is not a number: " + value);
        }
        if (!known) {
            throw ConfigError("unknown model config key '" + key + "'");
        }
    }
    return c;
}

LayerGeometry layer_geometry(const ModelConfig& c) {
    auto positive = [](int v, const char* what) {
        if (v < 1) {
            throw ConfigError(std::string("model config: ") + what + " must be positive");
        }
    };
    positive(c.input_size, "input_size");
    positive(c.pool_window, "pool_window");
    positive(c.pool_stride, "pool_stride");
    positive(c.large_filters, "large_filters");
    positive(c.large_kernel, "large_kernel");
    positive(c.small_filters, "small_filters");
    positive(c.small_kernel, "small_kernel");
    positive(c.merge_filters, "merge_filters");
    positive(c.merge_kernel, "merge_kernel");
    positive(c.dense_width, "dense_width");
    if (c.input_channels != 1 && c.input_channels != 3) {
        throw ConfigError("model config: input_channels must be 1 or 3");
    }
    if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
        throw ConfigError("model config: dropout_rate must lie in [0, 1)");
    }
    if (c.same_padding && (c.large_kernel % 2 == 0 || c.small_kernel % 2 == 0 ||
                           c.merge_kernel % 2 == 0)) {
        throw ConfigError("model config: same padding needs odd kernel sizes");
    }

    const int s = c.input_size;
    auto pooled = [&](int extent, const char* stage) {
        if (extent < c.pool_window) {
            throw ConfigError(std::string("model config: spatial extent ") + std::to_string(extent) +
                              " at " + stage + " is smaller than pool window " +
                              std::to_string(c.pool_window));
        }
        return pool_extent(extent, c.pool_window, c.pool_stride);
    };
    auto convolved = [&](int extent, int kernel, const char* stage) {
        if (extent < kernel) {
            throw ConfigError(std::string("model config: spatial extent ") + std::to_string(extent) +
                              " at " + stage + " is smaller than kernel " + std::to_string(kernel));
        }
        return conv_extent(extent, kernel, c.same_padding);
    };

    const int branch_pool = pooled(s, "pool branch");
    const int branch_large = pooled(convolved(s, c.large_kernel, "large branch"), "large branch");
    const int branch_small = pooled(convolved(s, c.small_kernel, "small branch"), "small branch");
    if (branch_pool != branch_large || branch_pool != branch_small) {
        throw ConfigError("model config: branch extents differ (" + std::to_string(branch_pool) +
                          ", " + std::to_string(branch_large) + ", " +
                          std::to_string(branch_small) + ")");
    }
    LayerGeometry g;
    g.branch_extent = branch_pool;
    g.merged_channels = c.input_channels + c.large_filters + c.small_filters;
    g.merge_extent = pooled(convolved(g.branch_extent, c.merge_kernel, "merge conv"), "merge pool");
    g.flat_features = c.merge_filters * g.merge_extent * g.merge_extent;
    return g;
}

void ModelConfig::validate() const {
    layer_geometry(*this);
}

std::vector<std::pair<std::string, Shape>> Model::parameter_layout(const ModelConfig& c) {
    const LayerGeometry g = layer_geometry(c);
    auto u = [](int v) { return static_cast<std::size_t>(v); };
    return {
        {"large.weight", {u(c.large_filters), u(c.input_channels), u(c.large_kernel), u(c.large_kernel)}},
        {"large.bias", {u(c.large_filters)}},
        {"small.weight", {u(c.small_filters), u(c.input_channels), u(c.small_kernel), u(c.small_kernel)}},
        {"small.bias", {u(c.small_filters)}},
        {"merge.weight", {u(c.merge_filters), u(g.merged_channels), u(c.merge_kernel), u(c.merge_kernel)}},
        {"merge.bias", {u(c.merge_filters)}},
        {"hidden.weight", {u(c.dense_width), u(g.flat_features)}},
        {"hidden.bias", {u(c.dense_width)}},
        {"head.weight", {2, u(c.dense_width)}},
        {"head.bias", {2}},
    };
}

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
    Model m;
    m.config_ = config;
    Rng rng(derive_seed(seed, "init"));
    for (auto& [name, shape] : parameter_layout(config)) {
        Tensor t(shape, 0.0);
        if (shape.size() > 1) {
            std::size_t fan_in = 1;
            for (std::size_t i = 1; i < shape.size(); ++i) {
                fan_in *= shape[i];
            }
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            for (double& v : t.values()) {
                v = rng.uniform(-bound, bound);
            }
        }
        m.params_.push_back({name, std::move(t)});
    }
    return m;
}

Model Model::from_parameters(const ModelConfig& config, std::vector<NamedTensor> params) {
    const auto layout = parameter_layout(config);
    if (params.size() != layout.size()) {
        throw DimensionError("model expects " + std::to_string(layout.size()) + " parameters, got " +
                             std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (params[i].name != layout[i].first) {
            throw DimensionError("parameter " + std::to_string(i) + " should be '" +
                                 layout[i].first + "', got '" + params[i].name + "'");
        }
        if (params[i].tensor.shape() != layout[i].second) {
            throw DimensionError("parameter '" + params[i].name + "' has shape " +
                                 shape_string(params[i].tensor.shape()) + ", expected " +
                                 shape_string(layout[i].second));
        }
    }
    Model m;
    m.config_ = config;
    m.params_ = std::move(params);
    return m;
}

Tensor& Model::parameter(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) {
            return p.tensor;
        }
    }
    throw ContractError("no parameter named '" + name + "'");
}

const Tensor& Model::parameter(const std::string& name) const {
    return const_cast<Model*>(this)->parameter(name);
}

void Model::check_input(const Tensor& image) const {
    const auto s = static_cast<std::size_t>(config_.input_size);
    const Shape expected{static_cast<std::size_t>(config_.input_channels), s, s};
    if (image.shape() != expected) {
        throw DimensionError("model input must be " + shape_string(expected) + ", got " +
                             shape_string(image.shape()));
    }
}

ForwardResult Model::forward(Tape& tape, Var image, Mode mode, Rng* rng,
                             bool track_parameters) const {
    check_input(tape.value(image));
    const ModelConfig& c = config_;
    ForwardResult r;
    for (const auto& p : params_) {
        r.parameters.push_back(tape.parameter(p.tensor, track_parameters));
    }
    auto param = [&](std::size_t i) { return r.parameters[i]; };

    const Var pool_branch = maxpool2d(tape, image, c.pool_window, c.pool_stride);
    const Var large = maxpool2d(
        tape,
        relu(tape, conv2d(tape, image, param(0), param(1), 1, conv_padding(c.large_kernel, c.same_padding))),
        c.pool_window, c.pool_stride);
    const Var small = maxpool2d(
        tape,
        relu(tape, conv2d(tape, image, param(2), param(3), 1, conv_padding(c.small_kernel, c.same_padding))),
        c.pool_window, c.pool_stride);
    const std::array<Var, 3> branches{pool_branch, large, small};
    const Var merged = concat_channels(tape, branches);

    r.last_conv = relu(tape, conv2d(tape, merged, param(4), param(5), 1,
                                    conv_padding(c.merge_kernel, c.same_padding)));
    const Var pooled = maxpool2d(tape, r.last_conv, c.pool_window, c.pool_stride);
    Var hidden = relu(tape, dense(tape, flatten(tape, pooled), param(6), param(7)));
    hidden = dropout(tape, hidden, c.dropout_rate, mode == Mode::Train, rng);
    r.logits = dense(tape, hidden, param(8), param(9));
    r.probabilities = softmax(tape, r.logits);
    return r;
}

std::vector<double> predict_logits(const Model& model, const Tensor& image) {
    Tape tape;
    const Var x = tape.constant(image);
    const auto r = model.forward(tape, x, Mode::Eval, nullptr, false);
    const auto v = tape.value(r.logits).values();
    return {v.begin(), v.end()};
}

LabelDistribution predict(const Model& model, const Tensor& image) {
    Tape tape;
    const Var x = tape.constant(image);
    const auto r = model.forward(tape, x, Mode::Eval, nullptr, false);
    const Tensor& p = tape.value(r.probabilities);
    return {p[0], p[1]};
}

} // namespace painscope
