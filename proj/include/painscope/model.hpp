#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "painscope/autodiff.hpp"
#include "painscope/types.hpp"

namespace painscope {

class Rng;

/// Shape of the three-branch classifier.
///
/// input -> { maxpool | conv(large)+relu+pool | conv(small)+relu+pool }
///       -> concat -> conv(merge)+relu+pool -> dense(hidden)+relu+dropout
///       -> dense(2) -> softmax
///
/// The merge conv is the last convolutional layer and the Grad-CAM hook.
/// Defaults are the reference widths (64 / 32 / 64 filters, hidden 8).
struct ModelConfig {
    int input_size = 120;
    int input_channels = 1;
    int pool_window = 2;
    int pool_stride = 2;
    int large_filters = 64;
    int large_kernel = 5;
    int small_filters = 32;
    int small_kernel = 3;
    int merge_filters = 64;
    int merge_kernel = 3;
    /// Zero-pad convolutions to keep spatial extent ("same"); otherwise "valid".
    bool same_padding = true;
    int dense_width = 8;
    double dropout_rate = 0.5;

    /// Desk-scale widths used for synthetic rehearsals.
    static ModelConfig compact(int input_size);

    /// Canonical `key=value` lines, stable across runs.
    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);

    /// Throws ConfigError when the layer chain cannot be realized.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Spatial extents through the network for a given config.
struct LayerGeometry {
    int branch_extent = 0;
    int merge_extent = 0;
    int merged_channels = 0;
    int flat_features = 0;
};
LayerGeometry layer_geometry(const ModelConfig& config);

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

enum class Mode { Eval, Train };

struct ForwardResult {
    Var logits;
    Var probabilities;
    /// Post-ReLU activations of the last conv layer, [F, h, w].
    Var last_conv;
    /// Tape handles of the parameters, in Model::parameters() order.
    std::vector<Var> parameters;
};

class Model {
public:
    /// He-uniform weights from `seed`, zero biases. Throws ConfigError.
    static Model build(const ModelConfig& config, std::uint64_t seed);
    /// Assembles a model from stored parameters; shapes must match config.
    static Model from_parameters(const ModelConfig& config, std::vector<NamedTensor> params);

    const ModelConfig& config() const noexcept { return config_; }
    std::vector<NamedTensor>& parameters() noexcept { return params_; }
    const std::vector<NamedTensor>& parameters() const noexcept { return params_; }
    Tensor& parameter(const std::string& name);
    const Tensor& parameter(const std::string& name) const;

    /// Expected parameter names and shapes for a config, in storage order.
    static std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config);

    /// Records the forward pass on `tape`. `track_parameters` controls
    /// whether parameter gradients are computed on backward. Train mode
    /// applies dropout drawn from `rng`.
    ForwardResult forward(Tape& tape, Var image, Mode mode = Mode::Eval, Rng* rng = nullptr,
                          bool track_parameters = true) const;

    /// Throws DimensionError unless image is [channels, size, size].
    void check_input(const Tensor& image) const;

private:
    ModelConfig config_;
    std::vector<NamedTensor> params_;
};

/// Eval-mode class probabilities [p(NoPain), p(Pain)].
LabelDistribution predict(const Model& model, const Tensor& image);

/// Eval-mode logits.
std::vector<double> predict_logits(const Model& model, const Tensor& image);

/// Persisted best-epoch snapshot of a model.
struct Checkpoint {
    Model model;
    int epoch = 0;
    double test_loss = 0.0;
    std::map<std::string, std::string> metadata;
};

/// Versioned little-endian binary layout:
///   8-byte magic "PSCNNCKP", u32 version,
///   u32 length + canonical config text,
///   u32 epoch, f64 test_loss,
///   u32 count + (u32 len key, key, u32 len value, value) metadata,
///   u32 count + (u32 len name, name, u32 rank, u32 dims..., u64 n, n x f32) parameters.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
/// Throws FormatError naming the offending field; IoError when unreadable.
Checkpoint load_checkpoint(const std::string& path);

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes);

inline constexpr char kCheckpointMagic[8] = {'P', 'S', 'C', 'N', 'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

} // namespace painscope
