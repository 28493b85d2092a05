#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "painscope/labels.hpp"
#include "painscope/tensor.hpp"

namespace painscope {

/// Axis-aligned ellipse in pixel coordinates (x right, y down).
struct Ellipse {
    double cx = 0.0;
    double cy = 0.0;
    double rx = 0.0;
    double ry = 0.0;

    bool contains(double x, double y) const {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
    }
};

struct Sample {
    Tensor image; ///< [C,S,S], values in [0,1]
    std::string subject_id;
    std::string source;
    ClassLabel hard_label = ClassLabel::NoPain;
    std::optional<int> nfcs;
    /// Ground-truth marker regions; only synthetic samples carry them.
    std::vector<Ellipse> markers;
};

/// Throws ContractError when nfcs is present and disagrees with hard_label.
void check_label_consistency(const Sample& sample);

// ---------------------------------------------------------------- manifest

/// One JSON object per line:
///   {"image_path": "...", "subject_id": "...", "source": "...",
///    "hard_label": "pain"|"no_pain", "nfcs": 0..5 | null}
/// Relative image paths resolve against the manifest's directory. Images are
/// resized to `input_size` and scaled to [0,1]. Throws IngestionError naming
/// the 1-based row on any problem.
std::vector<Sample> load_manifest(const std::string& path, int input_size, int channels = 1);

struct ManifestRow {
    std::string image_path;
    std::string subject_id;
    std::string source;
    ClassLabel hard_label = ClassLabel::NoPain;
    std::optional<int> nfcs;
};
std::string manifest_line(const ManifestRow& row);

// ---------------------------------------------------------------- synthetic

struct SyntheticConfig {
    int subjects = 30;
    int images_per_subject = 12;
    int image_size = 32;
    /// The last `unscored_subjects` subjects carry no NFCS score and a
    /// different source tag, like a second dataset without clinical scoring.
    int unscored_subjects = 0;
};

/// Face-like grayscale images. Pain subjects show 3-5 bright elliptical
/// markers at canonical facial positions, NoPain subjects 0-2. Deterministic
/// in seed; pixel values are multiples of 1/255 so PNG round-trips exactly.
std::vector<Sample> generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

/// Marker positions as fractions of the image side, in canonical order:
/// brow bulge, left eye squeeze, right eye squeeze, nasolabial furrow, open mouth.
inline constexpr double kMarkerSites[5][2] = {
    {0.50, 0.26}, {0.33, 0.40}, {0.67, 0.40}, {0.50, 0.58}, {0.50, 0.76}};

/// Boolean [S,S] mask (1 inside any marker) for a synthetic sample.
std::vector<std::uint8_t> marker_mask(const Sample& sample);

// ------------------------------------------------------------- augmentation

struct AugmentationConfig {
    int count = 20;
    double shift = 0.20;          ///< fraction of width/height
    double rotation_deg = 30.0;
    double shear = 0.15;          ///< shear factor
    double brightness_lo = 0.50;
    double brightness_hi = 1.10;
    double zoom_lo = 0.70;
    double zoom_hi = 1.50;
    bool horizontal_flip = true;

    static AugmentationConfig identity(int count = 20);
};

struct AffineParams {
    double shift_x = 0.0; ///< pixels
    double shift_y = 0.0;
    double rotation_deg = 0.0; ///< counter-clockwise as displayed (y down)
    double shear = 0.0;
    double zoom = 1.0;
    bool flip = false;
    double brightness = 1.0;
};

/// Output pixel p maps back to source q = c + A^{-1} (p - c - t) where
/// A = R * Sh * Z about the image centre c; flip mirrors the source first.
/// Bilinear sampling with reflect padding, then brightness scaling clamped
/// to [0,1].
Tensor apply_affine(const Tensor& image, const AffineParams& params);

/// Forward image of a source point under `params` (no flip), for checks.
void affine_forward_point(const AffineParams& params, int size, double x, double y,
                          double& out_x, double& out_y);

AffineParams draw_affine(const AugmentationConfig& config, int size, std::uint64_t seed);

/// `config.count` new samples, labels and metadata copied verbatim.
std::vector<Sample> augment(const Sample& sample, const AugmentationConfig& config,
                            std::uint64_t seed);

// -------------------------------------------------------------------- folds

struct FoldPlan {
    int fold_count = 10;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::string>> test_subjects;
    std::vector<std::vector<std::string>> train_subjects;
};

/// Subject-disjoint plan. Subjects are grouped by majority label, each group
/// is shuffled by seed, and the concatenation is dealt round-robin into
/// near-equal test groups; earlier folds absorb the remainder.
/// Throws ConfigError with fewer subjects than folds.
FoldPlan make_folds(const std::vector<Sample>& samples, int fold_count, std::uint64_t seed);

struct FoldIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
FoldIndices fold_indices(const std::vector<Sample>& samples, const FoldPlan& plan, int fold);

} // namespace painscope
