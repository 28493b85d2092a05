#pragma once

#include <string>

#include "painscope/types.hpp"

namespace painscope {

/// Neonatal Facial Coding System score: number of pain facial action units
/// observed, 0..5 on the five-unit variant of the scale.
struct NfcsScore {
    double value = 0.0;
};

inline constexpr double kNfcsMax = 5.0;
inline constexpr double kNfcsPainCutoff = 3.0;

/// 1 / (1 + exp(-score + 2.5)). Throws DomainError outside [0, 5].
double nfcs_sigmoid(NfcsScore score);

/// [1 - S(score), S(score)].
LabelDistribution nfcs_soft_label(NfcsScore score);

/// Pain iff score >= 3.
ClassLabel nfcs_hard_label(NfcsScore score);

/// Uniform smoothing over two classes: the true class keeps 1 - eps/2,
/// the other gets eps/2. Throws ContractError unless eps is in [0, 1).
LabelDistribution lsr_smooth(ClassLabel hard, double epsilon);

enum class LabelMode { Hard, Lsr, NfcsSoft };

struct SmoothingConfig {
    LabelMode mode = LabelMode::Hard;
    double epsilon = 0.0;

    /// "hard", "nfcs", or the LSR epsilon as a decimal ("0.3").
    std::string to_string() const;
    static SmoothingConfig parse(const std::string& text);
};

/// Decision rule on the Pain confidence, inclusive at the threshold.
/// Throws ContractError when threshold is outside [0, 1].
ClassLabel classify(const LabelDistribution& dist, double threshold = 0.5);

} // namespace painscope
