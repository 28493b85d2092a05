#include "painscope/labels.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "painscope/errors.hpp"

namespace painscope {

std::string_view to_string(ClassLabel c) {
    return c == ClassLabel::Pain ? "pain" : "no_pain";
}

ClassLabel parse_class_label(std::string_view text) {
    if (text == "pain") {
        return ClassLabel::Pain;
    }
    if (text == "no_pain") {
        return ClassLabel::NoPain;
    }
    throw ContractError("unknown class label '" + std::string(text) + "'");
}

double nfcs_sigmoid(NfcsScore score) {
    if (!(score.value >= 0.0 && score.value <= kNfcsMax)) {
        throw DomainError("NFCS score " + std::to_string(score.value) + " outside [0, 5]");
    }
    return 1.0 / (1.0 + std::exp(-score.value + 2.5));
}

LabelDistribution nfcs_soft_label(NfcsScore score) {
    const double s = nfcs_sigmoid(score);
    return {1.0 - s, s};
}

ClassLabel nfcs_hard_label(NfcsScore score) {
    return score.value >= kNfcsPainCutoff ? ClassLabel::Pain : ClassLabel::NoPain;
}

LabelDistribution lsr_smooth(ClassLabel hard, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw ContractError("label smoothing epsilon must lie in [0, 1), got " +
                            std::to_string(epsilon));
    }
    const double off = epsilon / 2.0;
    const double on = 1.0 - epsilon + off;
    return hard == ClassLabel::Pain ? LabelDistribution{off, on} : LabelDistribution{on, off};
}

ClassLabel classify(const LabelDistribution& dist, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ContractError("decision threshold must lie in [0, 1]");
    }
    return dist.p_pain >= threshold ? ClassLabel::Pain : ClassLabel::NoPain;
}

std::string SmoothingConfig::to_string() const {
    switch (mode) {
    case LabelMode::Hard:
        return "hard";
    case LabelMode::NfcsSoft:
        return "nfcs";
    case LabelMode::Lsr:
        break;
    }
    std::ostringstream out;
    out << epsilon;
    return out.str();
}

SmoothingConfig SmoothingConfig::parse(const std::string& text) {
    if (text == "hard" || text == "none") {
        return {LabelMode::Hard, 0.0};
    }
    if (text == "nfcs") {
        return {LabelMode::NfcsSoft, 0.0};
    }
    double eps = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), eps);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError("label smoothing must be 'hard', 'nfcs' or an epsilon, got '" + text + "'");
    }
    if (!(eps >= 0.0 && eps < 1.0)) {
        throw ConfigError("label smoothing epsilon must lie in [0, 1), got '" + text + "'");
    }
    if (eps == 0.0) {
        return {LabelMode::Hard, 0.0};
    }
    return {LabelMode::Lsr, eps};
}

} // namespace painscope
