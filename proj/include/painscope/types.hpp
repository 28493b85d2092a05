#pragma once

#include <string>
#include <string_view>

namespace painscope {

enum class ClassLabel { NoPain = 0, Pain = 1 };

inline constexpr int class_index(ClassLabel c) { return static_cast<int>(c); }

/// "pain" / "no_pain", the manifest spelling.
std::string_view to_string(ClassLabel c);
/// Accepts the manifest spelling; throws ContractError otherwise.
ClassLabel parse_class_label(std::string_view text);

/// Two-class probability vector [p(NoPain), p(Pain)].
struct LabelDistribution {
    double p_no_pain = 0.0;
    double p_pain = 0.0;

    double operator[](int k) const { return k == 0 ? p_no_pain : p_pain; }

    static LabelDistribution one_hot(ClassLabel c) {
        return c == ClassLabel::Pain ? LabelDistribution{0.0, 1.0} : LabelDistribution{1.0, 0.0};
    }

    friend bool operator==(const LabelDistribution&, const LabelDistribution&) = default;
};

} // namespace painscope
