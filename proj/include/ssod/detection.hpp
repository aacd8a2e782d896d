#pragma once

#include "ssod/geometry.hpp"

namespace ssod {

/// A box with a class and a confidence. Used for teacher predictions,
/// pseudo-labels and ground truth alike (ground truth carries score 1).
struct Detection {
    RotatedBox box;
    int label = 0;
    double score = 1.0;
    /// Index of the image the detection belongs to within its batch or stream.
    int image = 0;
    /// Ground-truth only: matchable but never counted as missed.
    bool difficult = false;
};

enum class SizeClass { small, large };

inline SizeClass size_class(const RotatedBox& box, double small_area = kSmallArea) {
    return is_small(box, small_area) ? SizeClass::small : SizeClass::large;
}

inline const char* to_string(SizeClass s) { return s == SizeClass::small ? "small" : "large"; }

}  // namespace ssod
