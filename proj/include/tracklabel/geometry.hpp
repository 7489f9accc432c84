#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "tracklabel/types.hpp"

namespace tracklabel {

inline double iou(const Box& a, const Box& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.left, b.left);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top, b.top);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

inline Box lerp(const Box& a, const Box& b, double t) {
    return Box{a.left + t * (b.left - a.left), a.top + t * (b.top - a.top), a.width + t * (b.width - a.width),
               a.height + t * (b.height - a.height)};
}

inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

// Fixed-precision rounding used for everything that is written to text.
inline double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace tracklabel
