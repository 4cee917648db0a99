#pragma once

// Central finite differences, independent of the tape.

#include <cmath>
#include <functional>
#include <vector>

namespace iakd::test {

inline double central_difference(double& x, const std::function<double()>& f, double h = 1e-5) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero gradients from
// dominating with pure rounding noise.
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

} // namespace iakd::test
