#pragma once

#include <cmath>

namespace boundedgeo {

// exp(-1/s) for s > 0, else 0.
inline double mollifier_seed(double s) { return s > 0 ? std::exp(-1.0 / s) : 0.0; }

// C^infinity step: 0 for u <= 0, 1 for u >= 1, and 1 - step(1 - u) = step(u).
inline double smooth_step(double u) {
    const double a = mollifier_seed(u), b = mollifier_seed(1.0 - u);
    return a / (a + b);
}

// Radial bump profile: 1 on [0, 1/2], 0 on [1, inf).
inline double bump_profile(double s) { return 1.0 - smooth_step(2.0 * s - 1.0); }

}  // namespace boundedgeo
