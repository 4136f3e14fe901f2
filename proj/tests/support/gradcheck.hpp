#pragma once

// Central finite-difference gradient checking. The evaluation functor must
// recompute the scalar objective from current parameter storage each call.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "biome/common.hpp"
#include "biome/matrix.hpp"

namespace gradcheck {

inline double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / scale;
}

struct Result {
    double max_rel_err = 0.0;
    int coords_checked = 0;
};

// Checks sampled coordinates of one tensor against (f(x+h)-f(x-h))/2h.
// analytic must be aligned with param's storage.
inline Result check_tensor(const std::function<double()>& eval, biome::Mat& param,
                           const biome::Mat& analytic, biome::Rng& rng, int max_coords,
                           double step = 1e-5) {
    Result r;
    std::vector<size_t> coords;
    if (static_cast<int>(param.size()) <= max_coords) {
        for (size_t i = 0; i < param.size(); ++i) coords.push_back(i);
    } else {
        for (int i = 0; i < max_coords; ++i) coords.push_back(rng.below(param.size()));
    }
    for (size_t c : coords) {
        const double orig = param.v[c];
        param.v[c] = orig + step;
        const double fp = eval();
        param.v[c] = orig - step;
        const double fm = eval();
        param.v[c] = orig;
        const double fd = (fp - fm) / (2.0 * step);
        const double an = analytic.empty() ? 0.0 : analytic.v[c];
        r.max_rel_err = std::max(r.max_rel_err, rel_err(an, fd));
        ++r.coords_checked;
    }
    return r;
}

}  // namespace gradcheck
