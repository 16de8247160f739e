#pragma once

#include <cmath>
#include <cstddef>

#include "lorentz/errors.hpp"
#include "lorentz/pmap.hpp"

namespace lorentz::detail {

inline constexpr int kMaxNudges = 100;

// One step of the map at x; a grazing collision nudges x.s by 1e-7 toward 0
// and retries. Each nudge is counted.
inline CollisionRecord guarded_step(const CollisionMap& map, PhasePoint& x, std::size_t& nudges) {
    for (int attempt = 0;; ++attempt) {
        try {
            return map.step(x);
        } catch (const GrazingError&) {
            if (attempt >= kMaxNudges) throw;
            ++nudges;
            x.s -= (x.s >= 0.0 ? 1.0 : -1.0) * 1e-7;
        }
    }
}

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    void merge(const Moments& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        n += o.n;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    double variance() const {
        if (n < 2) return 0.0;
        const double m = mean();
        return std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
    }
    double stderr_of_mean() const { return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

}  // namespace lorentz::detail
