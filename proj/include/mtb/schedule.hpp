#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mtb/errors.hpp"

namespace mtb {

/// Doubling batch layout over [1, T]: an initial forced batch of
/// ceil(q ln T) steps, then batches that double in length until T.
struct BatchSchedule {
    std::int64_t horizon = 0;
    std::int64_t b0_size = 0;
    int n_batches = 0;  // batches after the forced one

    /// End (inclusive) of batch m; batch 0 is the forced batch.
    std::int64_t batch_end(int m) const {
        if (m >= n_batches) return horizon;
        return std::min<std::int64_t>(horizon, b0_size << m);
    }

    std::int64_t batch_begin(int m) const {  // inclusive
        return m == 0 ? 1 : batch_end(m - 1) + 1;
    }

    /// Batch index containing step t in [1, T].
    int batch_of(std::int64_t t) const {
        if (t <= b0_size) return 0;
        int m = 1;
        while (batch_end(m) < t) ++m;
        return m;
    }

    bool is_batch_end(std::int64_t t) const {
        if (t == horizon) return true;
        if (t < b0_size) return false;
        std::int64_t end = b0_size;
        while (end < t) end <<= 1;
        return end == t;
    }
};

inline BatchSchedule build_schedule(std::int64_t horizon, double q) {
    if (horizon < 2) throw InvalidConfig("build_schedule: horizon must be at least 2");
    if (!(q > 0.0)) throw InvalidConfig("build_schedule: q must be positive");
    const double exact_b0 = q * std::log(static_cast<double>(horizon));
    if (exact_b0 < 1.0) throw InvalidConfig("build_schedule: q ln T is below one step");
    if (exact_b0 > static_cast<double>(horizon)) {
        throw InvalidConfig("build_schedule: forced batch q ln T = " + std::to_string(exact_b0) +
                            " leaves no room before T = " + std::to_string(horizon));
    }
    BatchSchedule s;
    s.horizon = horizon;
    s.b0_size = static_cast<std::int64_t>(std::ceil(exact_b0));
    s.n_batches = static_cast<int>(std::ceil(std::log2(static_cast<double>(horizon) / exact_b0)));
    if (s.n_batches < 1) s.n_batches = 1;
    // guard against a floating-point ceil landing one batch short
    while ((s.b0_size << (s.n_batches - 1)) >= horizon && s.n_batches > 1) --s.n_batches;
    while ((s.b0_size << s.n_batches) < horizon) ++s.n_batches;
    return s;
}

}  // namespace mtb
