#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <vector>

#include "mtb/linreg.hpp"
#include "mtb/rng.hpp"

using mtb::TrimFraction;
using mtb::trimmed_mean;

TEST_CASE("constant input is returned exactly") {
    std::vector<double> v(5, 2.0);
    REQUIRE(trimmed_mean(v, TrimFraction(0.2)) == 2.0);
}

TEST_CASE("zero trim reduces to the plain mean") {
    std::vector<double> v{1.0, 2.0, 3.0};
    REQUIRE(trimmed_mean(v, TrimFraction(0.0)) == Catch::Approx(2.0));
}

TEST_CASE("one outlier is dropped from each end") {
    // oracle: sort, drop one from each end, average {2, 3, 4}
    std::vector<double> v{1.0, 2.0, 3.0, 4.0, 100.0};
    REQUIRE(trimmed_mean(v, TrimFraction(0.2)) == Catch::Approx(3.0));
}

TEST_CASE("errors") {
    REQUIRE_THROWS_AS(trimmed_mean({}, TrimFraction(0.1)), mtb::InvalidInput);
    REQUIRE_THROWS_AS(TrimFraction(0.5), mtb::InvalidTrim);
    REQUIRE_THROWS_AS(TrimFraction(-0.01), mtb::InvalidTrim);
    REQUIRE_THROWS_AS(trimmed_mean({1.0, std::nan("")}, TrimFraction(0.0)), mtb::InvalidInput);
    // a fraction epsilon below 1/2 rounds to trimming everything out of 10
    std::vector<double> ten(10, 1.0);
    REQUIRE_THROWS_AS(trimmed_mean(ten, TrimFraction(0.5 - 1e-13)), mtb::InvalidTrim);
}

TEST_CASE("permutation invariance, exhaustive for n <= 6") {
    std::vector<double> base{3.0, -1.0, 7.0, 0.5, 2.0, 2.0};
    for (std::size_t n = 1; n <= base.size(); ++n) {
        std::vector<double> v(base.begin(), base.begin() + n);
        std::sort(v.begin(), v.end());
        for (double omega : {0.0, 0.15, 0.3, 0.45}) {
            TrimFraction tf(omega);
            if (static_cast<int>(n) - 2 * tf.count(static_cast<int>(n)) < 1) continue;
            const double reference = trimmed_mean(v, tf);
            std::vector<double> perm = v;
            do {
                REQUIRE(trimmed_mean(perm, tf) == reference);
            } while (std::next_permutation(perm.begin(), perm.end()));
        }
    }
}

TEST_CASE("breakdown: up to floor(N omega) corruptions leave a constant sample untouched") {
    mtb::CounterRng rng(7, 0);
    for (int n : {5, 10, 25}) {
        TrimFraction tf(0.4);
        const int budget = tf.count(n);
        REQUIRE(budget >= 2);
        for (int k = 1; k <= budget; ++k) {
            std::vector<double> v(n, 2.0);
            for (int i = 0; i < k; ++i) {
                v[static_cast<int>(rng.next_uniform() * n)] =
                    (rng.next_uniform() < 0.5 ? -1.0 : 1.0) * 1e6;
            }
            REQUIRE(trimmed_mean(v, tf) == 2.0);
        }
    }
}

TEST_CASE("shift equivariance") {
    std::vector<double> v{0.3, -2.0, 5.5, 1.0, 4.0, -0.7, 9.9};
    const double base = trimmed_mean(v, TrimFraction(0.25));
    for (double shift : {1.0, -3.5, 100.0}) {
        std::vector<double> shifted = v;
        for (double& x : shifted) x += shift;
        REQUIRE(trimmed_mean(shifted, TrimFraction(0.25)) == Catch::Approx(base + shift).margin(1e-12));
    }
}

TEST_CASE("mean agreement whenever the trim count is zero") {
    std::vector<double> v{4.0, 8.0, 15.0, 16.0};
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    REQUIRE(trimmed_mean(v, TrimFraction(0.2)) == Catch::Approx(mean));  // floor(4 * 0.2) = 0
}

TEST_CASE("result stays within the retained range") {
    mtb::CounterRng rng(13, 1);
    for (int rep = 0; rep < 50; ++rep) {
        int n = 1 + static_cast<int>(rng.next_uniform() * 12);
        std::vector<double> v(n);
        for (double& x : v) x = 10.0 * rng.next_normal();
        TrimFraction tf = TrimFraction::clamped(rng.next_uniform(), n);
        double m = trimmed_mean(v, tf);
        std::sort(v.begin(), v.end());
        int k = tf.count(n);
        REQUIRE(m >= v[k] - 1e-12);
        REQUIRE(m <= v[n - 1 - k] + 1e-12);
    }
}

TEST_CASE("clamped fraction realizes the median-like maximal trim") {
    REQUIRE(TrimFraction::clamped(0.9, 1).count(1) == 0);
    REQUIRE(TrimFraction::clamped(0.9, 2).count(2) == 0);
    REQUIRE(TrimFraction::clamped(0.9, 10).count(10) == 4);
    REQUIRE(TrimFraction::clamped(0.9, 11).count(11) == 5);
    REQUIRE(TrimFraction::clamped(0.1, 10).count(10) == 1);  // below the cap, untouched
}
