#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mtb/bandit.hpp"
#include "mtb/environment.hpp"
#include "mtb/serialize.hpp"

using mtb::EnvSpec;
using mtb::Vector;

TEST_CASE("ground truth honors the generator contract") {
    EnvSpec spec = mtb::EnvSpec::uniform(10, 10, 20, 2, 0.05);
    mtb::CounterRng rng(1, mtb::rng_stream::kGroundTruth);
    auto truth = mtb::generate_ground_truth(spec, rng);

    for (int k = 0; k < spec.n_arms; ++k) {
        REQUIRE(truth.shared[k].lpNorm<1>() == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(truth.deltas[0][k].isZero());  // first instance matches the shared model
        for (int j = 0; j < spec.n_instances; ++j) {
            int nnz = 0;
            for (int c = 0; c < spec.dim; ++c) {
                if (truth.deltas[j][k](c) != 0.0) ++nnz;
            }
            REQUIRE(nnz <= spec.sparsity);
            REQUIRE(truth.arm_param(j, k).lpNorm<1>() <= 2.0 + 1e-12);
        }
    }
}

TEST_CASE("zero sparsity clones the shared model everywhere") {
    EnvSpec spec = mtb::EnvSpec::uniform(4, 3, 6, 0, 0.0);
    mtb::CounterRng rng(2, mtb::rng_stream::kGroundTruth);
    auto truth = mtb::generate_ground_truth(spec, rng);
    for (int j = 0; j < 4; ++j) {
        for (int k = 0; k < 3; ++k) {
            REQUIRE(truth.arm_param(j, k) == truth.shared[k]);
        }
    }
}

TEST_CASE("ground truth and streams are seed deterministic") {
    EnvSpec spec = mtb::EnvSpec::uniform(5, 4, 8, 2, 0.1);
    mtb::SyntheticEnvironment a(spec, 99), b(spec, 99);
    for (int k = 0; k < 4; ++k) REQUIRE(a.truth().shared[k] == b.truth().shared[k]);
    for (std::int64_t t = 1; t <= 200; ++t) {
        int ja = a.next_arrival(t), jb = b.next_arrival(t);
        REQUIRE(ja == jb);
        REQUIRE(a.next_context(t, ja) == b.next_context(t, jb));
        REQUIRE(a.realized_reward(t, ja, 0, Vector::Ones(8)) ==
                b.realized_reward(t, jb, 0, Vector::Ones(8)));
    }
}

TEST_CASE("arrival sampling") {
    mtb::CounterRng rng(3, mtb::rng_stream::kArrival);
    SECTION("one-hot always picks that instance") {
        std::vector<double> p{0.0 + 1e-12, 1.0 - 1e-12};
        for (int i = 0; i < 100; ++i) REQUIRE(mtb::sample_arrival(p, rng) == 1);
    }
    SECTION("uniform frequencies concentrate") {
        std::vector<double> p(10, 0.1);
        std::vector<int> counts(10, 0);
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) ++counts[mtb::sample_arrival(p, rng)];
        for (int j = 0; j < 10; ++j) {
            REQUIRE(std::abs(counts[j] / static_cast<double>(draws) - 0.1) < 0.01);
        }
    }
    SECTION("data-poor split hits the configured ratio") {
        EnvSpec spec = mtb::EnvSpec::uniform(2, 2, 2, 0, 0.0);
        spec.set_data_poor(0, 0.01);
        REQUIRE(spec.arrival_probs[0] == Catch::Approx(spec.arrival_probs[1] / 100.0));
        int poor = 0;
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) {
            if (mtb::sample_arrival(spec.arrival_probs, rng) == 0) ++poor;
        }
        // mean ~990, sd ~31; stay within 4 sigma
        REQUIRE(poor > 990 - 125);
        REQUIRE(poor < 990 + 125);
    }
}

TEST_CASE("context sampling clips coordinates") {
    mtb::CounterRng rng(4, mtb::rng_stream::kContext);
    SECTION("clip bound always holds") {
        for (int i = 0; i < 200000; ++i) {
            Vector x = mtb::sample_context(5, 1.0, rng);
            REQUIRE(x.lpNorm<Eigen::Infinity>() <= 1.0);
        }
    }
    SECTION("mass at the boundary matches the gaussian tail") {
        int at_bound = 0;
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) {
            if (mtb::sample_context(1, 1.0, rng)(0) == 1.0) ++at_bound;
        }
        // P(N(0,1) >= 1) = 0.158655; binomial sd ~ 0.00116
        REQUIRE(std::abs(at_bound / static_cast<double>(draws) - 0.158655) < 0.005);
    }
    SECTION("a huge bound leaves the gaussian untouched") {
        double sum = 0.0, sumsq = 0.0;
        const int draws = 200000;
        for (int i = 0; i < draws; ++i) {
            double x = mtb::sample_context(1, 1e9, rng)(0);
            sum += x;
            sumsq += x * x;
        }
        REQUIRE(std::abs(sum / draws) < 0.01);
        REQUIRE(std::abs(sumsq / draws - 1.0) < 0.02);
    }
}

TEST_CASE("reward sampling") {
    mtb::CounterRng rng(5, mtb::rng_stream::kNoise);
    Vector x(3), beta(3);
    x << 1.0, -0.5, 0.25;
    beta << 2.0, 1.0, -4.0;
    const double signal = x.dot(beta);
    SECTION("zero noise is exact") {
        REQUIRE(mtb::sample_reward(x, beta, 0.0, rng) == signal);
    }
    SECTION("mean and variance converge") {
        const int draws = 100000;
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < draws; ++i) {
            double r = mtb::sample_reward(x, beta, 0.3, rng) - signal;
            sum += r;
            sumsq += r * r;
        }
        REQUIRE(std::abs(sum / draws) < 4.0 * 0.3 / std::sqrt(draws));
        REQUIRE(std::abs(sumsq / draws - 0.09) < 0.005);
    }
}

TEST_CASE("oracle arm and stepwise scoring") {
    EnvSpec spec = mtb::EnvSpec::uniform(2, 5, 4, 1, 0.0);
    mtb::CounterRng rng(6, mtb::rng_stream::kGroundTruth);
    auto truth = mtb::generate_ground_truth(spec, rng);
    mtb::CounterRng crng(6, mtb::rng_stream::kContext);
    for (int rep = 0; rep < 200; ++rep) {
        Vector x = mtb::sample_context(4, 1.0, crng);
        for (int j = 0; j < 2; ++j) {
            int oracle = mtb::oracle_arm(truth, j, x);
            // brute force over arms
            for (int k = 0; k < 5; ++k) {
                REQUIRE(x.dot(truth.arm_param(j, oracle)) >= x.dot(truth.arm_param(j, k)) - 1e-12);
                REQUIRE(mtb::score_step(truth, j, x, k) >= -1e-12);
            }
            REQUIRE(mtb::score_step(truth, j, x, oracle) == 0.0);
        }
    }
    SECTION("single arm") {
        EnvSpec one = mtb::EnvSpec::uniform(1, 1, 3, 0, 0.0);
        mtb::CounterRng orng(7, mtb::rng_stream::kGroundTruth);
        auto t1 = mtb::generate_ground_truth(one, orng);
        REQUIRE(mtb::oracle_arm(t1, 0, Vector::Ones(3)) == 0);
    }
}

TEST_CASE("similarity network") {
    EnvSpec spec = mtb::EnvSpec::uniform(6, 3, 10, 2, 0.0);
    mtb::CounterRng rng(8, mtb::rng_stream::kGroundTruth);
    auto truth = mtb::generate_ground_truth(spec, rng);
    auto graph = mtb::similarity_graph(truth);

    REQUIRE(graph.rows() == 6);
    for (int i = 0; i < 6; ++i) {
        REQUIRE(graph(i, i) == 0);
        for (int j = 0; j < 6; ++j) {
            REQUIRE(graph(i, j) == graph(j, i));
            REQUIRE(graph(i, j) <= spec.dim);
            REQUIRE(graph(i, j) <= 2 * spec.sparsity);  // triangle bound on supports
        }
    }

    SECTION("selection grows with the threshold and always contains the target") {
        for (int j = 0; j < 6; ++j) {
            std::size_t prev = 0;
            for (int s_tilde = 0; s_tilde <= spec.dim; ++s_tilde) {
                auto q = mtb::select_instances(graph, j, s_tilde);
                REQUIRE(std::find(q.begin(), q.end(), j) != q.end());
                REQUIRE(q.size() >= prev);
                prev = q.size();
            }
            REQUIRE(mtb::select_instances(graph, j, spec.dim).size() == 6);
        }
    }
}

TEST_CASE("subset size under the power-law tradeoff") {
    REQUIRE(mtb::optimal_subset_size(20, 0.0, 100) == 20);
    REQUIRE(mtb::optimal_subset_size(20, 1.0, 100) == 5);  // ceil(sqrt(20))
    REQUIRE(mtb::optimal_subset_size(20, 1e12, 100) == 1);
    REQUIRE(mtb::optimal_subset_size(20, 0.0, 10) == 10);  // clipped at N
}

TEST_CASE("ground truth serialization round trip") {
    EnvSpec spec = mtb::EnvSpec::uniform(4, 3, 8, 2, 0.0);
    mtb::CounterRng rng(9, mtb::rng_stream::kGroundTruth);
    auto truth = mtb::generate_ground_truth(spec, rng);
    auto doc = mtb::ground_truth_to_json(truth);
    auto back = mtb::ground_truth_from_json(doc);
    for (int k = 0; k < 3; ++k) {
        REQUIRE(back.shared[k] == truth.shared[k]);
        for (int j = 0; j < 4; ++j) REQUIRE(back.deltas[j][k] == truth.deltas[j][k]);
    }
    // support entries are explicit in the document
    for (const auto& arm : doc["arms"]) {
        for (const auto& entry : arm["deltas"]) {
            REQUIRE(entry["support"].size() == entry["values"].size());
            REQUIRE(entry["support"].size() <= 2);
        }
    }
}

TEST_CASE("spec validation") {
    EnvSpec spec = mtb::EnvSpec::uniform(3, 2, 4, 5, 0.1);
    REQUIRE_THROWS_AS(spec.validate(), mtb::InvalidConfig);  // sparsity > dim
    spec.sparsity = 2;
    spec.arrival_probs = {0.5, 0.2, 0.2};
    REQUIRE_THROWS_AS(spec.validate(), mtb::InvalidConfig);  // not a simplex
}
