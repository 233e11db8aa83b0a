#include <catch2/catch_amalgamated.hpp>

#include "mtb/environment.hpp"
#include "mtb/multitask.hpp"
#include "mtb/rng.hpp"

using mtb::Matrix;
using mtb::TaskDataset;
using mtb::TrimFraction;
using mtb::Vector;

namespace {

Matrix random_matrix(Eigen::Index n, Eigen::Index d, mtb::CounterRng& rng) {
    Matrix X(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.next_normal();
    }
    return X;
}

std::vector<TaskDataset> noiseless_tasks(const std::vector<Vector>& betas, Eigen::Index n,
                                         mtb::CounterRng& rng) {
    std::vector<TaskDataset> tasks;
    for (std::size_t j = 0; j < betas.size(); ++j) {
        Matrix X = random_matrix(n, betas[j].size(), rng);
        tasks.push_back({static_cast<int>(j), X, X * betas[j]});
    }
    return tasks;
}

}  // namespace

TEST_CASE("identical noiseless tasks are recovered exactly for any valid hyperparameters") {
    mtb::CounterRng rng(60, 0);
    Vector beta_star(3);
    beta_star << 0.5, -1.0, 2.0;
    auto tasks = noiseless_tasks({beta_star, beta_star, beta_star}, 12, rng);
    for (double omega : {0.0, 0.2, 0.32}) {
        for (double lambda : {0.0, 0.1, 2.0}) {
            auto fit = mtb::fit_robust_multitask(
                tasks, mtb::EstimatorHyper::uniform(tasks, lambda, TrimFraction(omega)));
            REQUIRE((fit.shared - beta_star).lpNorm<Eigen::Infinity>() < 1e-9);
            for (const auto& [id, beta] : fit.per_instance) {
                REQUIRE((beta - beta_star).lpNorm<Eigen::Infinity>() < 1e-9);
            }
        }
    }
}

TEST_CASE("a single biased task is trimmed out of the shared estimate") {
    mtb::CounterRng rng(61, 0);
    Vector base(2);
    base << 1.0, 1.0;
    std::vector<Vector> betas(5, base);
    betas[3](0) += 0.5;  // biased task, coordinate 0 only
    auto tasks = noiseless_tasks(betas, 30, rng);
    auto fit = mtb::fit_robust_multitask(
        tasks, mtb::EstimatorHyper::uniform(tasks, 0.01, TrimFraction(0.2)));
    // the outlier is the maximum of coordinate 0 and gets dropped
    REQUIRE(fit.shared(0) == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(fit.shared(1) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("multitask fit beats independent fits on a shared-structure Monte Carlo") {
    // N=10, d=20, s=2, sigma=0.05, n=400 per task, 50 draws on identical data
    mtb::EnvSpec spec = mtb::EnvSpec::uniform(10, 1, 20, 2, 0.05);
    double rm_total = 0.0, ind_total = 0.0;
    for (int draw = 0; draw < 50; ++draw) {
        mtb::CounterRng rng(1000 + draw, 0);
        auto truth = mtb::generate_ground_truth(spec, rng);
        std::vector<TaskDataset> tasks;
        for (int j = 0; j < 10; ++j) {
            Matrix X(400, 20);
            for (int r = 0; r < 400; ++r) {
                for (int c = 0; c < 20; ++c) X(r, c) = std::clamp(rng.next_normal(), -1.0, 1.0);
            }
            Vector eps(400);
            for (int r = 0; r < 400; ++r) eps(r) = 0.05 * rng.next_normal();
            tasks.push_back({j, X, X * truth.arm_param(j, 0) + eps});
        }
        // penalty at the realized noise scale; the theory constructor's x_max
        // bound is far above the clipped design's root-mean-square scale
        double lambda = 2.0 * 0.05 * std::sqrt(std::log(20.0) / 400.0);
        auto hyper = mtb::EstimatorHyper::uniform(
            tasks, lambda, TrimFraction::clamped(std::sqrt(2.0 / 20.0) + 0.2, 10));
        auto rm = mtb::fit_robust_multitask(tasks, hyper);
        auto ind = mtb::fit_independent(tasks);
        for (int j = 0; j < 10; ++j) {
            rm_total += (rm.per_instance.at(j) - truth.arm_param(j, 0)).lpNorm<1>();
            ind_total += (ind.at(j) - truth.arm_param(j, 0)).lpNorm<1>();
        }
    }
    REQUIRE(rm_total < ind_total);
}

TEST_CASE("independent fits ignore other tasks' data") {
    mtb::CounterRng rng(62, 0);
    Vector b1(3), b2(3);
    b1 << 1, 2, 3;
    b2 << -1, 0, 1;
    auto tasks = noiseless_tasks({b1, b2}, 10, rng);
    auto base = mtb::fit_independent(tasks);
    REQUIRE((base.at(0) - b1).lpNorm<Eigen::Infinity>() < 1e-9);

    auto perturbed = tasks;
    perturbed[1].Y.array() += 5.0;
    auto after = mtb::fit_independent(perturbed);
    REQUIRE(after.at(0) == base.at(0));  // bit-identical
    REQUIRE(after.at(1) != base.at(1));

    // single task, identity design: plain least squares
    Matrix I = Matrix::Identity(3, 3);
    Vector y(3);
    y << 4, 5, 6;
    std::vector<TaskDataset> one{{0, I, y}};
    REQUIRE((mtb::fit_independent(one).at(0) - mtb::ols_fit(I, y)).norm() == 0.0);

    // matches the normal-equation oracle on a random instance
    Matrix X = random_matrix(25, 4, rng);
    Vector yy(25);
    for (int i = 0; i < 25; ++i) yy(i) = rng.next_normal();
    std::vector<TaskDataset> rnd{{0, X, yy}};
    Vector oracle = (X.transpose() * X).inverse() * X.transpose() * yy;
    REQUIRE((mtb::fit_independent(rnd).at(0) - oracle).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("averaging arithmetic") {
    mtb::CounterRng rng(63, 0);
    Vector z = Vector::Zero(2), b(2);
    b << 2, 4;
    auto tasks = noiseless_tasks({z, b}, 8, rng);
    Vector avg = mtb::fit_averaging(tasks);
    REQUIRE(avg(0) == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(avg(1) == Catch::Approx(2.0).margin(1e-9));

    Vector same(2);
    same << -3, 7;
    auto identical = noiseless_tasks({same, same, same}, 8, rng);
    REQUIRE((mtb::fit_averaging(identical) - same).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("averaging has a sample-size-independent bias floor") {
    Vector b1(2), b2(2);
    b1 << 1, 0;
    b2 << 0, 1;
    for (Eigen::Index n : {20, 2000}) {
        mtb::CounterRng rng(64, 0);
        auto tasks = noiseless_tasks({b1, b2}, n, rng);
        Vector avg = mtb::fit_averaging(tasks);
        REQUIRE(avg(0) == Catch::Approx(0.5).margin(1e-9));
        REQUIRE(avg(1) == Catch::Approx(0.5).margin(1e-9));
        REQUIRE((avg - b1).lpNorm<1>() == Catch::Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("pooling identities") {
    mtb::CounterRng rng(65, 0);
    Vector same(2);
    same << 1.5, -0.5;
    auto identical = noiseless_tasks({same, same}, 12, rng);
    REQUIRE((mtb::fit_pooling(identical) - same).lpNorm<Eigen::Infinity>() < 1e-9);

    // identity sample covariances and equal n: pooling equals averaging
    Matrix I4 = Matrix::Identity(4, 4);
    Matrix X(8, 4);
    X << I4, I4;
    Vector b1(4), b2(4);
    b1 << 1, 2, 3, 4;
    b2 << -1, 1, -1, 1;
    mtb::CounterRng noise(66, 0);
    Vector y1(8), y2(8);
    for (int i = 0; i < 8; ++i) {
        y1(i) = X.row(i).dot(b1) + 0.1 * noise.next_normal();
        y2(i) = X.row(i).dot(b2) + 0.1 * noise.next_normal();
    }
    std::vector<TaskDataset> tasks{{0, X, y1}, {1, X, y2}};
    REQUIRE((mtb::fit_pooling(tasks) - mtb::fit_averaging(tasks)).lpNorm<Eigen::Infinity>() < 1e-9);

    // unequal n with identity covariances: the n-weighted average of task fits
    Matrix X2(12, 4);
    X2 << I4, I4, I4;
    Vector y3(12);
    for (int i = 0; i < 12; ++i) y3(i) = X2.row(i).dot(b2) + 0.1 * noise.next_normal();
    std::vector<TaskDataset> uneven{{0, X, y1}, {1, X2, y3}};
    auto ind = mtb::fit_independent(uneven);
    Vector weighted = (8.0 * ind.at(0) + 12.0 * ind.at(1)) / 20.0;
    REQUIRE((mtb::fit_pooling(uneven) - weighted).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("mean-centered variant degenerates to the robust fit when the trim count is zero") {
    mtb::CounterRng rng(67, 0);
    Vector b(3);
    b << 1, 0, -1;
    Vector b_biased = b;
    b_biased(1) += 0.4;
    auto tasks = noiseless_tasks({b, b, b_biased}, 15, rng);
    std::map<int, double> lambdas{{0, 0.02}, {1, 0.02}, {2, 0.02}};

    auto am = mtb::fit_averaging_multitask(tasks, lambdas);
    mtb::EstimatorHyper hyper;
    hyper.lambdas = lambdas;
    hyper.omega = TrimFraction(0.1);  // floor(3 * 0.1) = 0
    auto rm = mtb::fit_robust_multitask(tasks, hyper);
    REQUIRE(am.shared == rm.shared);
    for (const auto& [id, beta] : am.per_instance) {
        REQUIRE(beta == rm.per_instance.at(id));
    }
}

TEST_CASE("poor alignment: trimming beats plain averaging and sparsity counts match") {
    // 12 tasks, each biased on its own coordinate, zero noise, plenty of data
    const int n_tasks = 12, d = 12;
    mtb::CounterRng rng(68, 0);
    Vector shared(d);
    for (int i = 0; i < d; ++i) shared(i) = rng.next_normal();
    shared /= shared.lpNorm<1>();
    std::vector<Vector> betas(n_tasks, shared);
    for (int j = 0; j < n_tasks; ++j) betas[j](j) += 0.5;
    auto tasks = noiseless_tasks(betas, 200, rng);

    const double zeta = std::sqrt(1.0 / d);
    std::map<int, double> lambdas;
    for (int j = 0; j < n_tasks; ++j) lambdas[j] = 0.05;
    mtb::EstimatorHyper hyper;
    hyper.lambdas = lambdas;
    hyper.omega = TrimFraction::clamped(zeta, n_tasks);

    auto rm = mtb::fit_robust_multitask(tasks, hyper);
    auto am = mtb::fit_averaging_multitask(tasks, lambdas);

    double rm_err = 0.0, am_err = 0.0;
    for (int j = 0; j < n_tasks; ++j) {
        rm_err += (rm.per_instance.at(j) - betas[j]).lpNorm<1>();
        am_err += (am.per_instance.at(j) - betas[j]).lpNorm<1>();
    }
    REQUIRE(am_err > rm_err);

    // shared-estimate deviation supports: trimmed one is O(s)-sparse, mean one is full
    int rm_nnz = 0, am_nnz = 0;
    for (int i = 0; i < d; ++i) {
        if (std::abs(rm.shared(i) - shared(i)) > 1e-9) ++rm_nnz;
        if (std::abs(am.shared(i) - shared(i)) > 1e-9) ++am_nnz;
    }
    REQUIRE(rm_nnz <= static_cast<int>(1.0 / zeta) + 1);
    REQUIRE(am_nnz == d);  // min(N s, d) with N s = d
}

TEST_CASE("shift equivariance of the full pipeline") {
    mtb::CounterRng rng(69, 0);
    Vector b1(3), b2(3), b3(3);
    b1 << 1, 0, 0;
    b2 << 1, 0.3, 0;
    b3 << 1, 0, -0.3;
    std::vector<Vector> betas{b1, b2, b3};
    Vector v(3);
    v << 2.0, -1.0, 0.5;

    std::vector<TaskDataset> base_tasks, shifted_tasks;
    for (int j = 0; j < 3; ++j) {
        Matrix X = random_matrix(30, 3, rng);
        Vector eps(30);
        for (int i = 0; i < 30; ++i) eps(i) = 0.05 * rng.next_normal();
        base_tasks.push_back({j, X, X * betas[j] + eps});
        shifted_tasks.push_back({j, X, X * (betas[j] + v) + eps});
    }
    auto hyper = mtb::EstimatorHyper::uniform(base_tasks, 0.05, TrimFraction(0.3));
    auto base = mtb::fit_robust_multitask(base_tasks, hyper);
    auto shifted = mtb::fit_robust_multitask(shifted_tasks, hyper);
    REQUIRE((shifted.shared - (base.shared + v)).lpNorm<Eigen::Infinity>() < 1e-8);
    for (int j = 0; j < 3; ++j) {
        REQUIRE((shifted.per_instance.at(j) - (base.per_instance.at(j) + v))
                    .lpNorm<Eigen::Infinity>() < 1e-8);
    }
}

TEST_CASE("excluding a task only reroutes the shared center") {
    mtb::CounterRng rng(70, 0);
    Vector b(2);
    b << 1, -1;
    Vector noisy = b;
    noisy(0) += 0.3;
    auto tasks = noiseless_tasks({b, b, noisy}, 20, rng);
    auto hyper = mtb::EstimatorHyper::uniform(tasks, 0.02, TrimFraction(0.0), {2});
    auto fit = mtb::fit_robust_multitask(tasks, hyper);
    // center is the mean of tasks 0 and 1 only
    REQUIRE(fit.shared(0) == Catch::Approx(1.0).margin(1e-9));
    // excluded task is still debiased against that center
    REQUIRE(fit.per_instance.count(2) == 1);

    // excluding all but one: the survivor's fit becomes the center
    auto hyper_single = mtb::EstimatorHyper::uniform(tasks, 0.02, TrimFraction(0.0), {1, 2});
    auto fit_single = mtb::fit_robust_multitask(tasks, hyper_single);
    REQUIRE(fit_single.shared == fit.task_ols.at(0));
}

TEST_CASE("estimator failures carry the task id") {
    Matrix bad(2, 3);
    bad.setOnes();
    Vector y(2);
    y << 1, 2;
    std::vector<TaskDataset> tasks{{7, bad, y}};
    try {
        mtb::fit_independent(tasks);
        FAIL("expected SingularDesign");
    } catch (const mtb::SingularDesign& e) {
        REQUIRE(e.instance_id == 7);
    }
}

TEST_CASE("alignment counting") {
    Vector shared(4);
    shared << 1, 2, 3, 4;
    std::vector<Vector> betas(10, shared);
    SECTION("all equal: every coordinate is poorly aligned") {
        auto split = mtb::count_aligned(betas, shared, 0.17);
        REQUIRE(split.poor.size() == 4);
        REQUIRE(split.well.empty());
    }
    SECTION("direct count against the threshold") {
        for (int j = 0; j < 4; ++j) betas[j](0) += 1.0;  // coordinate 0 deviates in 4 of 10
        for (int j = 0; j < 2; ++j) betas[j](1) += 1.0;  // coordinate 1 deviates in 2 of 10
        auto split = mtb::count_aligned(betas, shared, 0.3);
        REQUIRE(split.well == std::vector<int>{0});
        REQUIRE(split.poor == std::vector<int>{1, 2, 3});
    }
    SECTION("pigeonhole bound on well-aligned coordinates") {
        mtb::CounterRng rng(71, 0);
        const int d = 12, n = 10, s = 3;
        Vector base = Vector::Zero(d);
        for (int rep = 0; rep < 25; ++rep) {
            std::vector<Vector> random_betas(n, base);
            for (int j = 0; j < n; ++j) {
                for (int pick = 0; pick < s; ++pick) {
                    int coord = static_cast<int>(rng.next_uniform() * d);
                    random_betas[j](coord) = 1.0 + rng.next_uniform();
                }
            }
            for (double zeta : {0.2, 0.35, 0.5}) {
                auto split = mtb::count_aligned(random_betas, base, zeta);
                REQUIRE(static_cast<double>(split.well.size()) <= s / zeta + 1e-12);
            }
        }
    }
}
