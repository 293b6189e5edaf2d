#include "oracles.hpp"

#include <trug/rbm.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace trug;

namespace {

RbmModel random_model(Eigen::Index n, Eigen::Index m, TrugParams trug, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    RbmModel model = RbmModel::zeros(n, m, std::move(trug));
    for (Eigen::Index i = 0; i < model.W.size(); ++i) model.W.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < n; ++i) model.b[i] = g(rng);
    for (Eigen::Index j = 0; j < m; ++j) {
        model.c[j] = g(rng);
        model.d[j] = u(rng);
    }
    return model;
}

/// -E(x, h) for a single configuration.
double neg_energy(const RbmModel& model, const Vector& x, const Vector& h) {
    return -0.5 * h.dot(model.d.cwiseProduct(h)) + x.dot(model.W * h) + model.b.dot(x) + model.c.dot(h);
}

using oracle::log_hidden_integral;

/// ln Z as a sum over visible states of products of one-dimensional hidden quadratures.
double quadrature_log_partition(const RbmModel& model) {
    const Eigen::Index n = model.visible();
    std::vector<double> terms;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
        Vector x(n);
        for (Eigen::Index i = 0; i < n; ++i) x[i] = static_cast<double>((s >> i) & 1U);
        const Vector u = model.W.transpose() * x + model.c;
        double t = model.b.dot(x);
        for (Eigen::Index j = 0; j < model.hidden(); ++j)
            t += log_hidden_integral(model.d[j], u[j], model.trug.lower_at(j), model.trug.upper_at(j));
        terms.push_back(t);
    }
    return log_sum_exp(Eigen::Map<Vector>(terms.data(), static_cast<Eigen::Index>(terms.size())));
}

double mean_log_likelihood(const RbmModel& model, const Matrix& x) { return exact_log_prob(model, x).mean(); }

Matrix exact_samples(const RbmModel& model, Eigen::Index count, Rng& rng) {
    const Vector p = exact_state_probs(model);
    std::discrete_distribution<std::uint64_t> pick(p.data(), p.data() + p.size());
    Matrix x(count, model.visible());
    for (Eigen::Index r = 0; r < count; ++r) x.row(r) = detail::visible_states(pick(rng), 1, model.visible());
    return x;
}

Eigen::Index state_index(const Eigen::Ref<const RowVector>& x) {
    Eigen::Index s = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] > 0.5) s |= Eigen::Index{1} << i;
    return s;
}

double chi_square_critical(double dof) {
    return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), 0.001));
}

}  // namespace

TEST(HiddenConditional, ZeroModel) {
    const auto model = RbmModel::zeros(3, 2, TrugParams::shared(0.0, 1.0));
    const auto layer = hidden_conditional(model, Matrix{{1.0, 0.0, 1.0}});
    EXPECT_EQ(layer.base_mean.norm(), 0.0);
    EXPECT_EQ(layer.variance, Vector::Ones(2));
}

TEST(HiddenConditional, DirectFormula) {
    auto model = RbmModel::zeros(1, 1, TrugParams::shared(0.0, 1.0));
    model.W(0, 0) = 2.0;
    model.c[0] = 1.0;
    model.d[0] = 4.0;
    const auto layer = hidden_conditional(model, Matrix{{1.0}});
    EXPECT_DOUBLE_EQ(layer.base_mean(0, 0), 0.75);
    EXPECT_DOUBLE_EQ(layer.variance[0], 0.25);
}

TEST(HiddenConditional, MatchesNormalisedEnergy) {
    const auto model = random_model(2, 2, TrugParams::per_unit(Vector{{-0.5, 0.0}}, Vector{{1.5, kInf}}), 3);
    for (std::uint64_t s = 0; s < 4; ++s) {
        const Matrix x = detail::visible_states(s, 1, 2);
        const auto layer = hidden_conditional(model, x);
        const Vector u = model.W.transpose() * x.row(0).transpose() + model.c;
        for (Eigen::Index j = 0; j < 2; ++j) {
            const double lo = model.trug.lower_at(j), hi = model.trug.upper_at(j);
            const double log_norm = log_hidden_integral(model.d[j], u[j], lo, hi);
            for (double t : {lo + 0.1, lo + 0.7, 1.2}) {
                const double expected = std::exp(-0.5 * model.d[j] * t * t + u[j] * t - log_norm);
                const double got =
                    trunc_density_at({layer.base_mean(0, j), layer.variance[j]}, model.trug.interval(j), t);
                EXPECT_NEAR(got / expected, 1.0, 1e-8);
            }
        }
    }
}

TEST(VisibleConditional, Examples) {
    auto model = RbmModel::zeros(3, 2, TrugParams::shared(0.0, 1.0));
    EXPECT_TRUE(visible_conditional(model, Matrix{{0.3, 0.9}}).isApproxToConstant(0.5));
    model.b[1] = 20.0;
    EXPECT_NEAR(visible_conditional(model, Matrix{{0.3, 0.9}})(0, 1), 1.0, 1e-8);
}

TEST(VisibleConditional, MatchesEnergyRatio) {
    const auto model = random_model(2, 2, TrugParams::shared(-1.0, 1.0), 5);
    const Vector h{{0.4, -0.7}};
    const Matrix p = visible_conditional(model, h.transpose());
    for (Eigen::Index i = 0; i < 2; ++i) {
        Vector x0 = Vector::Zero(2), x1 = Vector::Zero(2);
        x1[i] = 1.0;
        const double e0 = neg_energy(model, x0, h), e1 = neg_energy(model, x1, h);
        EXPECT_NEAR(p(0, i), std::exp(e1) / (std::exp(e0) + std::exp(e1)), 1e-14);
    }
}

TEST(Gibbs, ZeroWeightMarginals) {
    auto model = RbmModel::zeros(3, 2, TrugParams::shared(0.0, 1.0));
    model.b = Vector{{-1.0, 0.0, 2.0}};
    Rng rng(1);
    GibbsChain chain{Matrix::Zero(20000, 3), Matrix(), 0};
    chain = run_chain(model, std::move(chain), 3, rng);
    EXPECT_EQ(chain.step_count, 3);
    for (Eigen::Index i = 0; i < 3; ++i) {
        const double p = sigmoid(model.b[i]);
        EXPECT_NEAR(chain.x.col(i).mean(), p, 4 * std::sqrt(p * (1 - p) / 20000));
    }
    EXPECT_GE(chain.h.minCoeff(), 0.0);
    EXPECT_LE(chain.h.maxCoeff(), 1.0);
}

TEST(Gibbs, Deterministic) {
    const auto model = random_model(4, 3, TrugParams::shared(0.0, 1.0), 9);
    auto run = [&] {
        Rng rng(42);
        return run_chain(model, GibbsChain{Matrix::Zero(5, 4), Matrix(), 0}, 10, rng);
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.h, b.h);
}

TEST(Gibbs, MarginalsMatchEnumeration) {
    const auto model = random_model(4, 3, TrugParams::shared(0.0, kInf), 11, 0.7);
    Rng rng(13);
    const Eigen::Index chains = 100000;
    auto chain = run_chain(model, GibbsChain{Matrix::Zero(chains, 4), Matrix(), 0}, 30, rng);
    const Vector p = exact_state_probs(model);
    for (Eigen::Index i = 0; i < 4; ++i) {
        double exact = 0.0;
        for (Eigen::Index s = 0; s < p.size(); ++s)
            if ((s >> i) & 1) exact += p[s];
        EXPECT_NEAR(chain.x.col(i).mean(), exact, 3.5 * std::sqrt(exact * (1 - exact) / chains)) << "unit " << i;
    }
}

TEST(Gibbs, InvariantUnderExtraSweeps) {
    const auto model = random_model(3, 2, TrugParams::shared(-1.0, 1.0), 17);
    Rng rng(19);
    const Matrix start = exact_samples(model, 50000, rng);
    const auto after = run_chain(model, GibbsChain{start, Matrix(), 0}, 5, rng);
    const Vector p = exact_state_probs(model);
    Vector counts = Vector::Zero(p.size());
    for (Eigen::Index r = 0; r < after.x.rows(); ++r) counts[state_index(after.x.row(r))] += 1.0;
    double chi2 = 0.0;
    for (Eigen::Index s = 0; s < p.size(); ++s) {
        const double e = p[s] * after.x.rows();
        chi2 += (counts[s] - e) * (counts[s] - e) / e;
    }
    EXPECT_LT(chi2, chi_square_critical(static_cast<double>(p.size() - 1)));
}

TEST(Fantasy, ZeroWeightAndDeterminism) {
    auto model = RbmModel::zeros(2, 2, TrugParams::shared(0.0, 1.0));
    model.b = Vector{{1.5, -0.5}};
    Rng rng(3);
    const Matrix s = sample_fantasy(model, 2, 20000, rng);
    for (Eigen::Index i = 0; i < 2; ++i) {
        const double p = sigmoid(model.b[i]);
        EXPECT_NEAR(s.col(i).mean(), p, 4 * std::sqrt(p * (1 - p) / 20000));
    }
    Rng r1(5), r2(5);
    EXPECT_EQ(sample_fantasy(model, 4, 10, r1), sample_fantasy(model, 4, 10, r2));
    EXPECT_EQ(sample_fantasy(model, 4, 0, r1).rows(), 0);
}

TEST(Fantasy, HistogramMatchesExactProbabilities) {
    const auto model = random_model(3, 2, TrugParams::shared(0.0, 1.0), 23, 1.5);
    Rng rng(29);
    const Matrix s = sample_fantasy(model, 40, 40000, rng);
    const Vector p = exact_state_probs(model);
    Vector counts = Vector::Zero(p.size());
    for (Eigen::Index r = 0; r < s.rows(); ++r) counts[state_index(s.row(r))] += 1.0;
    double chi2 = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double e = p[k] * s.rows();
        chi2 += (counts[k] - e) * (counts[k] - e) / e;
    }
    EXPECT_LT(chi2, chi_square_critical(static_cast<double>(p.size() - 1)));
}

TEST(ExactPartition, NoHiddenUnits) {
    auto model = RbmModel::zeros(1, 0, TrugParams::shared(0.0, 1.0));
    model.b[0] = 0.7;
    EXPECT_NEAR(exact_log_partition(model), std::log1p(std::exp(0.7)), 1e-14);
}

TEST(ExactPartition, FactorisesWithoutCoupling) {
    auto model = random_model(4, 3, TrugParams::per_unit(Vector{{0.0, -1.0, -kInf}}, Vector{{1.0, 2.0, 0.5}}), 31);
    model.W.setZero();
    double expected = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i) expected += std::log1p(std::exp(model.b[i]));
    for (Eigen::Index j = 0; j < 3; ++j) {
        const double sd = std::sqrt(model.d[j]), g = model.c[j] / sd;
        const double mass = oracle::log_mass(sd * model.trug.lower_at(j) - g, sd * model.trug.upper_at(j) - g);
        expected += mass - std::log(sd) - std::log(normal::kInvSqrt2Pi) + 0.5 * g * g;
    }
    EXPECT_NEAR(exact_log_partition(model), expected, 1e-12);
}

TEST(ExactPartition, MatchesQuadrature) {
    for (std::uint64_t seed : {37, 41, 43}) {
        const auto model = random_model(6, 4, TrugParams::per_unit(Vector{{0.0, -1.0, 0.0, -kInf}},
                                                                   Vector{{1.0, 1.0, kInf, 0.3}}),
                                        seed);
        const double ref = quadrature_log_partition(model);
        EXPECT_NEAR(exact_log_partition(model) / ref, 1.0, 1e-8) << "seed " << seed;
    }
}

TEST(ExactPartition, RefusesLargeModels) {
    const auto model = RbmModel::zeros(21, 1, TrugParams::shared(0.0, 1.0));
    EXPECT_THROW(exact_log_partition(model), CapacityError);
    EXPECT_THROW(exact_log_prob(model, Matrix::Zero(1, 21)), CapacityError);
}

TEST(ExactLogProb, UniformModel) {
    const auto model = RbmModel::zeros(3, 2, TrugParams::shared(0.0, 1.0));
    EXPECT_NEAR(exact_log_prob(model, Matrix{{1.0, 0.0, 1.0}})[0], std::log(1.0 / 8.0), 1e-14);
}

TEST(ExactLogProb, Normalised) {
    const auto model = random_model(7, 3, TrugParams::shared(-0.5, 2.0), 47, 2.0);
    EXPECT_NEAR(exact_state_probs(model).sum(), 1.0, 1e-10);
}

TEST(ExactLogProb, MatchesAncestralFrequencies) {
    const auto model = random_model(3, 2, TrugParams::shared(0.0, kInf), 53);
    Rng rng(59);
    // Ancestral sampling of (h, x) is not available for an undirected model, so states are drawn
    // by inverting an independently accumulated table of quadrature-based probabilities.
    const double log_z = quadrature_log_partition(model);
    std::vector<double> p(8);
    for (std::uint64_t s = 0; s < 8; ++s) {
        const Matrix x = detail::visible_states(s, 1, 3);
        const Vector u = model.W.transpose() * x.row(0).transpose() + model.c;
        double t = model.b.dot(x.row(0).transpose());
        for (Eigen::Index j = 0; j < 2; ++j) t += log_hidden_integral(model.d[j], u[j], 0.0, kInf);
        p[s] = std::exp(t - log_z);
    }
    std::discrete_distribution<int> pick(p.begin(), p.end());
    const int draws = 10'000'000;
    std::vector<double> counts(8, 0.0);
    for (int i = 0; i < draws; ++i) counts[pick(rng)] += 1.0;
    const Vector lp = exact_log_prob(model, detail::visible_states(0, 8, 3));
    for (int s = 0; s < 8; ++s) {
        const double f = counts[s] / draws;
        const double se = std::sqrt(f * (1 - f) / draws) / f;  // standard error of ln f
        EXPECT_NEAR(lp[s], std::log(f), 3.5 * se) << "state " << s;
    }
}

TEST(ExactLogProb, FiniteForLargeParameters) {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(-10.0, 10.0), pos(0.01, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
        RbmModel model = RbmModel::zeros(5, 3, TrugParams::per_unit(3, -kInf, kInf));
        for (Eigen::Index i = 0; i < model.W.size(); ++i) model.W.data()[i] = u(rng);
        for (Eigen::Index i = 0; i < 5; ++i) model.b[i] = u(rng);
        for (Eigen::Index j = 0; j < 3; ++j) {
            model.c[j] = u(rng);
            model.d[j] = pos(rng);
            const double a = u(rng), b = u(rng);
            model.trug.lower[j] = trial % 3 == 0 ? -kInf : std::min(a, b);
            model.trug.upper[j] = trial % 5 == 0 ? kInf : std::max(a, b) + 1e-3;
        }
        const Vector lp = log_unnorm_prob(model, detail::visible_states(0, 32, 5));
        EXPECT_TRUE(lp.allFinite()) << "trial " << trial;
    }
}

namespace {

/// Relative error with a floor that only guards 0/0.
double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

void check_exact_gradient(RbmModel model, const Matrix& data) {
    const auto g = exact_gradients(model, data);
    const double h = 1e-5;
    auto fd = [&](double& param) {
        return oracle::central_difference(
            [&](double v) {
                const double saved = param;
                param = v;
                const double l = mean_log_likelihood(model, data);
                param = saved;
                return l;
            },
            param, h);
    };
    for (Eigen::Index i = 0; i < model.visible(); ++i) {
        EXPECT_LT(rel_err(g.weights.db[i], fd(model.b[i])), 1e-4) << "b" << i;
        for (Eigen::Index j = 0; j < model.hidden(); ++j)
            EXPECT_LT(rel_err(g.weights.dW(i, j), fd(model.W(i, j))), 1e-4) << "W" << i << j;
    }
    for (Eigen::Index j = 0; j < model.hidden(); ++j) {
        EXPECT_LT(rel_err(g.weights.dc[j], fd(model.c[j])), 1e-4) << "c" << j;
        EXPECT_LT(rel_err(g.weights.dd[j], fd(model.d[j])), 1e-4) << "d" << j;
    }
    for (Eigen::Index j = 0; j < model.trug.size(); ++j) {
        if (std::isfinite(model.trug.lower[j])) {
            EXPECT_LT(rel_err(g.trunc.d_lower[j], fd(model.trug.lower[j])), 1e-4) << "xi1 " << j;
        }
        if (std::isfinite(model.trug.upper[j])) {
            EXPECT_LT(rel_err(g.trunc.d_upper[j], fd(model.trug.upper[j])), 1e-4) << "xi2 " << j;
        }
    }
}

}  // namespace

TEST(ExactGradient, MatchesFiniteDifferencesPerUnit) {
    const auto model = random_model(6, 4, TrugParams::per_unit(Vector{{0.0, -1.0, 0.2, -kInf}},
                                                               Vector{{1.0, 1.0, kInf, 0.5}}),
                                    67, 0.8);
    Rng rng(71);
    check_exact_gradient(model, bernoulli(Matrix::Constant(15, 6, 0.4), rng));
}

TEST(ExactGradient, MatchesFiniteDifferencesShared) {
    const auto model = random_model(5, 3, TrugParams::shared(-0.3, 1.2), 73, 0.8);
    Rng rng(79);
    check_exact_gradient(model, bernoulli(Matrix::Constant(10, 5, 0.6), rng));
}

TEST(CdGradient, InfiniteEndpointGivesExactZero) {
    const auto model = random_model(4, 3, TrugParams::shared(0.0, kInf), 83);
    Rng rng(89);
    const auto g = cd_trunc_grad(model, bernoulli(Matrix::Constant(8, 4, 0.5), rng), 1, rng);
    EXPECT_EQ(g.d_upper[0], 0.0);
    EXPECT_NE(g.d_lower[0], 0.0);
}

TEST(CdGradient, RejectsBadArguments) {
    const auto model = RbmModel::zeros(2, 2, TrugParams::shared(0.0, 1.0));
    Rng rng(1);
    EXPECT_THROW(cd_weight_grad(model, Matrix(0, 2), 1, rng), ContractError);
    EXPECT_THROW(cd_weight_grad(model, Matrix::Zero(1, 2), 0, rng), ContractError);
}

TEST(CdGradient, StationaryWhenDataComesFromModel) {
    const auto model = random_model(4, 3, TrugParams::per_unit(Vector{{0.0, -1.0, 0.0}}, Vector{{1.0, 1.0, 2.0}}),
                                    97, 0.8);
    Rng rng(101);
    const int reps = 20;
    std::vector<Vector> draws;
    for (int r = 0; r < reps; ++r) {
        const auto g = cd_gradients(model, exact_samples(model, 5000, rng), 1, rng);
        Vector flat(model.W.size() + 4 + 3 + 3 + 6);
        flat << Eigen::Map<const Vector>(g.weights.dW.data(), g.weights.dW.size()), g.weights.db, g.weights.dc,
            g.weights.dd, g.trunc.d_lower, g.trunc.d_upper;
        draws.push_back(flat);
    }
    Vector mean = Vector::Zero(draws[0].size()), sq = Vector::Zero(draws[0].size());
    for (const auto& d : draws) {
        mean += d;
        sq += d.cwiseProduct(d);
    }
    mean /= reps;
    const Vector var = (sq / reps - mean.cwiseProduct(mean)) * reps / (reps - 1.0);
    for (Eigen::Index k = 0; k < mean.size(); ++k)
        EXPECT_LT(std::abs(mean[k]), 4.0 * std::sqrt(var[k] / reps) + 1e-12) << "component " << k;
}

TEST(CdGradient, PersistentChainsAdvance) {
    const auto model = random_model(4, 3, TrugParams::shared(0.0, 1.0), 103);
    Rng rng(107);
    GibbsChain chains;
    const Matrix data = bernoulli(Matrix::Constant(6, 4, 0.5), rng);
    cd_gradients(model, data, 2, rng, &chains);
    EXPECT_EQ(chains.step_count, 2);
    EXPECT_EQ(chains.x.rows(), 6);
    cd_gradients(model, data, 3, rng, &chains);
    EXPECT_EQ(chains.step_count, 5);
}

TEST(Initialize, Defaults) {
    Rng rng(109);
    const auto model = initialize(400, 50, TrugParams::shared(0.0, 1.0), rng);
    EXPECT_EQ(model.b.norm(), 0.0);
    EXPECT_EQ(model.c.norm(), 0.0);
    EXPECT_EQ(model.d, Vector::Ones(50));
    const double var = model.W.array().square().mean();
    EXPECT_NEAR(var, 0.01, 0.0005);
}

TEST(CdGradient, RegressionLockSinglePoint) {
    RbmModel model = RbmModel::zeros(3, 2, TrugParams::shared(0.0, 1.0));
    model.W << 0.5, -0.3, 0.2, 0.8, -0.6, 0.1;
    model.b << 0.1, -0.2, 0.3;
    model.c << 0.05, -0.1;
    model.d << 1.0, 1.5;
    Rng rng(2024);
    const auto g = cd_gradients(model, Matrix{{1.0, 0.0, 1.0}}, 1, rng);
    const Matrix dW{{-0.064243175615579629, -0.054163279586569746},
                    {-0.52012760520146062, -0.47231638455509739},
                    {0.45588442958588099, 0.41815310496852764}};
    EXPECT_TRUE(g.weights.dW.isApprox(dW, 1e-12));
    EXPECT_EQ(g.weights.db, (Vector{{0.0, -1.0, 1.0}}));
    EXPECT_NEAR(g.weights.dc[0], -0.064243175615579629, 1e-13);
    EXPECT_NEAR(g.weights.dc[1], -0.054163279586569746, 1e-13);
    EXPECT_NEAR(g.weights.dd[0], 0.031799043124273146, 1e-13);
    EXPECT_NEAR(g.weights.dd[1], 0.025805294693428654, 1e-13);
    EXPECT_NEAR(g.trunc.d_lower[0], -0.76826346464041118, 1e-12);
    EXPECT_NEAR(g.trunc.d_upper[0], -0.58624844036415402, 1e-12);
}
