#include <trug/train.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace trug;

namespace {

// 100 examples drawn around two 8-pixel prototypes with 10% flip noise.
Matrix two_prototypes(std::uint64_t seed) {
    Rng rng(seed);
    std::bernoulli_distribution flip(0.1), which(0.5);
    const double protos[2][8] = {{1, 1, 1, 1, 0, 0, 0, 0}, {0, 0, 1, 1, 1, 1, 0, 1}};
    Matrix x(100, 8);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const int k = which(rng) ? 1 : 0;
        for (Eigen::Index c = 0; c < 8; ++c) x(r, c) = flip(rng) ? 1.0 - protos[k][c] : protos[k][c];
    }
    return x;
}

TrainOptions small_options() {
    TrainOptions opt;
    opt.optimizer.kind = OptimizerKind::rmsprop;
    opt.optimizer.learning_rate = 1e-2;
    opt.optimizer.decay = 0.95;
    opt.optimizer.batch_size = 10;
    opt.optimizer.trunc = {1e-2, 1e-4, 200};
    opt.cd_k = 1;
    return opt;
}

}  // namespace

TEST(Train, StepsPerEpochRoundsUp) {
    EXPECT_EQ(steps_per_epoch(100, 10), 10);
    EXPECT_EQ(steps_per_epoch(101, 10), 11);
    EXPECT_EQ(steps_per_epoch(5, 10), 1);
    EXPECT_THROW(steps_per_epoch(5, 0), ContractError);
}

TEST(Train, ShuffledIndicesIsAPermutation) {
    Rng rng(1);
    auto idx = shuffled_indices(50, rng);
    std::sort(idx.begin(), idx.end());
    for (Eigen::Index i = 0; i < 50; ++i) EXPECT_EQ(idx[static_cast<std::size_t>(i)], i);
}

TEST(Train, RbmImprovesExactLikelihood) {
    const Matrix x = two_prototypes(11);
    Rng rng(2);
    RbmModel model = initialize(8, 3, TrugParams::shared(0.0, 1.0), rng);
    const double before = exact_log_prob(model, x).mean();
    const TrainOptions opt = small_options();
    OptimizerState state;
    for (int epoch = 0; epoch < 20; ++epoch) train_rbm_epoch(model, x, opt, state, rng);
    EXPECT_EQ(state.step, 200);
    const double after = exact_log_prob(model, x).mean();
    EXPECT_GT(after, before + 0.5) << before << " -> " << after;
    EXPECT_LT(model.trug.lower[0] + 1e-3, model.trug.upper[0] + 1e-12);
    EXPECT_TRUE((model.d.array() > 0).all());
}

TEST(Train, PersistentChainsAlsoImprove) {
    const Matrix x = two_prototypes(12);
    Rng rng(4);
    RbmModel model = initialize(8, 3, TrugParams::shared(0.0, 1.0), rng);
    const double before = exact_log_prob(model, x).mean();
    TrainOptions opt = small_options();
    opt.persistent = true;
    OptimizerState state;
    GibbsChain chain;
    for (int epoch = 0; epoch < 20; ++epoch) train_rbm_epoch(model, x, opt, state, rng, &chain);
    EXPECT_EQ(chain.x.rows(), 10);
    EXPECT_GT(exact_log_prob(model, x).mean(), before + 0.5);
}

TEST(Train, SameSeedSameModel) {
    const Matrix x = two_prototypes(13);
    auto run = [&] {
        Rng rng(99);
        RbmModel model = initialize(8, 3, TrugParams::per_unit(3, 0.0, 1.0), rng);
        OptimizerState state;
        for (int epoch = 0; epoch < 3; ++epoch) train_rbm_epoch(model, x, small_options(), state, rng);
        return model;
    };
    const RbmModel a = run(), b = run();
    EXPECT_EQ(a.W, b.W);
    EXPECT_EQ(a.d, b.d);
    EXPECT_EQ(a.trug.lower, b.trug.lower);
    EXPECT_EQ(a.trug.upper, b.trug.upper);
}

TEST(Train, FrozenPiecesStayPut) {
    const Matrix x = two_prototypes(14);
    Rng rng(5);
    RbmModel model = initialize(8, 3, TrugParams::shared(-1.0, 1.0, {false, false}), rng);
    TrainOptions opt = small_options();
    opt.learn_d = false;
    OptimizerState state;
    train_rbm_epoch(model, x, opt, state, rng);
    EXPECT_EQ(model.trug.lower[0], -1.0);
    EXPECT_EQ(model.trug.upper[0], 1.0);
    EXPECT_TRUE((model.d.array() == 1.0).all());
}

TEST(Train, NonFiniteGradientIsNumericalError) {
    Rng rng(6);
    RbmModel model = initialize(4, 2, TrugParams::shared(0.0, 1.0), rng);
    const RbmModel before = model;
    RbmGradients g{RbmGrad::zeros_like(model), TrugGrad::zeros_like(model.trug)};
    g.weights.dW(1, 1) = std::numeric_limits<double>::quiet_NaN();
    OptimizerState state;
    EXPECT_THROW(apply_step(small_options(), state, model, g), NumericalError);
    EXPECT_EQ(model.W, before.W);
}

TEST(Train, TggmLowersTrainingError) {
    Rng rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix x(200, 2), y(200, 1);
    for (Eigen::Index r = 0; r < 200; ++r) {
        x(r, 0) = g(rng);
        x(r, 1) = g(rng);
        y(r, 0) = std::max(0.0, x(r, 0)) - 0.5 * x(r, 1) + 0.1 * g(rng);
    }
    TggmModel model = initialize_tggm(2, 8, 1, TrugParams::shared(0.0, kInf, {false, false}), rng, 0.1, 0.5);
    const double before = rmse(model, x, y);
    TrainOptions opt = small_options();
    opt.optimizer.batch_size = 20;
    OptimizerState state;
    for (int epoch = 0; epoch < 30; ++epoch) train_tggm_epoch(model, x, y, opt, state, rng);
    EXPECT_LT(rmse(model, x, y), 0.5 * before);
}

TEST(Train, TrbmLowersPredictionError) {
    // Period-two sequences: frame t+1 is the complement of frame t.
    Rng rng(8);
    std::bernoulli_distribution coin(0.5);
    SequenceBatch data;
    for (int s = 0; s < 20; ++s) {
        Matrix seq(8, 6);
        for (Eigen::Index c = 0; c < 6; ++c) seq(0, c) = coin(rng) ? 1.0 : 0.0;
        for (Eigen::Index t = 1; t < 8; ++t) seq.row(t) = (1.0 - seq.row(t - 1).array()).matrix();
        data.sequences.push_back(seq);
    }
    TrbmModel model = initialize_trbm(6, 10, TrugParams::shared(0.0, 1.0), rng);
    const double before = prediction_error(model, data);
    TrainOptions opt = small_options();
    opt.optimizer.kind = OptimizerKind::sgd_momentum;
    opt.optimizer.decay = 0.9;
    opt.optimizer.batch_size = 5;
    opt.optimizer.trunc = {1e-5, 1e-7, 120};
    OptimizerState state;
    for (int epoch = 0; epoch < 30; ++epoch) train_trbm_epoch(model, data, opt, state, rng);
    EXPECT_LT(prediction_error(model, data), 0.25 * before);
}
