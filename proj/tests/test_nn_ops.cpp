#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bvae/nn/adam.hpp"
#include "bvae/nn/grad_check.hpp"
#include "bvae/nn/network.hpp"
#include "bvae/nn/ops.hpp"
#include "support/reference_kernels.hpp"

using namespace bvae;
using namespace bvae::nn;
using bvae::oracle::random_tensor;

namespace {

double max_abs_diff(const TensorD& a, const TensorD& b) {
    EXPECT_EQ(a.shape(), b.shape());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double inner(const TensorD& a, const TensorD& b) { return dot<double>(a.values(), b.values()); }

} // namespace

TEST(Dense, IdentityWeights) {
    TensorD x({1, 2}, {1, 2});
    TensorD w({2, 2}, {1, 0, 0, 1});
    TensorD b({2}, {0, 0});
    EXPECT_EQ(dense_forward(x, w, b).storage(), (std::vector<double>{1, 2}));
}

TEST(Dense, HandMultiply) {
    TensorD x({1, 2}, {1, 2});
    TensorD w({2, 2}, {1, 0, 1, 1});
    TensorD b({2}, {0, 1});
    EXPECT_EQ(dense_forward(x, w, b).storage(), (std::vector<double>{3, 3}));
}

TEST(Dense, ShapeMismatchNamesLayer) {
    TensorD x({1, 3});
    TensorD w({2, 2});
    TensorD b({2});
    try {
        dense_forward(x, w, b, "encoder/dense16");
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        EXPECT_NE(std::string(e.what()).find("encoder/dense16"), std::string::npos);
    }
}

TEST(Conv2d, OneByOneIdentityKernel) {
    TensorD x = random_tensor({2, 5, 5, 1}, 1);
    TensorD k({1, 1, 1, 1}, {1.0});
    EXPECT_EQ(conv2d_forward(x, k, TensorD(), 1), x);
}

TEST(Conv2d, ConstantImageAllOnesKernel) {
    const double c = 0.37;
    TensorD x({1, 6, 6, 1}, c);
    TensorD k({3, 3, 1, 1}, 1.0);
    TensorD y = conv2d_forward(x, k, TensorD(), 1);
    for (std::size_t r = 1; r < 5; ++r)
        for (std::size_t col = 1; col < 5; ++col) EXPECT_NEAR(y[r * 6 + col], 9 * c, 1e-12);
    // Corner sees a 2x2 window.
    EXPECT_NEAR(y[0], 4 * c, 1e-12);
}

TEST(Conv2d, StrideTwoTwiceGives7x7) {
    Tensor x({1, 28, 28, 1}, 0.5f);
    Tensor k1({3, 3, 1, 32}, 0.1f);
    Tensor k2({3, 3, 32, 64}, 0.1f);
    Tensor h = conv2d_forward(x, k1, Tensor(), 2);
    EXPECT_EQ(h.shape(), (Shape{1, 14, 14, 32}));
    Tensor y = conv2d_forward(h, k2, Tensor(), 2);
    EXPECT_EQ(y.shape(), (Shape{1, 7, 7, 64}));
}

TEST(Conv2d, ChannelMismatchIsDimensionError) {
    TensorD x({1, 4, 4, 2});
    TensorD k({3, 3, 3, 1});
    EXPECT_THROW(conv2d_forward(x, k, TensorD(), 1), DimensionError);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
    const std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> cases = {
        {7, 3, 4, 1}, {7, 3, 4, 2}, {8, 2, 5, 2}, {28, 1, 3, 2}, {5, 4, 2, 1}};
    unsigned seed = 10;
    for (auto [hw, c, f, s] : cases) {
        TensorD x = random_tensor({3, hw, hw, c}, seed++);
        TensorD k = random_tensor({3, 3, c, f}, seed++);
        const TensorD fast = conv2d_forward(x, k, TensorD(), s);
        const TensorD slow = oracle::naive_conv2d(x, k, s);
        EXPECT_LT(max_abs_diff(fast, slow), 1e-12) << "hw=" << hw << " s=" << s;
    }
}

TEST(Conv2dTranspose, OneByOneIdentity) {
    TensorD x = random_tensor({2, 4, 4, 1}, 3);
    TensorD k({1, 1, 1, 1}, {1.0});
    EXPECT_EQ(conv2d_transpose_forward(x, k, TensorD(), 1), x);
}

TEST(Conv2dTranspose, UpsamplesPaperDecoderShapes) {
    Tensor x({2, 7, 7, 64}, 0.1f);
    Tensor k1({3, 3, 64, 64}, 0.01f);
    Tensor k2({3, 3, 32, 64}, 0.01f);
    Tensor h = conv2d_transpose_forward(x, k1, Tensor(), 2);
    EXPECT_EQ(h.shape(), (Shape{2, 14, 14, 64}));
    EXPECT_EQ(conv2d_transpose_forward(h, k2, Tensor(), 2).shape(), (Shape{2, 28, 28, 32}));
}

TEST(Conv2dTranspose, MatchesScatterOracle) {
    unsigned seed = 40;
    for (std::size_t s : {1u, 2u}) {
        TensorD x = random_tensor({2, 5, 5, 3}, seed++);
        TensorD k = random_tensor({3, 3, 4, 3}, seed++);
        EXPECT_LT(max_abs_diff(conv2d_transpose_forward(x, k, TensorD(), s), oracle::naive_conv2d_transpose(x, k, s)),
                  1e-12);
    }
}

TEST(Conv2dTranspose, InconsistentOutputGeometryRejected) {
    EXPECT_THROW(transpose_conv_geometry(7, 7, 64, 32, 3, 2, 16, 16), DimensionError);
    EXPECT_NO_THROW(transpose_conv_geometry(7, 7, 64, 32, 3, 2, 13, 13));
}

TEST(Conv2dTranspose, AdjointOfConv) {
    // <conv(x), y> == <x, conv^T(y)> with shared kernels.
    const std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> cases = {
        {28, 1, 32, 2}, {14, 32, 64, 2}, {7, 4, 6, 1}, {4, 2, 3, 2}, {6, 3, 2, 2}};
    unsigned seed = 100;
    for (auto [hw, c, f, s] : cases) {
        TensorD x = random_tensor({2, hw, hw, c}, seed++);
        TensorD k = random_tensor({3, 3, c, f}, seed++);
        const TensorD cx = conv2d_forward(x, k, TensorD(), s);
        TensorD y = random_tensor(cx.shape(), seed++);
        // The transposed conv reads kernels as k x k x C_out x C_in: here C_out = c, C_in = f.
        const TensorD cty = conv2d_transpose_forward(y, k, TensorD(), s);
        ASSERT_EQ(cty.shape(), x.shape());
        const double lhs = inner(cx, y);
        const double rhs = inner(x, cty);
        EXPECT_LT(std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-30), 1e-10) << hw << "/" << s;
    }
}

TEST(Activations, ScalarValues) {
    TensorD x({1, 2}, {-1.0, 2.0});
    EXPECT_EQ(activation_forward(Activation::relu, x).storage(), (std::vector<double>{0, 2}));
    EXPECT_EQ(activation_forward(Activation::sigmoid, TensorD({1}, {0.0}))[0], 0.5);
    EXPECT_EQ(activation_forward(Activation::linear, x), x);
}

TEST(Activations, SoftmaxOfEqualLogitsIsUniform) {
    TensorD x({1, 10}, 3.0);
    const TensorD p = activation_forward(Activation::softmax, x);
    for (double v : p.values()) EXPECT_DOUBLE_EQ(v, 0.1);
}

TEST(Activations, SoftmaxRowsAreOnSimplex) {
    TensorD x = random_tensor({50, 10}, 5, -30, 30);
    TensorD p = activation_forward(Activation::softmax, x);
    for (std::size_t r = 0; r < 50; ++r) {
        double s = 0;
        for (double v : p.row(r)) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(LayerBackward, LinearActivationPassesGradientThrough) {
    const LayerSpec spec = LayerSpec::activate("id", Activation::linear);
    LayerCache<double> cache;
    TensorD x = random_tensor({3, 4}, 8);
    layer_forward<double>(spec, {}, x, &cache);
    TensorD g = random_tensor({3, 4}, 9);
    EXPECT_EQ(layer_backward<double>(spec, {}, cache, g).input, g);
}

TEST(LayerBackward, MissingCacheIsUsageError) {
    const LayerSpec spec = LayerSpec::dense("d", 2);
    LayerCache<double> empty;
    TensorD w({2, 2}), b({2});
    EXPECT_THROW(layer_backward<double>(spec, {&w, &b}, empty, TensorD({1, 2})), UsageError);
}

TEST(LayerBackward, ConvInputGradientIsTransposedConvOfGradOutput) {
    TensorD x = random_tensor({2, 8, 8, 3}, 11);
    TensorD k = random_tensor({3, 3, 3, 5}, 12);
    TensorD b({5});
    const LayerSpec spec = LayerSpec::conv2d("c", 5, 3, 2);
    LayerCache<double> cache;
    const TensorD y = layer_forward<double>(spec, {&k, &b}, x, &cache);
    const TensorD g = random_tensor(y.shape(), 13);
    const TensorD gx = layer_backward<double>(spec, {&k, &b}, cache, g).input;
    EXPECT_LT(max_abs_diff(gx, conv2d_transpose_forward(g, k, TensorD(), 2)), 1e-12);
}

namespace {

// Checks d<out, probe>/d(input and params) of a single layer against central differences.
double single_layer_gradient_error(const LayerSpec& spec, const Shape& sample_shape, unsigned seed) {
    Network<double> net("probe", sample_shape, {spec});
    std::mt19937_64 rng(seed);
    net.initialize(rng);
    for (auto& p : net.parameters()) {
        for (double& v : p.value.values()) v += 0.05 * std::uniform_real_distribution<double>(-1, 1)(rng);
    }
    Shape in_shape{3};
    in_shape.insert(in_shape.end(), sample_shape.begin(), sample_shape.end());
    Parameter<double> input{"input", random_tensor(in_shape, seed + 1), TensorD(in_shape)};
    Network<double>::Cache cache;
    const TensorD out = net.forward(input.value, &cache);
    const TensorD probe = random_tensor(out.shape(), seed + 2);
    net.zero_grad();
    input.grad = net.backward(cache, probe);

    std::vector<Parameter<double>*> params{&input};
    for (auto& p : net.parameters()) params.push_back(&p);
    auto loss = [&] { return inner(net.forward(input.value), probe); };
    return grad_check(loss, params).max_relative_error;
}

} // namespace

TEST(LayerBackward, EveryLayerKindMatchesFiniteDifferences) {
    EXPECT_LE(single_layer_gradient_error(LayerSpec::dense("d", 4), {5}, 21), 1e-4);
    EXPECT_LE(single_layer_gradient_error(LayerSpec::conv2d("c", 3, 3, 1), {5, 5, 2}, 22), 1e-4);
    EXPECT_LE(single_layer_gradient_error(LayerSpec::conv2d("c", 3, 3, 2), {6, 6, 2}, 23), 1e-4);
    EXPECT_LE(single_layer_gradient_error(LayerSpec::conv2d_transpose("t", 3, 3, 2), {3, 3, 2}, 24), 1e-4);
    EXPECT_LE(single_layer_gradient_error(LayerSpec::conv2d_transpose("t", 2, 3, 1), {4, 4, 3}, 25), 1e-4);
    EXPECT_LE(single_layer_gradient_error(LayerSpec::activate("s", Activation::sigmoid), {6}, 26), 1e-4);
    EXPECT_LE(single_layer_gradient_error(LayerSpec::activate("r", Activation::relu), {6}, 27), 1e-4);
    EXPECT_LE(single_layer_gradient_error(LayerSpec::activate("m", Activation::softmax), {6}, 28), 1e-4);
    EXPECT_LE(single_layer_gradient_error(LayerSpec::flatten("f"), {2, 2, 2}, 29), 1e-4);
    EXPECT_LE(single_layer_gradient_error(LayerSpec::reshape("r", {2, 4}), {8}, 30), 1e-4);
}

TEST(SoftmaxCrossEntropy, ConfidentCorrectPredictionHasZeroLoss) {
    TensorD logits({1, 3}, {0.0, 800.0, 0.0});
    TensorD labels({1, 3}, {0, 1, 0});
    const std::vector<double> w{1.0};
    EXPECT_NEAR(softmax_cross_entropy<double>(logits, labels, w).loss, 0.0, 1e-300);
}

TEST(SoftmaxCrossEntropy, UniformPredictionCostsLn10PerUnitWeight) {
    TensorD logits({2, 10}, 0.0);
    TensorD labels({2, 10});
    labels[3] = 1;
    labels[10 + 7] = 1;
    const std::vector<double> ones{1.0, 1.0};
    EXPECT_NEAR(softmax_cross_entropy<double>(logits, labels, ones).loss, 2.302585092994046, 1e-12);
    const std::vector<double> weights{2.0, 2.0};
    EXPECT_NEAR(softmax_cross_entropy<double>(logits, labels, weights).loss, 2 * 2.302585092994046, 1e-12);
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
    Parameter<double> logits{"logits", random_tensor({4, 10}, 31, -3, 3), TensorD({4, 10})};
    TensorD labels({4, 10});
    for (std::size_t b = 0; b < 4; ++b) labels[b * 10 + (b * 3) % 10] = 1;
    const std::vector<double> w{1.0, 0.5, 2.0, 10.0};
    logits.grad = softmax_cross_entropy<double>(logits.value, labels, w).grad_logits;
    std::vector<Parameter<double>*> ps{&logits};
    auto loss = [&] { return softmax_cross_entropy<double>(logits.value, labels, w).loss; };
    EXPECT_LE(grad_check(loss, ps).max_relative_error, 1e-4);
}

TEST(SoftmaxCrossEntropy, RowWithoutLabelIsValidationError) {
    TensorD logits({2, 3});
    TensorD labels({2, 3});
    labels[0] = 1;
    const std::vector<double> w{1.0, 1.0};
    EXPECT_THROW(softmax_cross_entropy<double>(logits, labels, w), ValidationError);
}

namespace {
std::vector<Parameter<double>*> ptrs(std::vector<Parameter<double>>& ps) {
    std::vector<Parameter<double>*> out;
    for (auto& p : ps) out.push_back(&p);
    return out;
}
} // namespace

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
    std::vector<Parameter<double>> ps{{"w", random_tensor({3, 3}, 41), TensorD({3, 3})}};
    const TensorD before = ps[0].value;
    auto p = ptrs(ps);
    auto state = make_adam_state<double>(p);
    for (int i = 0; i < 5; ++i) adam_step<double>(p, state);
    EXPECT_EQ(ps[0].value, before);
    EXPECT_EQ(state.step, 5u);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
    std::vector<Parameter<double>> ps{{"w", TensorD({4}, {0.0, 1.0, -2.0, 5.0}), TensorD({4}, {3.0, -0.5, 2e-3, -40.0})}};
    const TensorD before = ps[0].value;
    auto p = ptrs(ps);
    auto state = make_adam_state<double>(p);
    adam_step<double>(p, state);
    for (std::size_t i = 0; i < 4; ++i) {
        const double g = ps[0].grad[i];
        // m_hat = g, v_hat = g^2 after bias correction.
        const double expected = -1e-3 * g / (std::abs(g) + 1e-7);
        EXPECT_NEAR(ps[0].value[i] - before[i], expected, 1e-15);
        EXPECT_NEAR(ps[0].value[i] - before[i], -1e-3 * (g > 0 ? 1 : -1), 1e-7);
    }
}

TEST(Adam, QuadraticTrajectoryMatchesScalarReference) {
    std::vector<Parameter<double>> ps{{"w", TensorD({1}, {1.5}), TensorD({1})}};
    auto p = ptrs(ps);
    auto state = make_adam_state<double>(p, {0.05, 0.9, 0.999, 1e-7});
    auto grad = [](double w) { return 2 * w; };
    const auto reference = oracle::scalar_adam_trajectory(1.5, 100, 0.05, 0.9, 0.999, 1e-7, grad);
    for (int t = 0; t < 100; ++t) {
        ps[0].grad[0] = grad(ps[0].value[0]);
        adam_step<double>(p, state);
        EXPECT_NEAR(ps[0].value[0], reference[t], 1e-10);
    }
    EXPECT_LT(std::abs(ps[0].value[0]), 1.5);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
    std::vector<Parameter<double>> ps{{"decoder/out/bias", TensorD({2}), TensorD({2}, {0.0, NAN})}};
    auto p = ptrs(ps);
    auto state = make_adam_state<double>(p);
    try {
        adam_step<double>(p, state);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("decoder/out/bias"), std::string::npos);
    }
    EXPECT_EQ(state.step, 0u);
}

TEST(GradCheck, TinyDenseReluSoftmaxNet) {
    Network<double> net("tiny", {6},
                        {LayerSpec::dense("h", 5), LayerSpec::activate("r", Activation::relu), LayerSpec::dense("o", 4),
                         LayerSpec::activate("s", Activation::softmax)});
    std::mt19937_64 rng(7);
    net.initialize(rng);
    const TensorD x = random_tensor({5, 6}, 51);
    const TensorD probe = random_tensor({5, 4}, 52);
    Network<double>::Cache cache;
    net.forward(x, &cache);
    net.zero_grad();
    net.backward(cache, probe);
    std::vector<Parameter<double>*> ps;
    for (auto& p : net.parameters()) ps.push_back(&p);
    auto loss = [&] { return inner(net.forward(x), probe); };
    EXPECT_LE(grad_check(loss, ps).max_relative_error, 1e-4);
}

TEST(GradCheck, TinyConvSigmoidNet) {
    Network<double> net("tinyconv", {6, 6, 1},
                        {LayerSpec::conv2d("c", 3, 3, 2), LayerSpec::activate("s", Activation::sigmoid),
                         LayerSpec::flatten("f"), LayerSpec::dense("o", 2)});
    std::mt19937_64 rng(8);
    net.initialize(rng);
    const TensorD x = random_tensor({3, 6, 6, 1}, 53, 0, 1);
    const TensorD probe = random_tensor({3, 2}, 54);
    Network<double>::Cache cache;
    net.forward(x, &cache);
    net.zero_grad();
    net.backward(cache, probe);
    std::vector<Parameter<double>*> ps;
    for (auto& p : net.parameters()) ps.push_back(&p);
    auto loss = [&] { return inner(net.forward(x), probe); };
    EXPECT_LE(grad_check(loss, ps).max_relative_error, 1e-4);
}

TEST(Network, ShapesMustCompose) {
    EXPECT_THROW(Network<float>("bad", {4, 4, 1}, {LayerSpec::dense("d", 3)}), DimensionError);
    EXPECT_THROW(Network<float>("bad", {12}, {LayerSpec::reshape("r", {5, 2})}), DimensionError);
}

TEST(Network, RejectsWrongInputShape) {
    Network<float> net("n", {4}, {LayerSpec::dense("d", 2)});
    EXPECT_THROW(net.forward(Tensor({1, 5})), DimensionError);
}
