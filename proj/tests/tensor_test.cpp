#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lusk/tensor.hpp"
#include "op_cases.hpp"

using namespace lusk;

namespace {

using TD = Tensor<double>;

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

// Sliding-window convolution straight from the definition.
std::vector<double> direct_conv(const std::vector<double>& x, std::size_t N, std::size_t Ci,
                                std::size_t H, std::size_t W, const std::vector<double>& w,
                                std::size_t Co, std::size_t K, const std::vector<double>& b,
                                std::size_t stride, std::size_t pad)
{
    const std::size_t Ho = (H + 2 * pad - K) / stride + 1, Wo = (W + 2 * pad - K) / stride + 1;
    std::vector<double> out(N * Co * Ho * Wo);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t co = 0; co < Co; ++co)
            for (std::size_t oh = 0; oh < Ho; ++oh)
                for (std::size_t ow = 0; ow < Wo; ++ow) {
                    double s = b.empty() ? 0.0 : b[co];
                    for (std::size_t ci = 0; ci < Ci; ++ci)
                        for (std::size_t kh = 0; kh < K; ++kh)
                            for (std::size_t kw = 0; kw < K; ++kw) {
                                long ih = long(oh * stride + kh) - long(pad);
                                long iw = long(ow * stride + kw) - long(pad);
                                if (ih < 0 || iw < 0 || ih >= long(H) || iw >= long(W)) continue;
                                s += x[((n * Ci + ci) * H + ih) * W + iw] *
                                     w[((co * Ci + ci) * K + kh) * K + kw];
                            }
                    out[((n * Co + co) * Ho + oh) * Wo + ow] = s;
                }
    return out;
}

} // namespace

TEST(Tensor, ShapeInvariant)
{
    EXPECT_THROW(TD({2, 3}, std::vector<double>(5)), ShapeError);
    TD t({2, 3}, std::vector<double>(6, 1.0), true);
    EXPECT_EQ(t.grad().size(), t.numel());
}

TEST(Ops, ReluDefinition)
{
    auto y = relu(TD({3}, {-1.0, 0.0, 2.0}));
    EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()),
              (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(Ops, IdentityOneByOneConvolution)
{
    const std::size_t C = 3;
    TD x({2, C, 4, 5}, random_values(2 * C * 20, 1));
    std::vector<double> w(C * C, 0.0);
    for (std::size_t i = 0; i < C; ++i) w[i * C + i] = 1.0;
    auto y = conv2d(x, TD({C, C, 1, 1}, w), TD{});
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Ops, AllOnesThreeByThreeCenterIsNine)
{
    auto y = conv2d(TD::full({1, 1, 5, 5}, 1.0), TD::full({1, 1, 3, 3}, 1.0), TD{}, 1, 1);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 5, 5}));
    EXPECT_DOUBLE_EQ(y[2 * 5 + 2], 9.0);
    EXPECT_DOUBLE_EQ(y[0], 4.0);
}

TEST(Ops, ConvolutionMatchesDirectOracle)
{
    for (std::size_t stride : {1u, 2u}) {
        for (std::size_t pad : {0u, 1u}) {
            const std::size_t N = 2, Ci = 3, Co = 4, K = 3;
            auto xv = random_values(N * Ci * 64, 10 + stride + pad);
            auto wv = random_values(Co * Ci * K * K, 20 + stride);
            auto bv = random_values(Co, 30);
            auto y = conv2d(TD({N, Ci, 8, 8}, xv), TD({Co, Ci, K, K}, wv), TD({Co}, bv), stride, pad);
            auto ref = direct_conv(xv, N, Ci, 8, 8, wv, Co, K, bv, stride, pad);
            ASSERT_EQ(y.numel(), ref.size());
            for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-10);
        }
    }
}

TEST(Ops, ShapeMismatchNamesOperationAndShapes)
{
    try {
        conv2d(TD::zeros({1, 3, 4, 4}), TD::zeros({2, 5, 3, 3}), TD{});
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("conv2d"), std::string::npos);
        EXPECT_NE(msg.find("[1,3,4,4]"), std::string::npos);
        EXPECT_NE(msg.find("[2,5,3,3]"), std::string::npos);
    }
    EXPECT_THROW(add(TD::zeros({2, 3}), TD::zeros({3, 2})), ShapeError);
    EXPECT_THROW(matmul(TD::zeros({2, 3}), TD::zeros({2, 3})), ShapeError);
    EXPECT_THROW(mse(TD::zeros({2}), TD::zeros({3})), ShapeError);
}

TEST(Ops, BroadcastAcrossChannels)
{
    TD x({1, 2, 1, 2}, {1, 2, 3, 4});
    TD h({1, 1, 1, 2}, {10, 100});
    auto y = mul(x, h);
    EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()),
              (std::vector<double>{10, 200, 30, 400}));
}

TEST(Ops, SpatialSoftmaxNormalizedAndShiftInvariant)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto v = random_values(2 * 3 * 36, rng(), -20, 20);
        TD x({2, 3, 6, 6}, v);
        auto y = spatial_softmax(x);
        for (std::size_t p = 0; p < 6; ++p) {
            double s = 0;
            for (std::size_t i = 0; i < 36; ++i) s += y[p * 36 + i];
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
        const double shift = std::uniform_real_distribution<double>(-50, 50)(rng);
        auto ys = spatial_softmax(affine(x, 1.0, shift));
        for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(ys[i], y[i], 1e-12);
    }
}

TEST(Ops, ForwardIsDeterministic)
{
    auto xv = random_values(2 * 3 * 64, 3);
    auto wv = random_values(4 * 3 * 9, 4);
    auto run = [&] {
        Tensor<float> x({2, 3, 8, 8}, std::vector<float>(xv.begin(), xv.end()));
        Tensor<float> w({4, 3, 3, 3}, std::vector<float>(wv.begin(), wv.end()));
        auto y = spatial_softmax(instance_norm(relu(conv2d(x, w, Tensor<float>{}, 2, 1))));
        return std::vector<float>(y.values().begin(), y.values().end());
    };
    auto a = run(), b = run();
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(float)));
}

TEST(Backward, SumOfSquares)
{
    TD x({3}, {1, 2, 3}, true);
    backward(sum(mul(x, x)));
    EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, 4, 6}));
    // Second call overwrites instead of accumulating.
    backward(sum(mul(x, x)));
    EXPECT_DOUBLE_EQ(x.grad()[2], 6.0);
}

TEST(Backward, IndependentParameterGetsZero)
{
    TD x({3}, {1, 2, 3}, true);
    TD p({2}, {5, 6}, true);
    auto loss = add(sum(mul(x, x)), sum(mul(stop_gradient(p), p.clone())));
    backward(loss);
    EXPECT_EQ(p.grad()[0], 0.0);
    EXPECT_EQ(p.grad()[1], 0.0);
}

TEST(Backward, RejectsNonScalarLoss)
{
    TD x({3}, {1, 2, 3}, true);
    EXPECT_THROW(backward(mul(x, x)), ShapeError);
    EXPECT_THROW(backward(sum(TD({2}, {1, 2}))), std::invalid_argument);
}

TEST(Backward, ConvolutionWeightMatchesFiniteDifferences)
{
    TD x({2, 3, 6, 6}, random_values(2 * 3 * 36, 11));
    TD w({4, 3, 3, 3}, random_values(4 * 27, 12), true);
    TD b({4}, random_values(4, 13), true);
    auto target = random_values(2 * 4 * 3 * 3, 14);
    auto loss_of = [&] { return sum(mul(conv2d(x, w, b, 2, 1), TD({2, 4, 3, 3}, target))); };
    backward(loss_of());
    const double h = 1e-5;
    for (std::size_t i = 0; i < w.numel(); ++i) {
        auto v = w.values_mut();
        const double orig = v[i];
        v[i] = orig + h;
        const double up = loss_of().item();
        v[i] = orig - h;
        const double down = loss_of().item();
        v[i] = orig;
        const double fd = (up - down) / (2 * h);
        EXPECT_LT(std::abs(fd - w.grad()[i]) / std::max(std::abs(fd), 1e-8), 1e-4) << "entry " << i;
    }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged)
{
    std::vector<Tensor<double>> params{Tensor<double>::parameter("w", {3}, {1, -2, 3})};
    AdamState<double> st;
    adam_step(params, st, 1e-3);
    adam_step(params, st, 1e-3);
    EXPECT_EQ(st.step, 2u);
    EXPECT_EQ(params[0][0], 1.0);
    EXPECT_EQ(params[0][1], -2.0);
}

TEST(Adam, FirstStepMagnitude)
{
    std::vector<Tensor<double>> params{Tensor<double>::parameter("w", {2}, {0.0, 0.0})};
    params[0].grad_mut()[0] = 0.5;
    params[0].grad_mut()[1] = -3.0;
    AdamState<double> st;
    const double lr = 1e-3;
    adam_step(params, st, lr);
    EXPECT_NEAR(params[0][0], -lr * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_NEAR(params[0][1], lr * 3.0 / (3.0 + 1e-8), 1e-15);
}

TEST(Adam, TwoStepsMatchHandSimulation)
{
    // Scalar recurrences written out independently of adam_step.
    const double g = 0.2, lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double p = 1.0, m = 0, v = 0;
    std::vector<double> expected;
    for (int t = 1; t <= 2; ++t) {
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        p -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
        expected.push_back(p);
    }
    std::vector<Tensor<double>> params{Tensor<double>::parameter("w", {1}, {1.0})};
    AdamState<double> st;
    for (int t = 0; t < 2; ++t) {
        params[0].grad_mut()[0] = g;
        adam_step(params, st, lr);
        EXPECT_NEAR(params[0][0], expected[t], 1e-14);
    }
    EXPECT_LT(expected[1], expected[0]);
    EXPECT_LT(expected[0], 1.0);
}

TEST(Adam, RejectsNonFiniteGradientByName)
{
    std::vector<Tensor<double>> params{Tensor<double>::parameter("encoder.conv1.weight", {2}, {0, 0})};
    params[0].grad_mut()[1] = std::nan("");
    AdamState<double> st;
    try {
        adam_step(params, st, 1e-3);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("encoder.conv1.weight"), std::string::npos);
    }
    EXPECT_EQ(st.step, 0u);
    EXPECT_THROW(adam_step(params, st, 0.0), std::invalid_argument);
}

// Every differentiable operator against central differences.
class GradcheckOps : public ::testing::TestWithParam<oracle::OpCase> {};

TEST_P(GradcheckOps, MatchesFiniteDifferences)
{
    const auto& c = GetParam();
    GradcheckOptions opts;
    opts.min_abs = c.min_abs;
    auto r = gradcheck(c.op, c.shapes, c.tol, opts);
    EXPECT_TRUE(r.passed) << c.name << ": " << r.max_rel_error << " at " << r.worst;
    EXPECT_GT(r.entries_checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradcheckOps, ::testing::ValuesIn(oracle::differentiable_ops()),
                         [](const auto& info) { return std::string(info.param.name); });

TEST(Gradcheck, ElementwiseMultiplyIsTight)
{
    auto r = gradcheck([](auto& in) { return mul(in[0], in[1]); }, {{4, 4}, {4, 4}}, 1e-7);
    EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(Gradcheck, StopGradientHasZeroAnalyticGradient)
{
    TD x({6}, random_values(6, 5), true);
    TD y({6}, random_values(6, 6), true);
    backward(sum(mul(stop_gradient(x), y)));
    for (double g : x.grad()) EXPECT_EQ(g, 0.0);
    EXPECT_EQ(y.grad()[0], x[0]);
}

TEST(Checkpoint, RoundTripIsBitExact)
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<TensorRecord> recs;
        const int n = int(rng() % 5) + 1;
        for (int i = 0; i < n; ++i) {
            TensorRecord r;
            r.name = "param." + std::to_string(rng() % 1000);
            const std::size_t rank = rng() % 4;
            for (std::size_t d = 0; d < rank; ++d) r.dims.push_back(1 + rng() % 4);
            r.values.resize(numel(r.dims));
            for (auto& v : r.values) v = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
            recs.push_back(std::move(r));
        }
        std::stringstream ss;
        write_records(ss, recs);
        auto back = read_records(ss);
        ASSERT_EQ(back.size(), recs.size());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            EXPECT_EQ(back[i].name, recs[i].name);
            EXPECT_EQ(back[i].dims, recs[i].dims);
            ASSERT_EQ(back[i].values.size(), recs[i].values.size());
            EXPECT_EQ(0, std::memcmp(back[i].values.data(), recs[i].values.data(),
                                     recs[i].values.size() * sizeof(float)));
        }
    }
}

TEST(Checkpoint, LayoutIsLittleEndian)
{
    std::stringstream ss;
    write_records(ss, {TensorRecord{"w", {2}, {1.0f, -2.0f}}});
    const std::string bytes = ss.str();
    ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 1 + 4 + 8 + 8);
    EXPECT_EQ(bytes.substr(0, 4), "LUSK");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[8], 1);
    EXPECT_EQ(bytes[12], 'w');
    EXPECT_EQ(bytes[13], 1);
    EXPECT_EQ(bytes[17], 2);
    // 1.0f = 0x3f800000
    EXPECT_EQ(static_cast<unsigned char>(bytes[28]), 0x3f);
    EXPECT_EQ(static_cast<unsigned char>(bytes[27]), 0x80);
}

TEST(Checkpoint, RejectsCorruptInput)
{
    std::stringstream bad("NOPE");
    EXPECT_THROW(read_records(bad), DataError);
    std::stringstream ss;
    write_records(ss, {TensorRecord{"w", {4}, {1, 2, 3, 4}}});
    std::string s = ss.str();
    std::stringstream truncated(s.substr(0, s.size() - 3));
    EXPECT_THROW(read_records(truncated), DataError);
}
