#pragma once

// Every differentiable tensor operator with input shapes and the tolerance it
// meets against central differences.

#include <functional>
#include <string>
#include <vector>

#include "lusk/tensor.hpp"

namespace lusk::oracle {

struct OpCase {
    const char* name;
    std::vector<Shape> shapes;
    std::function<Tensor<double>(const std::vector<Tensor<double>>&)> op;
    double tol;
    // Inputs are kept at least this far from zero (relu and clamp kinks).
    double min_abs = 0.0;
};

inline std::vector<OpCase> differentiable_ops()
{
    return {
        {"add", {{2, 3}, {2, 3}}, [](const auto& in) { return add(in[0], in[1]); }, 1e-7},
        {"sub_broadcast", {{2, 3, 4, 4}, {1, 1, 4, 4}}, [](const auto& in) { return sub(in[0], in[1]); }, 1e-7},
        {"mul", {{3, 4}, {3, 4}}, [](const auto& in) { return mul(in[0], in[1]); }, 1e-7},
        {"mul_broadcast", {{2, 3, 4, 4}, {2, 1, 4, 4}}, [](const auto& in) { return mul(in[0], in[1]); }, 1e-7},
        {"affine", {{5}}, [](const auto& in) { return affine(in[0], -2.5, 0.3); }, 1e-7},
        {"relu", {{3, 5}}, [](const auto& in) { return relu(in[0]); }, 1e-7, 0.05},
        {"sigmoid", {{3, 5}}, [](const auto& in) { return sigmoid(in[0]); }, 1e-4},
        {"exp", {{3, 5}}, [](const auto& in) { return exp(in[0]); }, 1e-4},
        {"clamp", {{3, 5}}, [](const auto& in) { return clamp(in[0], -0.5, 0.5); }, 1e-7, 0.05},
        {"sum_axes", {{2, 3, 4, 5}}, [](const auto& in) { return sum(in[0], {2, 3}); }, 1e-7},
        {"mean_axes", {{2, 3, 4, 5}}, [](const auto& in) { return mean(in[0], {1}); }, 1e-7},
        {"max_axes", {{2, 3, 4, 5}}, [](const auto& in) { return max(in[0], {2, 3}); }, 1e-7},
        {"matmul", {{3, 4}, {4, 5}}, [](const auto& in) { return matmul(in[0], in[1]); }, 1e-6},
        {"conv_s1", {{2, 3, 6, 6}, {4, 3, 3, 3}, {4}},
         [](const auto& in) { return conv2d(in[0], in[1], in[2], 1, 1); }, 1e-4},
        {"conv_s2", {{2, 3, 7, 7}, {4, 3, 3, 3}, {4}},
         [](const auto& in) { return conv2d(in[0], in[1], in[2], 2, 1); }, 1e-4},
        {"upsample2x", {{2, 3, 3, 4}}, [](const auto& in) { return upsample2x(in[0]); }, 1e-7},
        {"instance_norm", {{2, 3, 4, 4}}, [](const auto& in) { return instance_norm(in[0]); }, 1e-4},
        {"spatial_softmax", {{2, 3, 4, 4}}, [](const auto& in) { return spatial_softmax(in[0]); }, 1e-4},
        {"sum_all", {{2, 3, 4}}, [](const auto& in) { return sum(in[0]); }, 1e-7},
        {"mean_all", {{2, 3, 4}}, [](const auto& in) { return mean(in[0]); }, 1e-7},
        {"mse", {{2, 3, 4}, {2, 3, 4}}, [](const auto& in) { return mse(in[0], in[1]); }, 1e-6},
        {"concat", {{2, 1, 3, 3}, {2, 2, 3, 3}},
         [](const auto& in) { return concat_channels<double>({in[0], in[1]}); }, 1e-7}
    };
}

} // namespace lusk::oracle
