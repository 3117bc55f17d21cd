#pragma once

// Small single-threaded GEMM kernels used by matmul and conv2d. All three
// accumulate into C. The loop and blocking order is fixed, so results are
// bit-reproducible for identical inputs.

#include <algorithm>
#include <cstddef>

namespace lusk::detail {

inline constexpr std::size_t kGemmBlock = 256;

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K,
             const T* A, const T* B, T* C)
{
    for (std::size_t j0 = 0; j0 < N; j0 += kGemmBlock) {
        const std::size_t nb = std::min(kGemmBlock, N - j0);
        for (std::size_t i = 0; i < M; ++i) {
            T* c = C + i * N + j0;
            for (std::size_t k = 0; k < K; ++k) {
                const T a = A[i * K + k];
                const T* b = B + k * N + j0;
                for (std::size_t j = 0; j < nb; ++j) c[j] += a * b[j];
            }
        }
    }
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n)
{
    T acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
    }
    T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

// C[M x N] += A[M x K] * B[N x K]^T
template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K,
             const T* A, const T* B, T* C)
{
    for (std::size_t k0 = 0; k0 < K; k0 += kGemmBlock) {
        const std::size_t kb = std::min(kGemmBlock, K - k0);
        for (std::size_t i = 0; i < M; ++i) {
            const T* a = A + i * K + k0;
            T* c = C + i * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += dot(a, B + j * K + k0, kb);
        }
    }
}

// C[M x N] += A[K x M]^T * B[K x N]
template <typename T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K,
             const T* A, const T* B, T* C)
{
    for (std::size_t j0 = 0; j0 < N; j0 += kGemmBlock) {
        const std::size_t nb = std::min(kGemmBlock, N - j0);
        for (std::size_t i = 0; i < M; ++i) {
            T* c = C + i * N + j0;
            for (std::size_t k = 0; k < K; ++k) {
                const T a = A[k * M + i];
                const T* b = B + k * N + j0;
                for (std::size_t j = 0; j < nb; ++j) c[j] += a * b[j];
            }
        }
    }
}

} // namespace lusk::detail
