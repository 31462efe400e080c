#include "lmkit/kernels.hpp"

#include <atomic>
#include <cstring>

#include "lmkit/errors.hpp"

namespace lmkit::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::int64_t kParallelCutoff = 16 * 1024;

// Shared element kernels. Each output element accumulates over k in ascending
// order, so the serial and parallel paths (and any chunking of the row range)
// produce bitwise-identical results.

inline void rows_nn(const float* a, const float* b, float* c, std::int64_t i0, std::int64_t i1,
                    std::int64_t k, std::int64_t n, bool accumulate) {
    for (std::int64_t i = i0; i < i1; ++i) {
        float* crow = c + i * n;
        if (!accumulate) std::memset(crow, 0, sizeof(float) * static_cast<std::size_t>(n));
        const float* arow = a + i * k;
        for (std::int64_t t = 0; t < k; ++t) {
            const float av = arow[t];
            const float* brow = b + t * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline void rows_nt(const float* a, const float* b, float* c, std::int64_t i0, std::int64_t i1,
                    std::int64_t k, std::int64_t n, bool accumulate) {
    for (std::int64_t i = i0; i < i1; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            const float* brow = b + j * k;
            float acc = 0.0f;
            for (std::int64_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

inline void rows_tn(const float* a, const float* b, float* c, std::int64_t i0, std::int64_t i1,
                    std::int64_t k, std::int64_t n, std::int64_t m, bool accumulate) {
    // A is [k, m]: column i of the logical [m, k] operand is the strided walk a[t*m + i].
    for (std::int64_t i = i0; i < i1; ++i) {
        float* crow = c + i * n;
        if (!accumulate) std::memset(crow, 0, sizeof(float) * static_cast<std::size_t>(n));
        for (std::int64_t t = 0; t < k; ++t) {
            const float av = a[t * m + i];
            const float* brow = b + t * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline void gemm_range(const float* a, Trans ta, const float* b, Trans tb, float* c,
                       std::int64_t i0, std::int64_t i1, std::int64_t m, std::int64_t k,
                       std::int64_t n, bool accumulate) {
    if (ta == Trans::N && tb == Trans::N) {
        rows_nn(a, b, c, i0, i1, k, n, accumulate);
    } else if (ta == Trans::N && tb == Trans::T) {
        rows_nt(a, b, c, i0, i1, k, n, accumulate);
    } else if (ta == Trans::T && tb == Trans::N) {
        rows_tn(a, b, c, i0, i1, k, n, m, accumulate);
    } else {
        throw ContractError("gemm: T/T operand combination is not implemented");
    }
}

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }

namespace serial {
void gemm(const float* a, Trans ta, const float* b, Trans tb, float* c, std::int64_t m,
          std::int64_t k, std::int64_t n, bool accumulate) {
    gemm_range(a, ta, b, tb, c, 0, m, m, k, n, accumulate);
}
}  // namespace serial

namespace parallel {
void gemm(const float* a, Trans ta, const float* b, Trans tb, float* c, std::int64_t m,
          std::int64_t k, std::int64_t n, bool accumulate) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        gemm_range(a, ta, b, tb, c, i, i + 1, m, k, n, accumulate);
    }
#else
    gemm_range(a, ta, b, tb, c, 0, m, m, k, n, accumulate);
#endif
}
}  // namespace parallel

void gemm(const float* a, Trans ta, const float* b, Trans tb, float* c, std::int64_t m,
          std::int64_t k, std::int64_t n, bool accumulate) {
    if (parallel_enabled() && m > 1 && m * k * n >= kParallelCutoff) {
        parallel::gemm(a, ta, b, tb, c, m, k, n, accumulate);
    } else {
        serial::gemm(a, ta, b, tb, c, m, k, n, accumulate);
    }
}

}  // namespace lmkit::kernels
