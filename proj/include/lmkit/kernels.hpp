#pragma once

#include <cstdint>

namespace lmkit::kernels {

enum class Trans { N, T };

// Process-wide switch between the OpenMP kernels and the serial reference
// path. Both produce bitwise-identical results (each output element is
// accumulated by exactly one thread in a fixed k-order); the switch exists so
// tests and the benchmark can compare them directly.
bool parallel_enabled();
void set_parallel(bool enabled);

// C[m,n] (+)= op(A) * op(B) with op in {identity, transpose}.
// A is [m,k] when Trans::N, [k,m] when Trans::T; B is [k,n] / [n,k].
// Row-major, f32 accumulation. Dispatches on parallel_enabled().
void gemm(const float* a, Trans ta, const float* b, Trans tb, float* c, std::int64_t m,
          std::int64_t k, std::int64_t n, bool accumulate);

namespace serial {
void gemm(const float* a, Trans ta, const float* b, Trans tb, float* c, std::int64_t m,
          std::int64_t k, std::int64_t n, bool accumulate);
}

namespace parallel {
void gemm(const float* a, Trans ta, const float* b, Trans tb, float* c, std::int64_t m,
          std::int64_t k, std::int64_t n, bool accumulate);
}

}  // namespace lmkit::kernels
