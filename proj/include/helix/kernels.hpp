#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the manifold math, the scorer and the
// synthetic backend. Every op has a scalar reference implementation and,
// on x86-64 with AVX2+FMA, a vector variant selected once at startup.
// The two variants are equivalence-tested against each other; the scalar
// path is the semantic reference.

namespace helix::kern {

enum class isa {
    scalar,
    avx2,
};

// Active instruction set. Picked at first use from CPUID, overridable with
// HELIX_KERNELS=scalar|avx2 (falls back to scalar when avx2 is unavailable).
isa active_isa();
const char * isa_name(isa i);

// Test hook: force a specific implementation for the current process.
void force_isa(isa i);

// max over x[0..n). n >= 1.
double reduce_max(const double * x, size_t n);

// sum x[i] * y[i]
double dot(const double * x, const double * y, size_t n);

// y[i] += a * x[i]
void axpy(double a, const double * x, double * y, size_t n);

// sum x[i]^2
double sum_sq(const double * x, size_t n);

// One-pass softmax moments of shifted logits:
//   sum_exp  = sum exp(x[i] - shift)
//   weighted = sum (x[i] - shift) * exp(x[i] - shift)
// With shift = max(x) this yields entropy as log(sum_exp) - weighted/sum_exp.
struct softmax_moments_t {
    double sum_exp;
    double weighted;
};
softmax_moments_t softmax_moments(const double * x, size_t n, double shift);

// out[i] = exp((x[i] - shift) * inv_t); returns the sum of out.
// Used to materialize unnormalized sampling probabilities.
double exp_scaled(const double * x, double * out, size_t n, double shift, double inv_t);

// Per-ISA entry points, exposed for equivalence tests.
namespace scalar {
double reduce_max(const double * x, size_t n);
double dot(const double * x, const double * y, size_t n);
void   axpy(double a, const double * x, double * y, size_t n);
double sum_sq(const double * x, size_t n);
softmax_moments_t softmax_moments(const double * x, size_t n, double shift);
double exp_scaled(const double * x, double * out, size_t n, double shift, double inv_t);
} // namespace scalar

#if defined(HELIX_HAVE_AVX2)
namespace avx2 {
double reduce_max(const double * x, size_t n);
double dot(const double * x, const double * y, size_t n);
void   axpy(double a, const double * x, double * y, size_t n);
double sum_sq(const double * x, size_t n);
softmax_moments_t softmax_moments(const double * x, size_t n, double shift);
double exp_scaled(const double * x, double * out, size_t n, double shift, double inv_t);
} // namespace avx2
#endif

} // namespace helix::kern
