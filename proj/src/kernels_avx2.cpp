// AVX2+FMA variants of the inner-loop kernels. Compiled with -mavx2 -mfma;
// only reached when the dispatcher has verified CPU support at runtime.

#include "helix/kernels.hpp"

#if defined(HELIX_HAVE_AVX2)

#include <cmath>
#include <immintrin.h>

namespace helix::kern::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_max_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

// exp on 4 doubles: Cody-Waite range reduction, degree-13 Taylor core,
// 2^k rebuilt through the exponent bits. Accurate to a few ulp, inputs
// clamped to [-708, 708] (callers feed shifted logits, never near the edge).
inline __m256d exp4(__m256d x) {
    const __m256d clamp_hi = _mm256_set1_pd(708.0);
    const __m256d clamp_lo = _mm256_set1_pd(-708.0);
    x = _mm256_min_pd(_mm256_max_pd(x, clamp_lo), clamp_hi);

    const __m256d log2e  = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

    const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(k, ln2_hi, x);
    r = _mm256_fnmadd_pd(k, ln2_lo, r);

    __m256d p = _mm256_set1_pd(1.6059043836821613e-10);                 // 1/13!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.08767569878681e-9));     // 1/12!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.505210838544172e-8));    // 1/11!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985893e-7));   // 1/10!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.755731922398589e-6));    // 1/9!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.48015873015873e-5));     // 1/8!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.984126984126984e-4));    // 1/7!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.3888888888888889e-3));   // 1/6!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(8.333333333333333e-3));    // 1/5!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(4.1666666666666664e-2));   // 1/4!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.6666666666666666e-1));   // 1/3!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

    const __m128i k32 = _mm256_cvtpd_epi32(k);
    const __m256i k64 = _mm256_cvtepi32_epi64(k32);
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(k64, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

} // namespace

double reduce_max(const double * x, size_t n) {
    size_t i = 0;
    if (n >= 4) {
        __m256d m = _mm256_loadu_pd(x);
        for (i = 4; i + 3 < n; i += 4) {
            m = _mm256_max_pd(m, _mm256_loadu_pd(x + i));
        }
        double best = hmax(m);
        for (; i < n; ++i) {
            if (x[i] > best) best = x[i];
        }
        return best;
    }
    double best = x[0];
    for (i = 1; i < n; ++i) {
        if (x[i] > best) best = x[i];
    }
    return best;
}

double dot(const double * x, const double * y, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 3 < n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    }
    double sum = hsum(acc);
    for (; i < n; ++i) {
        sum += x[i] * y[i];
    }
    return sum;
}

void axpy(double a, const double * x, double * y, size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    size_t i = 0;
    for (; i + 3 < n; i += 4) {
        const __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) {
        y[i] += a * x[i];
    }
}

double sum_sq(const double * x, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 3 < n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double sum = hsum(acc);
    for (; i < n; ++i) {
        sum += x[i] * x[i];
    }
    return sum;
}

softmax_moments_t softmax_moments(const double * x, size_t n, double shift) {
    const __m256d vshift = _mm256_set1_pd(shift);
    __m256d vsum = _mm256_setzero_pd();
    __m256d vweight = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 3 < n; i += 4) {
        const __m256d s = _mm256_sub_pd(_mm256_loadu_pd(x + i), vshift);
        const __m256d e = exp4(s);
        vsum = _mm256_add_pd(vsum, e);
        vweight = _mm256_fmadd_pd(s, e, vweight);
    }
    double sum_exp = hsum(vsum);
    double weighted = hsum(vweight);
    for (; i < n; ++i) {
        const double s = x[i] - shift;
        const double e = std::exp(s);
        sum_exp += e;
        weighted += s * e;
    }
    return {sum_exp, weighted};
}

double exp_scaled(const double * x, double * out, size_t n, double shift, double inv_t) {
    const __m256d vshift = _mm256_set1_pd(shift);
    const __m256d vinv = _mm256_set1_pd(inv_t);
    __m256d vsum = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 3 < n; i += 4) {
        const __m256d s = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), vshift), vinv);
        const __m256d e = exp4(s);
        _mm256_storeu_pd(out + i, e);
        vsum = _mm256_add_pd(vsum, e);
    }
    double sum = hsum(vsum);
    for (; i < n; ++i) {
        const double e = std::exp((x[i] - shift) * inv_t);
        out[i] = e;
        sum += e;
    }
    return sum;
}

} // namespace helix::kern::avx2

#endif // HELIX_HAVE_AVX2
