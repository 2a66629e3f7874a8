#include "helix/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace helix::kern {

namespace {

bool cpu_has_avx2() {
#if defined(HELIX_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

isa pick_isa() {
    if (const char * env = std::getenv("HELIX_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) {
            return isa::scalar;
        }
        if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) {
            return isa::avx2;
        }
    }
    return cpu_has_avx2() ? isa::avx2 : isa::scalar;
}

std::atomic<isa> g_isa{pick_isa()};

} // namespace

isa active_isa() { return g_isa.load(std::memory_order_relaxed); }

void force_isa(isa i) {
    if (i == isa::avx2 && !cpu_has_avx2()) {
        i = isa::scalar;
    }
    g_isa.store(i, std::memory_order_relaxed);
}

const char * isa_name(isa i) {
    switch (i) {
        case isa::scalar: return "scalar";
        case isa::avx2:   return "avx2";
    }
    return "?";
}

#if defined(HELIX_HAVE_AVX2)
#define HELIX_DISPATCH(call) \
    (active_isa() == isa::avx2 ? avx2::call : scalar::call)
#else
#define HELIX_DISPATCH(call) (scalar::call)
#endif

double reduce_max(const double * x, size_t n) {
    return HELIX_DISPATCH(reduce_max(x, n));
}

double dot(const double * x, const double * y, size_t n) {
    return HELIX_DISPATCH(dot(x, y, n));
}

void axpy(double a, const double * x, double * y, size_t n) {
    HELIX_DISPATCH(axpy(a, x, y, n));
}

double sum_sq(const double * x, size_t n) {
    return HELIX_DISPATCH(sum_sq(x, n));
}

softmax_moments_t softmax_moments(const double * x, size_t n, double shift) {
    return HELIX_DISPATCH(softmax_moments(x, n, shift));
}

double exp_scaled(const double * x, double * out, size_t n, double shift, double inv_t) {
    return HELIX_DISPATCH(exp_scaled(x, out, n, shift, inv_t));
}

#undef HELIX_DISPATCH

} // namespace helix::kern
