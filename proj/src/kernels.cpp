#include "grouplift/kernels.hpp"

#include <cstdlib>
#include <string>

#include "grouplift/errors.hpp"

namespace grouplift::kern {

// Defined in kernels_avx2.cpp / kernels_neon.cpp; null when the backend
// was not compiled for this target.
const Backend* avx2_backend_or_null();
const Backend* neon_backend_or_null();

namespace {

bool cpu_has_avx2_fma() {
#if (defined(__x86_64__) || defined(__i386__)) && \
    (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::vector<const Backend*> detect() {
    std::vector<const Backend*> out;
    out.push_back(&scalar_backend());
    if (const Backend* b = avx2_backend_or_null(); b && cpu_has_avx2_fma()) {
        out.push_back(b);
    }
    if (const Backend* b = neon_backend_or_null()) {
        out.push_back(b);
    }
    return out;
}

const Backend* pick(std::string_view name) {
    if (name == "auto") {
        // Last entry wins: SIMD backends are appended after scalar.
        return available_backends().back();
    }
    for (const Backend* b : available_backends()) {
        if (name == b->name) return b;
    }
    throw argument_error("unknown or unavailable kernel backend '" +
                         std::string(name) + "'");
}

const Backend*& active_slot() {
    static const Backend* slot = [] {
        const char* env = std::getenv("GROUPLIFT_KERNELS");
        return pick(env && *env ? env : "auto");
    }();
    return slot;
}

}  // namespace

const std::vector<const Backend*>& available_backends() {
    static const std::vector<const Backend*> list = detect();
    return list;
}

const Backend& active_backend() { return *active_slot(); }

void select_backend(std::string_view name) { active_slot() = pick(name); }

}  // namespace grouplift::kern
