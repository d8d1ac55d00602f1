#include "hybridaug/kernels/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace hybridaug::kernels {

#if defined(HYBRIDAUG_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(HYBRIDAUG_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels() {
    static const KernelTable& chosen = [] () -> const KernelTable& {
        const char* env = std::getenv("HYBRIDAUG_SIMD");
        if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
        if (const KernelTable* simd = avx2_kernels()) return *simd;
        return scalar_kernels();
    }();
    return chosen;
}

}  // namespace hybridaug::kernels
