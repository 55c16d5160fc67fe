#include "tailforge/threads.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tailforge {

int thread_cap() {
#ifdef _OPENMP
    int cap = omp_get_max_threads();
#else
    int cap = 1;
#endif
    if (const char* env = std::getenv("TAILFORGE_THREADS")) {
        try {
            int v = std::stoi(env);
            if (v >= 1) cap = v;
        } catch (...) {
            // ignore unparsable values, keep the runtime default
        }
    }
    return cap;
}

void apply_thread_cap() {
#ifdef _OPENMP
    omp_set_num_threads(thread_cap());
#endif
}

}  // namespace tailforge
