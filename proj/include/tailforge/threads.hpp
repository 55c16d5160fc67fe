#pragma once

namespace tailforge {

// Worker-thread cap from TAILFORGE_THREADS (falls back to the OpenMP default).
// All parallel loops write disjoint outputs, so results do not depend on it.
int thread_cap();

// Applies the cap to the OpenMP runtime. Call once at process start.
void apply_thread_cap();

}  // namespace tailforge
