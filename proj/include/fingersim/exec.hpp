#pragma once

namespace fingersim {

// Execution policy for the data-parallel kernels (Gram matrix assembly, batch
// prediction, data-generation cells, comparison trials, optimizer restarts).
//
// Every parallel kernel has a serial twin that walks the same iteration space
// in canonical order.  Parallel variants only ever write to disjoint
// per-iteration slots and never reduce across iterations in thread order, so
// Serial and Parallel are required to produce bit-identical results; the test
// suite asserts this.
enum class ExecPolicy {
    Serial,
    Parallel,
};

// Number of worker threads the Parallel policy would use right now.
int parallel_thread_count() noexcept;

// Caps the number of OpenMP threads (CLI --jobs).  jobs < 1 is ignored.
void set_thread_cap(int jobs) noexcept;

}  // namespace fingersim
