#pragma once

namespace wq {

// Kernels that have an OpenMP path also keep a plain serial path. The serial
// path is the reference the tests compare against; results must be identical.
enum class Execution { Serial, Parallel };

// Caps the OpenMP worker count; 0 leaves the runtime default.
void set_worker_count(int n);
int worker_count();

}  // namespace wq
