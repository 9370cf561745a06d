#pragma once

namespace phonesense {

/// Selects between the OpenMP kernels and their serial reference loops.
/// Both paths produce bit-identical results; the serial path exists for
/// testing and benchmarking.
enum class Execution { serial, parallel };

}  // namespace phonesense
