#pragma once

// Experiment-wide scalar type. Gradient-oracle tests always instantiate the
// numeric templates with double regardless of this choice; experiments run in
// float unless the build sets BDLAB_REAL_DOUBLE (CMake option BDLAB_DOUBLE_REAL).
namespace bdlab {

#ifdef BDLAB_REAL_DOUBLE
using real_t = double;
#else
using real_t = float;
#endif

}  // namespace bdlab
