#ifndef INFODESIGN_MEMHOOK_HPP
#define INFODESIGN_MEMHOOK_HPP

#include <cstdint>

// Heap instrumentation used by the scaling benchmark. The core library ships
// weak no-op stubs; executables that link the alloc_hook object library get a
// malloc interposer that tracks current and peak heap bytes. The pybind
// module never links the interposer, so memory columns are simply absent
// there.
namespace infodesign::memhook {

bool available();
std::int64_t current_bytes();
std::int64_t peak_bytes();
void reset_peak(); // peak := current

} // namespace infodesign::memhook

#endif
