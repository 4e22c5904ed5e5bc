#include "infodesign/memhook.hpp"

namespace infodesign::memhook {

__attribute__((weak)) bool available() { return false; }
__attribute__((weak)) std::int64_t current_bytes() { return 0; }
__attribute__((weak)) std::int64_t peak_bytes() { return 0; }
__attribute__((weak)) void reset_peak() {}

} // namespace infodesign::memhook
