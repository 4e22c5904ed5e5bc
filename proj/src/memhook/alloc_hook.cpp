// malloc interposer: counts live heap bytes so the benchmark can attribute
// peak transient allocation to an optimizer step. Linked into executables
// only; glibc's __libc_* entry points do the real work.

#include "infodesign/memhook.hpp"

#include <atomic>
#include <cerrno>
#include <cstddef>
#include <cstring>
#include <malloc.h>

extern "C" {
void* __libc_malloc(size_t);
void __libc_free(void*);
void* __libc_calloc(size_t, size_t);
void* __libc_realloc(void*, size_t);
void* __libc_memalign(size_t, size_t);
}

namespace {

std::atomic<std::int64_t> g_current{0};
std::atomic<std::int64_t> g_peak{0};

void on_alloc(void* p) {
    if (!p) return;
    std::int64_t cur =
        g_current.fetch_add(static_cast<std::int64_t>(malloc_usable_size(p)),
                            std::memory_order_relaxed) +
        static_cast<std::int64_t>(malloc_usable_size(p));
    std::int64_t peak = g_peak.load(std::memory_order_relaxed);
    while (cur > peak && !g_peak.compare_exchange_weak(peak, cur, std::memory_order_relaxed)) {
    }
}

void on_free(void* p) {
    if (!p) return;
    g_current.fetch_sub(static_cast<std::int64_t>(malloc_usable_size(p)),
                        std::memory_order_relaxed);
}

} // namespace

extern "C" {

void* malloc(size_t n) {
    void* p = __libc_malloc(n);
    on_alloc(p);
    return p;
}

void free(void* p) {
    on_free(p);
    __libc_free(p);
}

void* calloc(size_t n, size_t sz) {
    void* p = __libc_calloc(n, sz);
    on_alloc(p);
    return p;
}

void* realloc(void* old, size_t n) {
    on_free(old);
    void* p = __libc_realloc(old, n);
    on_alloc(p);
    return p;
}

void* memalign(size_t align, size_t n) {
    void* p = __libc_memalign(align, n);
    on_alloc(p);
    return p;
}

void* aligned_alloc(size_t align, size_t n) {
    void* p = __libc_memalign(align, n);
    on_alloc(p);
    return p;
}

int posix_memalign(void** out, size_t align, size_t n) {
    if (align % sizeof(void*) != 0 || (align & (align - 1)) != 0) return EINVAL;
    void* p = __libc_memalign(align, n);
    if (!p) return ENOMEM;
    on_alloc(p);
    *out = p;
    return 0;
}

void* valloc(size_t n) {
    void* p = __libc_memalign(4096, n);
    on_alloc(p);
    return p;
}

} // extern "C"

namespace infodesign::memhook {

bool available() { return true; }
std::int64_t current_bytes() { return g_current.load(std::memory_order_relaxed); }
std::int64_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
void reset_peak() { g_peak.store(g_current.load(std::memory_order_relaxed)); }

} // namespace infodesign::memhook
