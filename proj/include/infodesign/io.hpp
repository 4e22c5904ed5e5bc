#ifndef INFODESIGN_IO_HPP
#define INFODESIGN_IO_HPP

#include "infodesign/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace infodesign::io {

// Grayscale PFM ("Pf", little-endian float32, scale -1.0, rows bottom-up).
Image read_pfm(const std::string& path);
void write_pfm(const std::string& path, const Image& img);

// IDX unsigned-byte 3-D tensor (big-endian magic 0x00000803, dims
// [count, rows, cols]). Returns raw byte values as doubles.
std::vector<Image> read_idx(const std::string& path, std::optional<int> count_limit = std::nullopt);
void write_idx(const std::string& path, const std::vector<Image>& images);

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64_file(const std::string& path);

// Shortest decimal form that round-trips a double; keeps CSV output stable.
std::string fmt_double(double v);

// Little-endian binary container primitives used by the model files.
class BinWriter {
public:
    explicit BinWriter(const std::string& path);
    ~BinWriter();
    BinWriter(const BinWriter&) = delete;
    BinWriter& operator=(const BinWriter&) = delete;

    void bytes(const void* data, std::size_t n);
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void f64(double v);
    void f64_block(const double* data, std::size_t n);

private:
    void* file_;
};

class BinReader {
public:
    explicit BinReader(const std::string& path);
    ~BinReader();
    BinReader(const BinReader&) = delete;
    BinReader& operator=(const BinReader&) = delete;

    void bytes(void* data, std::size_t n);
    std::uint8_t u8();
    std::uint32_t u32();
    double f64();
    void f64_block(double* data, std::size_t n);

private:
    void* file_;
    std::string path_;
};

} // namespace infodesign::io

#endif
