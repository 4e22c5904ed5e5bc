#include "infodesign/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace infodesign::io {

namespace {

struct File {
    std::FILE* f = nullptr;
    ~File() {
        if (f) std::fclose(f);
    }
};

std::uint32_t read_be_u32(std::FILE* f, const std::string& path, long offset) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4)
        throw ParseError("unexpected end of " + path + " at byte offset " + std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

} // namespace

Image read_pfm(const std::string& path) {
    File file{std::fopen(path.c_str(), "rb")};
    if (!file.f) throw IoError("cannot open " + path);
    char magic[3] = {0, 0, 0};
    int w = 0, h = 0;
    double scale = 0.0;
    if (std::fscanf(file.f, "%2s %d %d %lf", magic, &w, &h, &scale) != 4)
        throw ParseError(path + ": malformed PFM header");
    if (std::strcmp(magic, "Pf") != 0)
        throw ParseError(path + ": not a grayscale PFM (magic '" + magic + "')");
    if (w <= 0 || h <= 0) throw ParseError(path + ": bad PFM dimensions");
    if (scale >= 0.0) throw ParseError(path + ": big-endian PFM not supported");
    std::fgetc(file.f); // single whitespace after the scale line

    Image img(h, w);
    std::vector<float> row(static_cast<std::size_t>(w));
    for (int r = h - 1; r >= 0; --r) { // PFM stores rows bottom-up
        if (std::fread(row.data(), sizeof(float), row.size(), file.f) != row.size())
            throw ParseError(path + ": truncated PFM pixel data");
        for (int c = 0; c < w; ++c) img(r, c) = static_cast<double>(row[static_cast<std::size_t>(c)]);
    }
    return img;
}

void write_pfm(const std::string& path, const Image& img) {
    File file{std::fopen(path.c_str(), "wb")};
    if (!file.f) throw IoError("cannot create " + path);
    std::fprintf(file.f, "Pf\n%d %d\n-1.0\n", static_cast<int>(img.cols()),
                 static_cast<int>(img.rows()));
    std::vector<float> row(static_cast<std::size_t>(img.cols()));
    for (int r = static_cast<int>(img.rows()) - 1; r >= 0; --r) {
        for (int c = 0; c < img.cols(); ++c) row[static_cast<std::size_t>(c)] = static_cast<float>(img(r, c));
        if (std::fwrite(row.data(), sizeof(float), row.size(), file.f) != row.size())
            throw IoError("short write to " + path);
    }
}

std::vector<Image> read_idx(const std::string& path, std::optional<int> count_limit) {
    File file{std::fopen(path.c_str(), "rb")};
    if (!file.f) throw IoError("cannot open " + path);
    std::uint32_t magic = read_be_u32(file.f, path, 0);
    if (magic != 0x00000803u)
        throw ParseError(path + ": bad IDX magic at byte offset 0 (expected 0x00000803)");
    std::uint32_t count = read_be_u32(file.f, path, 4);
    std::uint32_t rows = read_be_u32(file.f, path, 8);
    std::uint32_t cols = read_be_u32(file.f, path, 12);
    if (rows == 0 || cols == 0)
        throw ParseError(path + ": zero-sized IDX dimensions at byte offset 8");

    std::uint32_t take = count;
    if (count_limit && *count_limit >= 0)
        take = std::min<std::uint32_t>(count, static_cast<std::uint32_t>(*count_limit));
    std::vector<Image> out;
    out.reserve(take);
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < take; ++i) {
        if (std::fread(buf.data(), 1, buf.size(), file.f) != buf.size())
            throw ParseError(path + ": truncated IDX image " + std::to_string(i) +
                             " at byte offset " + std::to_string(16 + std::size_t(i) * buf.size()));
        Image img(static_cast<int>(rows), static_cast<int>(cols));
        for (std::uint32_t r = 0; r < rows; ++r)
            for (std::uint32_t c = 0; c < cols; ++c)
                img(static_cast<int>(r), static_cast<int>(c)) =
                    static_cast<double>(buf[static_cast<std::size_t>(r) * cols + c]);
        out.push_back(std::move(img));
    }
    return out;
}

void write_idx(const std::string& path, const std::vector<Image>& images) {
    if (images.empty()) throw SizingError("write_idx: no images");
    File file{std::fopen(path.c_str(), "wb")};
    if (!file.f) throw IoError("cannot create " + path);
    auto be = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
        std::fwrite(b, 1, 4, file.f);
    };
    be(0x00000803u);
    be(static_cast<std::uint32_t>(images.size()));
    be(static_cast<std::uint32_t>(images[0].rows()));
    be(static_cast<std::uint32_t>(images[0].cols()));
    for (const Image& img : images)
        for (int r = 0; r < img.rows(); ++r)
            for (int c = 0; c < img.cols(); ++c) {
                double v = std::min(255.0, std::max(0.0, img(r, c)));
                unsigned char b = static_cast<unsigned char>(v);
                std::fwrite(&b, 1, 1, file.f);
            }
}

std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    File file{std::fopen(path.c_str(), "rb")};
    if (!file.f) throw IoError("cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    unsigned char buf[1 << 14];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, file.f)) > 0)
        for (std::size_t i = 0; i < n; ++i) {
            h ^= buf[i];
            h *= 0x100000001b3ULL;
        }
    return h;
}

std::string fmt_double(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

BinWriter::BinWriter(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot create " + path);
    file_ = f;
}
BinWriter::~BinWriter() { std::fclose(static_cast<std::FILE*>(file_)); }
void BinWriter::bytes(const void* data, std::size_t n) {
    if (std::fwrite(data, 1, n, static_cast<std::FILE*>(file_)) != n)
        throw IoError("short write to model container");
}
void BinWriter::u8(std::uint8_t v) { bytes(&v, 1); }
void BinWriter::u32(std::uint32_t v) { bytes(&v, 4); }
void BinWriter::f64(double v) { bytes(&v, 8); }
void BinWriter::f64_block(const double* data, std::size_t n) { bytes(data, 8 * n); }

BinReader::BinReader(const std::string& path) : path_(path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    file_ = f;
}
BinReader::~BinReader() { std::fclose(static_cast<std::FILE*>(file_)); }
void BinReader::bytes(void* data, std::size_t n) {
    if (std::fread(data, 1, n, static_cast<std::FILE*>(file_)) != n)
        throw ParseError(path_ + ": truncated model container");
}
std::uint8_t BinReader::u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
}
std::uint32_t BinReader::u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
}
double BinReader::f64() {
    double v;
    bytes(&v, 8);
    return v;
}
void BinReader::f64_block(double* data, std::size_t n) { bytes(data, 8 * n); }

} // namespace infodesign::io
