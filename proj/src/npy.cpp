#include "air/npy.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <regex>

#include "air/error.hpp"
#include "air/io.hpp"

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

namespace air::npy {
namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreambleLen = kMagicLen + 2 + 2;

std::string header_value(const std::string& header, const std::string& key) {
    const std::regex re("'" + key + "'\\s*:\\s*('[^']*'|True|False|\\([^)]*\\))");
    std::smatch m;
    if (!std::regex_search(header, m, re)) fail(ErrorCode::Format, "npy header lacks '" + key + "'");
    return m[1].str();
}

std::vector<std::size_t> parse_shape(const std::string& tuple) {
    std::vector<std::size_t> dims;
    const std::regex num("\\d+");
    for (auto it = std::sregex_iterator(tuple.begin(), tuple.end(), num); it != std::sregex_iterator(); ++it) {
        dims.push_back(static_cast<std::size_t>(std::stoull(it->str())));
    }
    return dims;
}

}  // namespace

Matrix parse(const std::string& bytes) {
    if (bytes.size() < kPreambleLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
        fail(ErrorCode::Format, "not an NPY file (bad magic)");
    }
    const auto major = static_cast<unsigned char>(bytes[6]);
    const auto minor = static_cast<unsigned char>(bytes[7]);
    if (major != 1 || minor != 0) fail(ErrorCode::Format, "unsupported NPY version");
    const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                   (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    if (bytes.size() < kPreambleLen + header_len) fail(ErrorCode::Format, "truncated NPY header");
    const std::string header = bytes.substr(kPreambleLen, header_len);

    if (header_value(header, "descr") != "'<f4'") fail(ErrorCode::Format, "NPY descr must be '<f4'");
    if (header_value(header, "fortran_order") != "False") fail(ErrorCode::Format, "NPY must be C order");
    const auto dims = parse_shape(header_value(header, "shape"));

    std::size_t rows = 0;
    std::size_t cols = 0;
    if (dims.size() == 2) {
        rows = dims[0];
        cols = dims[1];
    } else if (dims.size() == 1) {
        rows = 1;
        cols = dims[0];
    } else {
        fail(ErrorCode::Format, "NPY rank must be 1 or 2");
    }

    const std::size_t offset = kPreambleLen + header_len;
    const std::size_t count = rows * cols;
    if (bytes.size() - offset != count * sizeof(float)) fail(ErrorCode::Format, "NPY payload size mismatch");
    std::vector<float> data(count);
    if (count > 0) std::memcpy(data.data(), bytes.data() + offset, count * sizeof(float));
    return Matrix(rows, cols, std::move(data));
}

Matrix read(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string serialize(const Matrix& m) {
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(m.rows()) +
                         ", " + std::to_string(m.cols()) + "), }";
    // Pad so magic + lengths + header + '\n' is a multiple of 64.
    const std::size_t unpadded = kPreambleLen + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    std::string out(kMagic, kMagicLen);
    out.push_back('\x01');
    out.push_back('\x00');
    out.push_back(static_cast<char>(header.size() & 0xff));
    out.push_back(static_cast<char>((header.size() >> 8) & 0xff));
    out += header;
    const auto payload = m.data();
    out.append(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(float));
    return out;
}

void write(const std::filesystem::path& path, const Matrix& m) { write_file_atomic(path, serialize(m)); }

}  // namespace air::npy
