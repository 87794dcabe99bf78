#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "air/error.hpp"
#include "air/io.hpp"
#include "air/npy.hpp"
#include "oracles.hpp"

namespace {

air::ErrorCode code_of(const std::string& bytes) {
    try {
        air::npy::parse(bytes);
    } catch (const air::Error& e) {
        return e.code();
    }
    return air::ErrorCode::Io;
}

std::string header(const std::string& dict) {
    std::string h = dict;
    const std::size_t total = 10 + h.size() + 1;
    h.append((64 - total % 64) % 64, ' ');
    h += '\n';
    std::string out = "\x93NUMPY";
    out += '\x01';
    out += '\x00';
    out += static_cast<char>(h.size() & 0xff);
    out += static_cast<char>(h.size() >> 8);
    return out + h;
}

}  // namespace

TEST(Npy, RoundTripProperty) {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 50; ++t) {
        const auto m = oracle::random_matrix(1 + rng() % 20, 1 + rng() % 20, rng, 1e3);
        const std::string bytes = air::npy::serialize(m);
        EXPECT_EQ(bytes.size() % 64, (m.size() * 4) % 64);
        EXPECT_EQ(air::npy::parse(bytes), m);
    }
}

TEST(Npy, ReadsNumpyStyleHeaders) {
    std::string bytes = header("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 1), }");
    const float v[2] = {1.5f, -2.0f};
    bytes.append(reinterpret_cast<const char*>(v), sizeof v);
    const auto m = air::npy::parse(bytes);
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m(1, 0), -2.0f);

    std::string vec = header("{'descr': '<f4', 'fortran_order': False, 'shape': (2,), }");
    vec.append(reinterpret_cast<const char*>(v), sizeof v);
    const auto r = air::npy::parse(vec);
    EXPECT_EQ(r.rows(), 1u);
    EXPECT_EQ(r.cols(), 2u);
}

TEST(Npy, Rejections) {
    EXPECT_EQ(code_of("garbage"), air::ErrorCode::Format);
    EXPECT_EQ(code_of(header("{'descr': '<f8', 'fortran_order': False, 'shape': (1, 1), }") + std::string(8, '\0')),
              air::ErrorCode::Format);
    EXPECT_EQ(code_of(header("{'descr': '<f4', 'fortran_order': True, 'shape': (1, 1), }") + std::string(4, '\0')),
              air::ErrorCode::Format);
    EXPECT_EQ(code_of(header("{'descr': '<f4', 'fortran_order': False, 'shape': (1, 1, 1), }") + std::string(4, '\0')),
              air::ErrorCode::Format);
    EXPECT_EQ(code_of(header("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), }") + std::string(4, '\0')),
              air::ErrorCode::Format);
}

TEST(Npy, MissingFileIsIo) {
    try {
        air::npy::read("/nonexistent/x.npy");
        FAIL();
    } catch (const air::Error& e) {
        EXPECT_EQ(e.code(), air::ErrorCode::Io);
    }
}

TEST(Io, AtomicWriteLeavesNoTemp) {
    const auto dir = std::filesystem::temp_directory_path() / "air_io_test";
    std::filesystem::create_directories(dir);
    air::write_file_atomic(dir / "a.txt", "hello");
    EXPECT_EQ(air::read_file(dir / "a.txt"), "hello");
    EXPECT_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
    std::filesystem::remove_all(dir);
}

TEST(Io, FormatFloatRoundTrips) {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5})
        EXPECT_EQ(std::stod(air::format_float(x)), x);
}
