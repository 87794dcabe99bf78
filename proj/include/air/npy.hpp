#pragma once

#include <filesystem>
#include <string>

#include "air/matrix.hpp"

namespace air::npy {

// NPY v1.0, little-endian float32 ('<f4'), C order, rank 1 or 2.
// A rank-1 array of length n loads as a 1 x n matrix.
Matrix read(const std::filesystem::path& path);
Matrix parse(const std::string& bytes);

std::string serialize(const Matrix& m);

// Written to a sibling temp file, then renamed into place.
void write(const std::filesystem::path& path, const Matrix& m);

}  // namespace air::npy
