#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gluekit/model.hpp"

namespace gluekit {

enum class ArrayFormat { Csv, Npy };

/// Headerless comma-separated rows; throws DataError on ragged rows or bad numbers.
Matrix read_csv_matrix(const std::string& path);
/// Writes with 17 significant digits so doubles round-trip exactly.
void write_csv_matrix(const std::string& path, const Matrix& m);

/// NPY v1.0, little-endian float32/float64, C order, 2-D.
Matrix read_npy(const std::string& path);
void write_npy(const std::string& path, const Matrix& m);

/// One integer per line; blank lines ignored.
std::vector<std::int64_t> read_labels(const std::string& path);

ArrayFormat format_from_path(const std::string& path);

ManifoldEnsemble load_activations(const std::string& path, ArrayFormat format, const std::string& labels_path);

}  // namespace gluekit
