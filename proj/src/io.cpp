#include "gluekit/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include "gluekit/error.hpp"

namespace gluekit {

namespace {

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, const std::string& where) {
  const std::string t = trim(field);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw DataError(where + ": not a number: '" + t + "'");
  return v;
}

bool little_endian() {
  const std::uint16_t one = 1;
  unsigned char b;
  std::memcpy(&b, &one, 1);
  return b == 1;
}

}  // namespace

Matrix read_csv_matrix(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    const std::string where = path + ":" + std::to_string(lineno);
    while (std::getline(ss, field, ',')) row.push_back(parse_double(field, where));
    if (!rows.empty() && row.size() != rows.front().size()) throw DataError(where + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no rows");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_csv_matrix(const std::string& path, const Matrix& m) {
  auto out = open_out(path);
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, m(i, j));
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

Matrix read_npy(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, "\x93NUMPY", 6) != 0) throw DataError(path + ": not an NPY file");
  if (magic[6] != 1 || magic[7] != 0) throw DataError(path + ": only NPY version 1.0 is supported");
  unsigned char len_bytes[2];
  in.read(reinterpret_cast<char*>(len_bytes), 2);
  const std::size_t header_len = len_bytes[0] | (len_bytes[1] << 8);
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) throw DataError(path + ": truncated header");

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']*)')")))
    throw DataError(path + ": malformed header (descr)");
  const std::string descr = m[1];
  if (!std::regex_search(header, m, std::regex(R"('fortran_order'\s*:\s*(True|False))")))
    throw DataError(path + ": malformed header (fortran_order)");
  if (m[1] == "True") throw DataError(path + ": fortran_order arrays are not supported");
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))")))
    throw DataError(path + ": malformed header (shape)");
  std::vector<std::size_t> shape;
  {
    std::stringstream ss(m[1].str());
    std::string dim;
    while (std::getline(ss, dim, ',')) {
      dim = trim(dim);
      if (dim.empty()) continue;
      shape.push_back(static_cast<std::size_t>(parse_double(dim, path)));
    }
  }
  if (shape.size() != 2) throw DataError(path + ": only 2-D arrays are supported");

  std::size_t width;
  if (descr == "<f8" || (descr == "=f8" && little_endian())) width = 8;
  else if (descr == "<f4" || (descr == "=f4" && little_endian())) width = 4;
  else throw DataError(path + ": unsupported dtype " + descr);
  if (!little_endian()) throw DataError("big-endian hosts are not supported");

  const std::size_t n = shape[0] * shape[1];
  Matrix out(shape[0], shape[1]);
  if (width == 8) {
    if (!in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n * 8)))
      throw DataError(path + ": truncated data");
  } else {
    std::vector<float> buf(n);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4)))
      throw DataError(path + ": truncated data");
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = buf[i];
  }
  return out;
}

void write_npy(const std::string& path, const Matrix& m) {
  if (!little_endian()) throw DataError("big-endian hosts are not supported");
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(m.rows()) + ", " +
                       std::to_string(m.cols()) + "), }";
  // pad so that the data starts on a 64-byte boundary
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');
  auto out = open_out(path, std::ios::binary);
  out.write("\x93NUMPY\x01\x00", 8);
  const unsigned char len[2] = {static_cast<unsigned char>(header.size() & 0xff),
                                static_cast<unsigned char>(header.size() >> 8)};
  out.write(reinterpret_cast<const char*>(len), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
  if (!out) throw DataError("write failed: " + path);
}

std::vector<std::int64_t> read_labels(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::int64_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
      throw DataError(path + ":" + std::to_string(lineno) + ": not an integer label: '" + t + "'");
    labels.push_back(v);
  }
  return labels;
}

ArrayFormat format_from_path(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "npy") return ArrayFormat::Npy;
  if (ext == "csv" || ext == "txt") return ArrayFormat::Csv;
  throw ConfigError("cannot infer array format of " + path);
}

ManifoldEnsemble load_activations(const std::string& path, ArrayFormat format, const std::string& labels_path) {
  const Matrix x = format == ArrayFormat::Npy ? read_npy(path) : read_csv_matrix(path);
  const auto labels = read_labels(labels_path);
  if (labels.size() != static_cast<std::size_t>(x.rows()))
    throw DataError("label count " + std::to_string(labels.size()) + " does not match " + std::to_string(x.rows()) +
                    " activation rows");
  if (!x.allFinite()) throw DataError(path + ": non-finite entries");
  return build_ensemble(x, labels);
}

}  // namespace gluekit
