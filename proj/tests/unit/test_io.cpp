#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gluekit/error.hpp"
#include "gluekit/io.hpp"
#include "gluekit/model.hpp"

using namespace gluekit;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "gluekit_io_test";
  fs::create_directories(p);
  return p;
}

Matrix fixture(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  RngStream rng(seed);
  return sample_gaussian_matrix(rows, cols, 1.0, rng);
}

}  // namespace

TEST_CASE("csv and npy round trips are exact") {
  const auto dir = scratch_dir();
  Matrix m = fixture(7, 5, 1);
  m(0, 0) = 1e-300;
  m(1, 1) = -0.1;
  write_csv_matrix((dir / "a.csv").string(), m);
  CHECK((read_csv_matrix((dir / "a.csv").string()).array() == m.array()).all());
  write_npy((dir / "a.npy").string(), m);
  CHECK((read_npy((dir / "a.npy").string()).array() == m.array()).all());
}

TEST_CASE("npy layout and header errors") {
  const auto dir = scratch_dir();
  auto write_raw = [&](const std::string& name, const std::string& header, std::size_t payload) {
    std::string h = header;
    while ((10 + h.size() + 1) % 64) h.push_back(' ');
    h.push_back('\n');
    std::ofstream out(dir / name, std::ios::binary);
    out.write("\x93NUMPY\x01\x00", 8);
    const char len[2] = {char(h.size() & 0xff), char(h.size() >> 8)};
    out.write(len, 2);
    out << h;
    std::string zeros(payload, '\0');
    out << zeros;
    return (dir / name).string();
  };
  CHECK_THROWS_AS(read_npy(write_raw("f.npy", "{'descr': '<f8', 'fortran_order': True, 'shape': (2, 2), }", 32)),
                  DataError);
  CHECK_THROWS_AS(read_npy(write_raw("i.npy", "{'descr': '<i4', 'fortran_order': False, 'shape': (2, 2), }", 16)),
                  DataError);
  CHECK_THROWS_AS(read_npy(write_raw("s.npy", "{'descr': '<f8', 'fortran_order': False, 'shape': (4,), }", 32)),
                  DataError);
  CHECK_THROWS_AS(read_npy(write_raw("m.npy", "{'fortran_order': False, 'shape': (2, 2), }", 32)), DataError);
  const auto f32 = read_npy(write_raw("g.npy", "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }", 24));
  CHECK(f32.rows() == 2);
  CHECK(f32.cols() == 3);
  CHECK(f32.norm() == 0.0);
}

TEST_CASE("load_activations groups rows by label") {
  const auto dir = scratch_dir();
  const Matrix x = fixture(100, 512, 2);
  write_npy((dir / "act.npy").string(), x);
  {
    std::ofstream lab(dir / "labels.txt");
    for (int i = 0; i < 100; ++i) lab << (i * 7) % 10 << "\n";
  }
  const auto e = load_activations((dir / "act.npy").string(), ArrayFormat::Npy, (dir / "labels.txt").string());
  CHECK(e.num_manifolds() == 10);
  CHECK(e.ambient_dim() == 512);
  for (std::size_t i = 0; i < 10; ++i) CHECK(e.manifold(i).size() == 10);

  {
    std::ofstream lab(dir / "short.txt");
    lab << "1\n2\n";
  }
  CHECK_THROWS_AS(load_activations((dir / "act.npy").string(), ArrayFormat::Npy, (dir / "short.txt").string()),
                  DataError);
  {
    std::ofstream bad(dir / "nan.csv");
    bad << "1,2\nnan,3\n";
    std::ofstream lab(dir / "two.txt");
    lab << "0\n1\n";
  }
  CHECK_THROWS_AS(load_activations((dir / "nan.csv").string(), ArrayFormat::Csv, (dir / "two.txt").string()),
                  DataError);
  {
    std::ofstream bad(dir / "ragged.csv");
    bad << "1,2\n3\n";
  }
  CHECK_THROWS_AS(read_csv_matrix((dir / "ragged.csv").string()), DataError);
  CHECK(format_from_path("x.npy") == ArrayFormat::Npy);
  CHECK_THROWS_AS(format_from_path("x.bin"), ConfigError);
}
