#include "bvrvi/matrix_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "bvrvi/errors.hpp"

namespace bvrvi {

namespace {

constexpr std::array<char, 6> kMagic = {'B', 'V', 'R', 'V', 'I', '1'};

void put_le(std::ostream& out, std::uint64_t bits, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(std::istream& in, int bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw IoError("matrix file truncated");
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return bits;
}

}  // namespace

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
      m.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw IoError("matrix too large for the u32 header");
  }
  out.write(kMagic.data(), kMagic.size());
  put_le(out, static_cast<std::uint64_t>(m.rows()), 4);
  put_le(out, static_cast<std::uint64_t>(m.cols()), 4);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_le(out, std::bit_cast<std::uint64_t>(m(i, j)), 8);
  }
  if (!out) throw IoError("failed writing matrix");
}

Eigen::MatrixXd read_matrix(std::istream& in) {
  std::array<char, 6> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError("bad matrix file magic");
  }
  const auto rows = static_cast<Eigen::Index>(get_le(in, 4));
  const auto cols = static_cast<Eigen::Index>(get_le(in, 4));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std::bit_cast<double>(get_le(in, 8));
  }
  return m;
}

void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_matrix(out, m);
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_matrix(in);
}

}  // namespace bvrvi
