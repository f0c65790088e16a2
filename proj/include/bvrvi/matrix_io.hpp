#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>

namespace bvrvi {

// Dense binary matrix file: magic "BVRVI1", u32 rows, u32 cols (little-endian),
// then rows*cols row-major little-endian IEEE-754 doubles.

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(std::istream& in);

void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

}  // namespace bvrvi
