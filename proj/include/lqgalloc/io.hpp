#pragma once

#include <string>

#include <Eigen/Dense>

namespace lqgalloc {

// Doubles formatted with 17 significant digits so round trips are exact and
// repeated runs are byte-identical.
std::string format_double(double v);

// Row-major matrix CSV with a one-line shape header comment "# rows cols".
std::string matrix_to_csv(const Eigen::MatrixXd& M);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Git-style blob hash: sha1("blob <len>\0" + content), hex-encoded.
std::string git_blob_sha1(const std::string& content);

} // namespace lqgalloc
