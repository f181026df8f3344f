#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cape {

/// Dense row-major matrix of doubles. Small sizes only (a few hundred per
/// side); everything is value-semantic and immutable-friendly.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool is_square() const { return rows_ == cols_; }
    bool is_finite() const;

    DenseMatrix transpose() const;
    DenseMatrix hadamard(const DenseMatrix& o) const;

    DenseMatrix& operator+=(const DenseMatrix& o);
    DenseMatrix& operator-=(const DenseMatrix& o);
    DenseMatrix& operator*=(double s);

    double frobenius_norm() const;
    double max_abs() const;
    double trace() const;
    double sum_abs() const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);

/// e^S by scaling-and-squaring with a degree-12 Taylor core.
/// Throws std::invalid_argument on non-square or non-finite input.
DenseMatrix mat_exp(const DenseMatrix& s);

/// Solve A·X = B for X (A square, LU with partial pivoting).
DenseMatrix solve(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix inverse(const DenseMatrix& a);

/// Shortest round-trippable decimal representation of a double.
std::string format_double(double x);

void write_csv(const DenseMatrix& m, const std::string& path,
               const std::vector<std::string>& header = {});
DenseMatrix read_csv(const std::string& path, bool has_header = false);

} // namespace cape
