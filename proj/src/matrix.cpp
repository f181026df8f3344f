#include "cape/matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cape {

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool DenseMatrix::is_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

DenseMatrix DenseMatrix::hadamard(const DenseMatrix& o) const {
    if (!same_shape(o)) throw std::invalid_argument("hadamard: shape mismatch");
    DenseMatrix r = *this;
    for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] *= o.data_[k];
    return r;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& o) {
    if (!same_shape(o)) throw std::invalid_argument("operator+=: shape mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& o) {
    if (!same_shape(o)) throw std::invalid_argument("operator-=: shape mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

double DenseMatrix::frobenius_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return std::sqrt(acc);
}

double DenseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

double DenseMatrix::trace() const {
    if (!is_square()) throw std::invalid_argument("trace: non-square matrix");
    double acc = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) acc += (*this)(i, i);
    return acc;
}

double DenseMatrix::sum_abs() const {
    double acc = 0.0;
    for (double v : data_) acc += std::fabs(v);
    return acc;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("operator*: incompatible shapes");
    DenseMatrix r(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
        }
    return r;
}

DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

DenseMatrix mat_exp(const DenseMatrix& s) {
    if (!s.is_square()) throw std::invalid_argument("mat_exp: non-square matrix");
    if (!s.is_finite()) throw std::invalid_argument("mat_exp: non-finite entries");
    const std::size_t n = s.rows();

    // scale so the scaled 1-norm proxy stays small, then square back
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += std::fabs(s(i, j));
        norm = std::max(norm, row);
    }
    int squarings = 0;
    double scale = 1.0;
    while (norm * scale > 0.25) {
        scale *= 0.5;
        ++squarings;
    }

    DenseMatrix a = s;
    a *= scale;

    // degree-12 Taylor on the scaled matrix (remainder ~1e-18 at norm 0.25)
    DenseMatrix result = DenseMatrix::identity(n);
    DenseMatrix term = DenseMatrix::identity(n);
    for (int k = 1; k <= 12; ++k) {
        term = term * a;
        term *= 1.0 / static_cast<double>(k);
        result += term;
    }
    for (int k = 0; k < squarings; ++k) result = result * result;
    return result;
}

DenseMatrix solve(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.is_square()) throw std::invalid_argument("solve: non-square system");
    if (a.rows() != b.rows()) throw std::invalid_argument("solve: shape mismatch");
    const std::size_t n = a.rows();
    DenseMatrix lu = a;
    DenseMatrix x = b;
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::fabs(lu(col, col));
        for (std::size_t i = col + 1; i < n; ++i) {
            if (std::fabs(lu(i, col)) > best) {
                best = std::fabs(lu(i, col));
                pivot = i;
            }
        }
        if (best < 1e-14) throw std::runtime_error("solve: singular matrix");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(col, j), lu(pivot, j));
            for (std::size_t j = 0; j < x.cols(); ++j) std::swap(x(col, j), x(pivot, j));
        }
        for (std::size_t i = col + 1; i < n; ++i) {
            const double f = lu(i, col) / lu(col, col);
            lu(i, col) = f;
            for (std::size_t j = col + 1; j < n; ++j) lu(i, j) -= f * lu(col, j);
            for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= f * x(col, j);
        }
    }
    for (std::size_t col = n; col-- > 0;) {
        for (std::size_t j = 0; j < x.cols(); ++j) x(col, j) /= lu(col, col);
        for (std::size_t i = 0; i < col; ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= lu(i, col) * x(col, j);
    }
    return x;
}

DenseMatrix inverse(const DenseMatrix& a) {
    return solve(a, DenseMatrix::identity(a.rows()));
}

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

void write_csv(const DenseMatrix& m, const std::string& path,
               const std::vector<std::string>& header) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j) out << ',';
            out << header[j];
        }
        out << '\n';
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

DenseMatrix read_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first && has_header) {
            first = false;
            continue;
        }
        first = false;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{}) throw std::runtime_error("bad number in " + path + ": " + cell);
            (void)ptr;
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return {};
    DenseMatrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) throw std::runtime_error("ragged CSV: " + path);
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

} // namespace cape
