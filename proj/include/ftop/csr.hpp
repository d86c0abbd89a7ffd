#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace ftop {

struct Triplet {
    int row = 0;
    int col = 0;
    double val = 0.0;
};

// Compressed sparse rows with sorted, duplicate-free columns. Duplicate
// triplets are merged in insertion order, so assembly is deterministic for a
// fixed triplet sequence.
class CsrMatrix {
  public:
    CsrMatrix() = default;

    static CsrMatrix from_triplets(int n_rows, int n_cols, std::vector<Triplet> ts) {
        std::stable_sort(ts.begin(), ts.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        CsrMatrix m;
        m.rows_ = n_rows;
        m.cols_n_ = n_cols;
        m.row_start_.assign(std::size_t(n_rows) + 1, 0);
        for (std::size_t i = 0; i < ts.size();) {
            std::size_t j = i + 1;
            double sum = ts[i].val;
            while (j < ts.size() && ts[j].row == ts[i].row && ts[j].col == ts[i].col) {
                sum += ts[j].val;
                ++j;
            }
            m.cols_.push_back(ts[i].col);
            m.vals_.push_back(sum);
            ++m.row_start_[std::size_t(ts[i].row) + 1];
            i = j;
        }
        for (int r = 0; r < n_rows; ++r) m.row_start_[r + 1] += m.row_start_[r];
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_n_; }
    int nnz() const { return int(vals_.size()); }
    const std::vector<int>& row_start() const { return row_start_; }
    const std::vector<int>& col_index() const { return cols_; }
    const std::vector<double>& values() const { return vals_; }
    std::vector<double>& values() { return vals_; }

    std::vector<double> matvec(const std::vector<double>& x) const {
        std::vector<double> y(std::size_t(rows_), 0.0);
        for (int r = 0; r < rows_; ++r) {
            double s = 0.0;
            for (int k = row_start_[r]; k < row_start_[r + 1]; ++k) s += vals_[k] * x[cols_[k]];
            y[r] = s;
        }
        return y;
    }

    CsrMatrix transposed() const {
        std::vector<Triplet> ts;
        ts.reserve(vals_.size());
        for (int r = 0; r < rows_; ++r)
            for (int k = row_start_[r]; k < row_start_[r + 1]; ++k)
                ts.push_back({cols_[k], r, vals_[k]});
        return from_triplets(cols_n_, rows_, std::move(ts));
    }

  private:
    int rows_ = 0;
    int cols_n_ = 0;
    std::vector<int> row_start_;
    std::vector<int> cols_;
    std::vector<double> vals_;
};

}  // namespace ftop
