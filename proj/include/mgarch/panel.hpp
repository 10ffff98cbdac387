#pragma once

#include "mgarch/errors.hpp"
#include "mgarch/linalg.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mgarch {

/// Ordered sequence of T real m x n matrices, optionally labelled by time.
class MatrixPanel {
public:
    MatrixPanel() = default;

    MatrixPanel(std::vector<Matrix> data, std::vector<std::string> time_labels = {})
        : data_(std::move(data)), labels_(std::move(time_labels)) {
        validate();
    }

    /// Empty panel of fixed dims, filled later with push_back.
    static MatrixPanel with_dims(Eigen::Index m, Eigen::Index n) {
        if (m <= 0 || n <= 0) {
            throw invalid_input("MatrixPanel: dims must be positive");
        }
        MatrixPanel p;
        p.rows_ = m;
        p.cols_ = n;
        return p;
    }

    void push_back(Matrix x, std::string label = {}) {
        if (data_.empty() && rows_ == 0) {
            rows_ = x.rows();
            cols_ = x.cols();
        }
        check_matrix(x, data_.size());
        data_.push_back(std::move(x));
        if (!label.empty() || !labels_.empty()) {
            labels_.resize(data_.size() - 1);
            labels_.push_back(std::move(label));
        }
    }

    [[nodiscard]] Eigen::Index rows() const noexcept { return rows_; }
    [[nodiscard]] Eigen::Index cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] const Matrix& operator[](std::size_t t) const { return data_[t]; }
    [[nodiscard]] const Matrix& at(std::size_t t) const { return data_.at(t); }
    [[nodiscard]] const std::vector<Matrix>& data() const noexcept { return data_; }
    [[nodiscard]] const std::vector<std::string>& time_labels() const noexcept { return labels_; }

    [[nodiscard]] auto begin() const noexcept { return data_.begin(); }
    [[nodiscard]] auto end() const noexcept { return data_.end(); }

    /// Observations [first, first + count).
    [[nodiscard]] MatrixPanel slice(std::size_t first, std::size_t count) const {
        if (first + count > data_.size()) {
            throw invalid_input("MatrixPanel::slice: range exceeds panel length");
        }
        std::vector<Matrix> sub(data_.begin() + static_cast<std::ptrdiff_t>(first),
                                data_.begin() + static_cast<std::ptrdiff_t>(first + count));
        std::vector<std::string> lab;
        if (!labels_.empty()) {
            lab.assign(labels_.begin() + static_cast<std::ptrdiff_t>(first),
                       labels_.begin() + static_cast<std::ptrdiff_t>(first + count));
        }
        return MatrixPanel(std::move(sub), std::move(lab));
    }

    [[nodiscard]] Matrix mean() const {
        Matrix mu = Matrix::Zero(rows_, cols_);
        for (const auto& x : data_) {
            mu += x;
        }
        return data_.empty() ? mu : Matrix(mu / static_cast<double>(data_.size()));
    }

    /// Copy with the time-average removed from every entry.
    [[nodiscard]] MatrixPanel demeaned() const {
        const Matrix mu = mean();
        std::vector<Matrix> out;
        out.reserve(data_.size());
        for (const auto& x : data_) {
            out.push_back(x - mu);
        }
        return MatrixPanel(std::move(out), labels_);
    }

    /// Panel of the single entry (i, j) as a 1 x 1 series.
    [[nodiscard]] MatrixPanel entry(Eigen::Index i, Eigen::Index j) const {
        std::vector<Matrix> out;
        out.reserve(data_.size());
        for (const auto& x : data_) {
            out.push_back(Matrix::Constant(1, 1, x(i, j)));
        }
        return MatrixPanel(std::move(out), labels_);
    }

private:
    void validate() {
        if (data_.empty()) {
            throw invalid_input("MatrixPanel: at least one observation is required");
        }
        rows_ = data_.front().rows();
        cols_ = data_.front().cols();
        if (rows_ <= 0 || cols_ <= 0) {
            throw invalid_input("MatrixPanel: dims must be positive");
        }
        for (std::size_t t = 0; t < data_.size(); ++t) {
            check_matrix(data_[t], t);
        }
        if (!labels_.empty() && labels_.size() != data_.size()) {
            throw invalid_input("MatrixPanel: time label count does not match T");
        }
    }

    void check_matrix(const Matrix& x, std::size_t t) const {
        if (x.rows() != rows_ || x.cols() != cols_) {
            throw invalid_input("MatrixPanel: observation " + std::to_string(t + 1) +
                                " has dims different from the first observation");
        }
        if (!x.allFinite()) {
            throw invalid_input("MatrixPanel: observation " + std::to_string(t + 1) +
                                " has non-finite entries");
        }
    }

    std::vector<Matrix> data_;
    std::vector<std::string> labels_;
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
};

}  // namespace mgarch
