#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mrgt {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix row_vector(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const;

    void fill(double v);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class LrGroup : std::uint8_t { gcn = 0, backbone = 1 };

const char* to_string(LrGroup g);

struct ParamTensor {
    std::string name;
    Matrix value;
    Matrix grad;
    LrGroup lr_group = LrGroup::backbone;
};

/// Named, ordered collection of trainable tensors. Insertion order is the
/// canonical order for optimizer updates and checkpoints.
class ParamStore {
public:
    /// Returns the index of the new tensor; names must be unique.
    std::size_t add(std::string name, Matrix value, LrGroup group);

    ParamTensor& operator[](std::size_t i) { return tensors_[i]; }
    const ParamTensor& operator[](std::size_t i) const { return tensors_[i]; }
    ParamTensor& at(const std::string& name);
    const ParamTensor& at(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.contains(name); }
    std::size_t index_of(const std::string& name) const;

    std::size_t size() const noexcept { return tensors_.size(); }
    std::size_t scalar_count() const noexcept;
    auto begin() noexcept { return tensors_.begin(); }
    auto end() noexcept { return tensors_.end(); }
    auto begin() const noexcept { return tensors_.begin(); }
    auto end() const noexcept { return tensors_.end(); }

    void zero_grad();

private:
    std::vector<ParamTensor> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Kernels. Accumulation runs row-major, left to right over the shared
// dimension, so results are reproducible bit for bit.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix matmul_at(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix softmax_rows(const Matrix& m);
double cosine_sim(std::span<const double> u, std::span<const double> v);
bool all_finite(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Central-difference gradient of a scalar function of a ParamStore.
struct NumericGrad {
    /// One matrix per tensor, same shape; only `checked` entries are filled.
    std::vector<Matrix> grad;
    /// Flat entry indices that were evaluated, per tensor.
    std::vector<std::vector<std::size_t>> checked;
};

struct FiniteDiffOptions {
    double epsilon = 1e-4;
    /// 0 means every entry; otherwise tensors larger than this are sampled.
    std::size_t max_entries_per_tensor = 0;
    std::uint64_t seed = 0;
};

/// `f` must read the store's current values; entries are perturbed in place
/// and restored before returning.
NumericGrad finite_diff_grad(const std::function<double()>& f, ParamStore& params,
                             const FiniteDiffOptions& opts = {});

/// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
/// reporting noise-level absolute differences as large relative errors.
double relative_error(double analytic, double numeric, double floor = 1e-6);

} // namespace mrgt
