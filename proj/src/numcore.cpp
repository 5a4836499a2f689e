#include "mrgt/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mrgt/errors.hpp"
#include "mrgt/rng.hpp"

namespace mrgt {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged initializer for matrix");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape_str() const {
    std::ostringstream os;
    os << rows_ << "x" << cols_;
    return os.str();
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

const char* to_string(LrGroup g) { return g == LrGroup::gcn ? "gcn" : "backbone"; }

std::size_t ParamStore::add(std::string name, Matrix value, LrGroup group) {
    if (index_.contains(name)) throw ValidationError("params", "duplicate parameter name " + name);
    const std::size_t idx = tensors_.size();
    index_.emplace(name, idx);
    Matrix grad(value.rows(), value.cols());
    tensors_.push_back(ParamTensor{std::move(name), std::move(value), std::move(grad), group});
    return idx;
}

std::size_t ParamStore::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("params", "unknown parameter " + name);
    return it->second;
}

ParamTensor& ParamStore::at(const std::string& name) { return tensors_[index_of(name)]; }
const ParamTensor& ParamStore::at(const std::string& name) const { return tensors_[index_of(name)]; }

std::size_t ParamStore::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& t : tensors_) t.grad.fill(0.0);
}

namespace {

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
    if (!ok) {
        throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                             b.shape_str());
    }
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "matmul", a, b);
    Matrix c(a.rows(), b.cols());
    const std::size_t n = a.cols();
    const std::size_t m = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out = c.data().data() + i * m;
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = a(i, k);
            const double* brow = b.data().data() + k * m;
            for (std::size_t j = 0; j < m; ++j) out[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "matmul_bt", a, b);
    Matrix c(a.rows(), b.rows());
    const std::size_t n = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.data().data() + i * n;
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.data().data() + j * n;
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += arow[k] * brow[k];
            c(i, j) = s;
        }
    }
    return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "matmul_at", a, b);
    Matrix c(a.cols(), b.cols());
    const std::size_t m = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* brow = b.data().data() + k * m;
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            double* out = c.data().data() + i * m;
            for (std::size_t j = 0; j < m; ++j) out[j] += aki * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "add", a, b);
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
    return c;
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto in = m.row(r);
        auto o = out.row(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            o[c] = std::exp(in[c] - mx);
            sum += o[c];
        }
        for (double& v : o) v /= sum;
    }
    return out;
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw DimensionError("cosine_sim: lengths " + std::to_string(u.size()) + " and " +
                             std::to_string(v.size()));
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    nu = std::sqrt(nu);
    nv = std::sqrt(nv);
    if (nu < 1e-12 || nv < 1e-12) return 0.0;
    return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

bool all_finite(const Matrix& m) {
    return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "max_abs_diff", a, b);
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

NumericGrad finite_diff_grad(const std::function<double()>& f, ParamStore& params,
                             const FiniteDiffOptions& opts) {
    if (!(opts.epsilon > 0.0)) throw NumericError("finite_diff_grad: epsilon must be positive");
    Rng rng(opts.seed);
    NumericGrad out;
    out.grad.reserve(params.size());
    out.checked.reserve(params.size());
    auto eval = [&](const std::string& name, std::size_t entry) {
        const double v = f();
        if (!std::isfinite(v)) {
            throw NumericError("finite_diff_grad: non-finite objective while perturbing " + name + "[" +
                               std::to_string(entry) + "]");
        }
        return v;
    };
    for (auto& p : params) {
        Matrix g(p.value.rows(), p.value.cols());
        std::vector<std::size_t> entries(p.value.size());
        for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
        if (opts.max_entries_per_tensor > 0 && entries.size() > opts.max_entries_per_tensor) {
            rng.shuffle(entries);
            entries.resize(opts.max_entries_per_tensor);
            std::sort(entries.begin(), entries.end());
        }
        for (std::size_t e : entries) {
            const double orig = p.value[e];
            p.value[e] = orig + opts.epsilon;
            const double fp = eval(p.name, e);
            p.value[e] = orig - opts.epsilon;
            const double fm = eval(p.name, e);
            p.value[e] = orig;
            g[e] = (fp - fm) / (2.0 * opts.epsilon);
        }
        out.grad.push_back(std::move(g));
        out.checked.push_back(std::move(entries));
    }
    return out;
}

double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

} // namespace mrgt
