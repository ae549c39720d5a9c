#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lamo {

// Dense row-major f64 tensor. Clips use axis order (T, C, H, W), single
// frames (C, H, W). Immutable-by-convention once handed to another module.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);

    std::size_t size() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }
    std::size_t dim(std::size_t axis) const { return shape[axis]; }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    double& operator[](std::size_t flat) { return data[flat]; }
    double operator[](std::size_t flat) const { return data[flat]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

// Index of the first NaN/Inf entry, or size() when all values are finite.
std::size_t first_non_finite(const Tensor& t);

bool all_finite(const Tensor& t);

// Elementwise helpers shared across modules. Shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);
// a + k*b
Tensor add_scaled(const Tensor& a, const Tensor& b, double k);

double dot_flat(const Tensor& a, const Tensor& b);
double norm_flat(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace lamo
