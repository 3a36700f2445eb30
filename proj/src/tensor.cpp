#include "mva/tensor.h"

#include <bit>
#include <sstream>
#include <utility>

namespace mva {

const char* dtype_name(DType dtype) {
    return dtype == DType::f32 ? "f32" : "f64";
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t extent : shape) {
        if (extent == 0) {
            throw ShapeError("tensor extents must be >= 1, got " + shape_string(shape));
        }
        n *= extent;
    }
    return n;
}

DType promote(DType a, DType b) noexcept {
    return (a == DType::f64 || b == DType::f64) ? DType::f64 : DType::f32;
}

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape, DType dtype)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0), dtype_(dtype) {}

Tensor::Tensor(Shape shape, std::vector<double> data, DType dtype)
    : shape_(std::move(shape)), data_(std::move(data)), dtype_(dtype) {
    if (shape_numel(shape_) != data_.size()) {
        throw ShapeError("shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_numel(shape_)) + " elements, got " +
                         std::to_string(data_.size()));
    }
    round_to_dtype();
}

Tensor Tensor::zeros(Shape shape, DType dtype) { return Tensor(std::move(shape), dtype); }

Tensor Tensor::ones(Shape shape, DType dtype) { return full(std::move(shape), 1.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), dtype);
}

Tensor Tensor::scalar(double value, DType dtype) { return Tensor({}, {value}, dtype); }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape_));
    }
    return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size()) {
        throw ShapeError("index rank " + std::to_string(index.size()) +
                         " does not match shape " + shape_string(shape_));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= shape_[axis]) {
            throw std::out_of_range("index out of range on axis " + std::to_string(axis));
        }
        flat = flat * shape_[axis] + i;
        ++axis;
    }
    return flat;
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    return data_[offset(index)];
}

void Tensor::set(std::initializer_list<std::size_t> index, double value) {
    data_[offset(index)] = dtype_ == DType::f32 ? static_cast<double>(static_cast<float>(value))
                                                : value;
}

Tensor Tensor::reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_, dtype_);
}

Tensor Tensor::to(DType dtype) const {
    Tensor out = *this;
    out.dtype_ = dtype;
    out.round_to_dtype();
    return out;
}

void Tensor::round_to_dtype() {
    if (dtype_ != DType::f32) return;
    for (double& v : data_) v = static_cast<double>(static_cast<float>(v));
}

bool Tensor::identical(const Tensor& other) const noexcept {
    if (shape_ != other.shape_ || dtype_ != other.dtype_) return false;
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(data_[i]) != std::bit_cast<std::uint64_t>(other.data_[i])) {
            return false;
        }
    }
    return true;
}

}  // namespace mva
