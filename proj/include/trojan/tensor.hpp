#ifndef TROJAN_TENSOR_HPP_
#define TROJAN_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace trojan {

// Dense row-major float32 tensor with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0F);
  Tensor(std::vector<int> shape, std::vector<float> data);

  const std::vector<int>& shape() const { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  void fill(float value);
  // Same data, new shape with equal element count.
  Tensor reshaped(std::vector<int> shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

std::size_t shape_size(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Named parameters in insertion order. Every parameter carries a same-shape
// gradient buffer.
class ParamStore {
 public:
  Parameter& add(std::string name, Tensor value);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void zero_grad();
  double grad_norm() const;
  // Scales gradients so their global L2 norm is at most max_norm. Returns the
  // norm before clipping.
  double clip_grad_norm(double max_norm);

  // True iff names, shapes and values are bitwise identical.
  bool same_values(const ParamStore& other) const;

 private:
  std::vector<Parameter> params_;
};

}  // namespace trojan

#endif  // TROJAN_TENSOR_HPP_
