#include "trojan/tensor.hpp"

#include <cmath>
#include <cstring>

#include "trojan/errors.hpp"

namespace trojan {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (const int d : shape) {
    if (d < 0) throw ContractViolation("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ContractViolation("tensor data length does not match shape " +
                            shape_string(shape_));
  }
}

void Tensor::fill(float value) {
  for (float& x : data_) x = value;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
  return Tensor(std::move(shape), data_);
}

Parameter& ParamStore::add(std::string name, Tensor value) {
  if (find(name) != nullptr) {
    throw ContractViolation("duplicate parameter name " + name);
  }
  Tensor grad(value.shape());
  params_.push_back({std::move(name), std::move(value), std::move(grad)});
  return params_.back();
}

Parameter* ParamStore::find(const std::string& name) {
  for (Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ParamStore::find(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter& ParamStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (p == nullptr) throw ContractViolation("no parameter named " + name);
  return *p;
}

const Parameter& ParamStore::at(const std::string& name) const {
  const Parameter* p = find(name);
  if (p == nullptr) throw ContractViolation("no parameter named " + name);
  return *p;
}

void ParamStore::zero_grad() {
  for (Parameter& p : params_) p.grad.fill(0.0F);
}

double ParamStore::grad_norm() const {
  double sum = 0.0;
  for (const Parameter& p : params_) {
    for (const float g : p.grad.values()) sum += static_cast<double>(g) * g;
  }
  return std::sqrt(sum);
}

double ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const auto scale = static_cast<float>(max_norm / (norm + 1e-6));
    for (Parameter& p : params_) {
      for (float& g : p.grad.values()) g *= scale;
    }
  }
  return norm;
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Parameter& a = params_[i];
    const Parameter& b = other.params_[i];
    if (a.name != b.name || a.value.shape() != b.value.shape()) return false;
    if (std::memcmp(a.value.data(), b.value.data(),
                    a.value.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace trojan
