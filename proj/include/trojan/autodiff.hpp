#ifndef TROJAN_AUTODIFF_HPP_
#define TROJAN_AUTODIFF_HPP_

#include <functional>
#include <span>
#include <vector>

#include "trojan/tensor.hpp"

namespace trojan {

class Graph;

// Handle to a node recorded on a Graph. Cheap to copy; valid while the
// graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr && id_ >= 0; }
  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  const Tensor& value() const;
  const std::vector<int>& shape() const { return value().shape(); }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Nodes are appended in execution order, so the tape is
// already topologically sorted.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a parameter; backward() accumulates into param.grad.
  Var param(Parameter& param);
  Var record(Tensor value, std::vector<int> parents, BackwardFn backward);

  // Propagates d(loss)/d(node) through the tape and adds the result into
  // every bound parameter's gradient buffer. `loss` must be a one-element
  // node recorded on this graph.
  void backward(Var loss);

  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient buffer of a parent, or nullptr when it needs none.
  Tensor* grad_of(int id);

 private:
  std::vector<Node> nodes_;
};

// Layers. Activations are NHWC: [batch, height, width, channels].
Var linear(Var x, Var weight, Var bias);               // x[B,I] w[O,I] b[O]
Var conv2d(Var x, Var weight, Var bias, int kernel);   // w[O, k*k*C], stride 1
Var maxpool2x2(Var x);                                 // stride 2, floor
Var relu(Var x);
Var tanh(Var x);
Var reshape(Var x, std::vector<int> shape);
Var log_softmax(Var x);                                // rows of [B,K]

// Elementwise and reductions used by losses.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, float factor);
Var exp(Var x);
Var square(Var x);
Var clamp(Var x, float lo, float hi);
Var minimum(Var a, Var b);
Var sum(Var x);                                        // -> [1]
Var mean(Var x);                                       // -> [1]
Var sum_rows(Var x);                                   // [B,K] -> [B]
Var gather_rows(Var x, std::span<const int> index);    // [B,K] -> [B]

}  // namespace trojan

#endif  // TROJAN_AUTODIFF_HPP_
