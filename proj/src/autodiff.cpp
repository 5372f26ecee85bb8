#include "trojan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "trojan/errors.hpp"

namespace trojan {
namespace {

// C[M,N] = A[M,K] * B^T with B stored [N,K].
void matmul_nt(const float* a, const float* b, float* c, int m, int n, int k) {
  std::vector<float> bt(static_cast<std::size_t>(k) * n);
  for (int j = 0; j < n; ++j) {
    for (int p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    std::fill(crow, crow + n, 0.0F);
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      if (av == 0.0F) continue;
      const float* brow = bt.data() + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,K] += A[M,N] * B[N,K].
void matmul_nn_acc(const float* a, const float* b, float* c, int m, int n,
                   int k) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * k;
    const float* arow = a + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float av = arow[j];
      if (av == 0.0F) continue;
      const float* brow = b + static_cast<std::size_t>(j) * k;
      for (int p = 0; p < k; ++p) crow[p] += av * brow[p];
    }
  }
}

// C[N,K] += A[M,N]^T * B[M,K].
void matmul_tn_acc(const float* a, const float* b, float* c, int m, int n,
                   int k) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * n;
    const float* brow = b + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const float av = arow[j];
      if (av == 0.0F) continue;
      float* crow = c + static_cast<std::size_t>(j) * k;
      for (int p = 0; p < k; ++p) crow[p] += av * brow[p];
    }
  }
}

Graph& graph_of(Var v) {
  if (!v.valid()) throw ContractViolation("operation on an unrecorded Var");
  return *v.graph();
}

Graph& common_graph(Var a, Var b) {
  Graph& g = graph_of(a);
  if (&graph_of(b) != &g) {
    throw ContractViolation("operands recorded on different graphs");
  }
  return g;
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " +
                            shape_string(a.shape()) + " vs " +
                            shape_string(b.shape()));
  }
}

void require_rank(Var x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    throw ContractViolation(std::string(op) + ": expected rank " +
                            std::to_string(rank) + ", got " +
                            shape_string(x.shape()));
  }
}

// Elementwise unary op with derivative expressed through input and output.
template <class Fwd, class Deriv>
Var unary(Var x, Fwd fwd, Deriv deriv) {
  Graph& g = graph_of(x);
  Tensor out(x.shape());
  const Tensor& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  const int xid = x.id();
  return g.record(std::move(out), {xid}, [xid, deriv](Graph& gr, int self) {
    Tensor* dx = gr.grad_of(xid);
    if (dx == nullptr) return;
    const Tensor& in = gr.node(xid).value;
    const Tensor& y = gr.node(self).value;
    const Tensor& dy = gr.node(self).grad;
    for (std::size_t i = 0; i < in.size(); ++i) {
      (*dx)[i] += dy[i] * deriv(in[i], y[i]);
    }
  });
}

}  // namespace

const Tensor& Var::value() const {
  if (!valid()) throw ContractViolation("value() of an unrecorded Var");
  return graph_->node(id_).value;
}

Var Graph::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::param(Parameter& param) {
  Node node;
  node.value = param.value;
  node.requires_grad = true;
  node.param = &param;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::record(Tensor value, std::vector<int> parents, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const int p : parents) {
    node.requires_grad = node.requires_grad || nodes_[p].requires_grad;
  }
  node.parents = std::move(parents);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor* Graph::grad_of(int id) {
  Node& n = nodes_[id];
  return n.requires_grad ? &n.grad : nullptr;
}

void Graph::backward(Var loss) {
  if (!loss.valid() || loss.graph() != this) {
    throw ContractViolation("backward() on a Var not recorded on this graph");
  }
  if (loss.value().size() != 1) {
    throw ContractViolation("backward() needs a one-element loss, got " +
                            shape_string(loss.shape()));
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad = Tensor(n.value.shape());
    } else {
      n.grad = Tensor();
    }
  }
  Node& root = nodes_[loss.id()];
  if (!root.requires_grad) return;
  root.grad[0] = 1.0F;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    if (n.backward) n.backward(*this, id);
  }
  for (Node& n : nodes_) {
    if (n.param == nullptr) continue;
    Tensor& dst = n.param->grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
  }
}

Var linear(Var x, Var weight, Var bias) {
  Graph& g = common_graph(x, weight);
  common_graph(x, bias);
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const int batch = x.shape()[0];
  const int in = x.shape()[1];
  const int out = weight.shape()[0];
  if (weight.shape()[1] != in || bias.value().size() != static_cast<std::size_t>(out)) {
    throw ContractViolation("linear: weight " + shape_string(weight.shape()) +
                            " incompatible with input " + shape_string(x.shape()));
  }
  Tensor y({batch, out});
  matmul_nt(x.value().data(), weight.value().data(), y.data(), batch, out, in);
  const Tensor& b = bias.value();
  for (int i = 0; i < batch; ++i) {
    for (int o = 0; o < out; ++o) y[i * out + o] += b[o];
  }
  const int xid = x.id(), wid = weight.id(), bid = bias.id();
  return g.record(std::move(y), {xid, wid, bid},
                  [=](Graph& gr, int self) {
                    const Tensor& dy = gr.node(self).grad;
                    if (Tensor* dw = gr.grad_of(wid)) {
                      matmul_tn_acc(dy.data(), gr.node(xid).value.data(),
                                    dw->data(), batch, out, in);
                    }
                    if (Tensor* db = gr.grad_of(bid)) {
                      for (int i = 0; i < batch; ++i) {
                        for (int o = 0; o < out; ++o) (*db)[o] += dy[i * out + o];
                      }
                    }
                    if (Tensor* dx = gr.grad_of(xid)) {
                      matmul_nn_acc(dy.data(), gr.node(wid).value.data(),
                                    dx->data(), batch, out, in);
                    }
                  });
}

Var conv2d(Var x, Var weight, Var bias, int kernel) {
  Graph& g = common_graph(x, weight);
  common_graph(x, bias);
  require_rank(x, 4, "conv2d");
  const int batch = x.shape()[0];
  const int height = x.shape()[1];
  const int width = x.shape()[2];
  const int channels = x.shape()[3];
  const int out_ch = weight.shape()[0];
  const int patch = kernel * kernel * channels;
  if (weight.value().rank() != 2 || weight.shape()[1] != patch ||
      bias.value().size() != static_cast<std::size_t>(out_ch) ||
      kernel > height || kernel > width) {
    throw ContractViolation("conv2d: weight " + shape_string(weight.shape()) +
                            " incompatible with input " + shape_string(x.shape()));
  }
  const int oh = height - kernel + 1;
  const int ow = width - kernel + 1;
  const int rows = batch * oh * ow;

  auto cols = std::make_shared<std::vector<float>>(
      static_cast<std::size_t>(rows) * patch);
  const float* in = x.value().data();
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        float* dst = cols->data() +
                     static_cast<std::size_t>((b * oh + i) * ow + j) * patch;
        for (int ki = 0; ki < kernel; ++ki) {
          const float* src =
              in + ((static_cast<std::size_t>(b) * height + i + ki) * width + j) *
                       channels;
          std::copy(src, src + kernel * channels, dst + ki * kernel * channels);
        }
      }
    }
  }
  Tensor y({batch, oh, ow, out_ch});
  matmul_nt(cols->data(), weight.value().data(), y.data(), rows, out_ch, patch);
  const Tensor& bv = bias.value();
  for (int r = 0; r < rows; ++r) {
    for (int o = 0; o < out_ch; ++o) y[r * out_ch + o] += bv[o];
  }

  const int xid = x.id(), wid = weight.id(), bid = bias.id();
  return g.record(
      std::move(y), {xid, wid, bid}, [=](Graph& gr, int self) {
        const Tensor& dy = gr.node(self).grad;
        if (Tensor* dw = gr.grad_of(wid)) {
          matmul_tn_acc(dy.data(), cols->data(), dw->data(), rows, out_ch, patch);
        }
        if (Tensor* db = gr.grad_of(bid)) {
          for (int r = 0; r < rows; ++r) {
            for (int o = 0; o < out_ch; ++o) (*db)[o] += dy[r * out_ch + o];
          }
        }
        if (Tensor* dx = gr.grad_of(xid)) {
          std::vector<float> dcols(static_cast<std::size_t>(rows) * patch, 0.0F);
          matmul_nn_acc(dy.data(), gr.node(wid).value.data(), dcols.data(), rows,
                        out_ch, patch);
          for (int b = 0; b < batch; ++b) {
            for (int i = 0; i < oh; ++i) {
              for (int j = 0; j < ow; ++j) {
                const float* src =
                    dcols.data() +
                    static_cast<std::size_t>((b * oh + i) * ow + j) * patch;
                for (int ki = 0; ki < kernel; ++ki) {
                  float* dst = dx->data() +
                               ((static_cast<std::size_t>(b) * height + i + ki) *
                                    width + j) * channels;
                  const float* s = src + ki * kernel * channels;
                  for (int q = 0; q < kernel * channels; ++q) dst[q] += s[q];
                }
              }
            }
          }
        }
      });
}

Var maxpool2x2(Var x) {
  Graph& g = graph_of(x);
  require_rank(x, 4, "maxpool2x2");
  const int batch = x.shape()[0];
  const int height = x.shape()[1];
  const int width = x.shape()[2];
  const int channels = x.shape()[3];
  const int oh = height / 2;
  const int ow = width / 2;
  if (oh == 0 || ow == 0) throw ContractViolation("maxpool2x2: input too small");
  Tensor y({batch, oh, ow, channels});
  auto argmax = std::make_shared<std::vector<int>>(y.size());
  const Tensor& in = x.value();
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        for (int c = 0; c < channels; ++c) {
          int best = -1;
          float best_value = 0.0F;
          for (int di = 0; di < 2; ++di) {
            for (int dj = 0; dj < 2; ++dj) {
              const int idx =
                  ((b * height + 2 * i + di) * width + 2 * j + dj) * channels + c;
              if (best < 0 || in[idx] > best_value) {
                best = idx;
                best_value = in[idx];
              }
            }
          }
          const int out_idx = ((b * oh + i) * ow + j) * channels + c;
          y[out_idx] = best_value;
          (*argmax)[out_idx] = best;
        }
      }
    }
  }
  const int xid = x.id();
  return g.record(std::move(y), {xid}, [xid, argmax](Graph& gr, int self) {
    Tensor* dx = gr.grad_of(xid);
    if (dx == nullptr) return;
    const Tensor& dy = gr.node(self).grad;
    for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[(*argmax)[i]] += dy[i];
  });
}

Var relu(Var x) {
  return unary(
      x, [](float v) { return v > 0.0F ? v : 0.0F; },
      [](float v, float) { return v > 0.0F ? 1.0F : 0.0F; });
}

Var tanh(Var x) {
  return unary(
      x, [](float v) { return std::tanh(v); },
      [](float, float y) { return 1.0F - y * y; });
}

Var exp(Var x) {
  return unary(
      x, [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Var square(Var x) {
  return unary(
      x, [](float v) { return v * v; }, [](float v, float) { return 2.0F * v; });
}

Var scale(Var x, float factor) {
  return unary(
      x, [factor](float v) { return factor * v; },
      [factor](float, float) { return factor; });
}

Var clamp(Var x, float lo, float hi) {
  return unary(
      x, [lo, hi](float v) { return std::clamp(v, lo, hi); },
      [lo, hi](float v, float) { return v >= lo && v <= hi ? 1.0F : 0.0F; });
}

Var reshape(Var x, std::vector<int> shape) {
  Graph& g = graph_of(x);
  if (shape_size(shape) != x.value().size()) {
    throw ContractViolation("reshape: " + shape_string(x.shape()) + " to " +
                            shape_string(shape));
  }
  const int xid = x.id();
  return g.record(x.value().reshaped(std::move(shape)), {xid},
                  [xid](Graph& gr, int self) {
                    Tensor* dx = gr.grad_of(xid);
                    if (dx == nullptr) return;
                    const Tensor& dy = gr.node(self).grad;
                    for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i];
                  });
}

Var log_softmax(Var x) {
  Graph& g = graph_of(x);
  require_rank(x, 2, "log_softmax");
  const int rows = x.shape()[0];
  const int cols = x.shape()[1];
  const Tensor& in = x.value();
  Tensor y(x.shape());
  for (int r = 0; r < rows; ++r) {
    const float* row = in.data() + r * cols;
    const float mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (int c = 0; c < cols; ++c) total += std::exp(static_cast<double>(row[c] - mx));
    const auto lse = static_cast<float>(std::log(total)) + mx;
    for (int c = 0; c < cols; ++c) y[r * cols + c] = row[c] - lse;
  }
  const int xid = x.id();
  return g.record(std::move(y), {xid}, [=](Graph& gr, int self) {
    Tensor* dx = gr.grad_of(xid);
    if (dx == nullptr) return;
    const Tensor& out = gr.node(self).value;
    const Tensor& dy = gr.node(self).grad;
    for (int r = 0; r < rows; ++r) {
      float total = 0.0F;
      for (int c = 0; c < cols; ++c) total += dy[r * cols + c];
      for (int c = 0; c < cols; ++c) {
        const int i = r * cols + c;
        (*dx)[i] += dy[i] - std::exp(out[i]) * total;
      }
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = common_graph(a, b);
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  const int aid = a.id(), bid = b.id();
  return g.record(std::move(y), {aid, bid}, [aid, bid](Graph& gr, int self) {
    const Tensor& dy = gr.node(self).grad;
    for (const int id : {aid, bid}) {
      if (Tensor* d = gr.grad_of(id)) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*d)[i] += dy[i];
      }
    }
  });
}

Var sub(Var a, Var b) {
  Graph& g = common_graph(a, b);
  require_same_shape(a, b, "sub");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  const int aid = a.id(), bid = b.id();
  return g.record(std::move(y), {aid, bid}, [aid, bid](Graph& gr, int self) {
    const Tensor& dy = gr.node(self).grad;
    if (Tensor* da = gr.grad_of(aid)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i];
    }
    if (Tensor* db = gr.grad_of(bid)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] -= dy[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = common_graph(a, b);
  require_same_shape(a, b, "mul");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  const int aid = a.id(), bid = b.id();
  return g.record(std::move(y), {aid, bid}, [aid, bid](Graph& gr, int self) {
    const Tensor& dy = gr.node(self).grad;
    const Tensor& av = gr.node(aid).value;
    const Tensor& bv = gr.node(bid).value;
    if (Tensor* da = gr.grad_of(aid)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * bv[i];
    }
    if (Tensor* db = gr.grad_of(bid)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] += dy[i] * av[i];
    }
  });
}

Var minimum(Var a, Var b) {
  Graph& g = common_graph(a, b);
  require_same_shape(a, b, "minimum");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = std::min(a.value()[i], b.value()[i]);
  }
  const int aid = a.id(), bid = b.id();
  return g.record(std::move(y), {aid, bid}, [aid, bid](Graph& gr, int self) {
    const Tensor& dy = gr.node(self).grad;
    const Tensor& av = gr.node(aid).value;
    const Tensor& bv = gr.node(bid).value;
    Tensor* da = gr.grad_of(aid);
    Tensor* db = gr.grad_of(bid);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      // Ties route the gradient to the first operand.
      if (av[i] <= bv[i]) {
        if (da) (*da)[i] += dy[i];
      } else if (db) {
        (*db)[i] += dy[i];
      }
    }
  });
}

Var sum(Var x) {
  Graph& g = graph_of(x);
  double total = 0.0;
  for (const float v : x.value().values()) total += v;
  const int xid = x.id();
  return g.record(Tensor({1}, static_cast<float>(total)), {xid},
                  [xid](Graph& gr, int self) {
                    Tensor* dx = gr.grad_of(xid);
                    if (dx == nullptr) return;
                    const float d = gr.node(self).grad[0];
                    for (float& v : dx->values()) v += d;
                  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ContractViolation("mean of an empty tensor");
  return scale(sum(x), 1.0F / static_cast<float>(n));
}

Var sum_rows(Var x) {
  Graph& g = graph_of(x);
  require_rank(x, 2, "sum_rows");
  const int rows = x.shape()[0];
  const int cols = x.shape()[1];
  Tensor y({rows});
  for (int r = 0; r < rows; ++r) {
    float total = 0.0F;
    for (int c = 0; c < cols; ++c) total += x.value()[r * cols + c];
    y[r] = total;
  }
  const int xid = x.id();
  return g.record(std::move(y), {xid}, [=](Graph& gr, int self) {
    Tensor* dx = gr.grad_of(xid);
    if (dx == nullptr) return;
    const Tensor& dy = gr.node(self).grad;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) (*dx)[r * cols + c] += dy[r];
    }
  });
}

Var gather_rows(Var x, std::span<const int> index) {
  Graph& g = graph_of(x);
  require_rank(x, 2, "gather_rows");
  const int rows = x.shape()[0];
  const int cols = x.shape()[1];
  if (index.size() != static_cast<std::size_t>(rows)) {
    throw ContractViolation("gather_rows: index length != rows");
  }
  auto idx = std::make_shared<std::vector<int>>(index.begin(), index.end());
  Tensor y({rows});
  for (int r = 0; r < rows; ++r) {
    const int c = (*idx)[r];
    if (c < 0 || c >= cols) throw ContractViolation("gather_rows: index out of range");
    y[r] = x.value()[r * cols + c];
  }
  const int xid = x.id();
  return g.record(std::move(y), {xid}, [=](Graph& gr, int self) {
    Tensor* dx = gr.grad_of(xid);
    if (dx == nullptr) return;
    const Tensor& dy = gr.node(self).grad;
    for (int r = 0; r < rows; ++r) (*dx)[r * cols + (*idx)[r]] += dy[r];
  });
}

}  // namespace trojan
