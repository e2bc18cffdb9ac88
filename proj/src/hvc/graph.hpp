#pragma once

// Reverse-mode autodiff tape. A Graph owns the nodes of one forward
// computation; backward() walks them exactly once in reverse execution
// order, so gradient accumulation order is fixed and results are
// reproducible. Graphs built with recording=false execute the same kernels
// without tracking, which keeps encode/decode numerics bit-identical to
// the training path.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <vector>

#include "hvc/kernels.hpp"
#include "hvc/params.hpp"
#include "hvc/tensor.hpp"

namespace hvc {

struct Node {
    Tensor value;
    Tensor grad; // allocated lazily; defined() means the node is on a grad path
    bool requires_grad = false;
    std::vector<Node*> parents;
    std::function<void(Node&)> backfn;
};

struct Var {
    Node* node = nullptr;
    bool defined() const { return node != nullptr; }
};

class Graph {
  public:
    explicit Graph(ParamStore* store = nullptr, bool recording = true)
        : store_(store), recording_(recording) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return recording_; }
    ParamStore* store() { return store_; }

    Var leaf(Tensor value, bool requires_grad = false);
    Var param(ParamId id); // memoized: one node per param per graph

    // --- ops ---
    Var conv2d(Var x, Var w, Var b, const ConvSpec& spec);
    Var pixel_shuffle_up(Var x, int64_t r);
    Var layer_norm_channels(Var x, Var gamma, Var beta, double eps);
    Var gelu(Var x);
    Var softplus(Var x);
    Var clamp(Var x, double lo, double hi);
    Var add(Var a, Var b);
    Var scale(Var x, double s);
    Var broadcast_channel(Var bias, int64_t n, int64_t h, int64_t w);
    Var concat_c(const std::vector<Var>& xs);
    Var slice_c(Var x, int64_t c0, int64_t c1);
    Var sum_all(Var x);
    Var mse(Var a, Var b);
    Var ste_round(Var x);
    Var rate_bits(Var z, Var mu_hat, Var sigma_hat, double p_min);

    void backward(Var loss);
    // Adds this graph's parameter gradients into the store, in ParamId order.
    void accumulate_param_grads(double scl = 1.0);

    const Tensor& val(Var v) const;
    const Tensor& grad(Var v) const;
    size_t node_count() const { return nodes_.size(); }

  private:
    Node* make_node(Tensor value, std::vector<Node*> parents,
                    std::function<void(Node&)> backfn);
    static void ensure_grad(Node& n);

    ParamStore* store_ = nullptr;
    bool recording_ = true;
    bool backward_done_ = false;
    std::deque<Node> nodes_;
    std::map<ParamId, Node*> param_nodes_;
};

// y += a * x, elementwise (dtype-dispatched helper shared with the trainer).
void tensor_axpy(const Tensor& x, double a, Tensor& y);

} // namespace hvc
