#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "arena/core/error.hpp"
#include "arena/core/tensor.hpp"

namespace arena {

// One recorded primitive op: the inputs it consumed and a vector-Jacobian
// product producing the input cotangents from the output cotangent. Entries
// of the returned vector may be undefined for non-differentiable inputs
// (index tensors, masks).
struct Node {
  std::vector<Tensor> inputs;
  std::function<std::vector<Tensor>(const Tensor& grad_out)> vjp;
  const Storage* out_store = nullptr;
};

class GradMode {
 public:
  static bool enabled() { return flag(); }
  static void set(bool on) { flag() = on; }

 private:
  static bool& flag() {
    static thread_local bool f = true;
    return f;
  }
};

struct NoGradGuard {
  NoGradGuard() : prev(GradMode::enabled()) { GradMode::set(false); }
  ~NoGradGuard() { GradMode::set(prev); }
  bool prev;
};

// Attaches a node to `out` when recording is on. Every primitive op funnels
// through here.
inline Tensor record(Tensor out, std::vector<Tensor> inputs,
                     std::function<std::vector<Tensor>(const Tensor&)> vjp) {
  if (GradMode::enabled()) {
    auto n = std::make_shared<Node>();
    n->inputs = std::move(inputs);
    n->vjp = std::move(vjp);
    n->out_store = out.storage_key();
    out.set_node(std::move(n));
  }
  return out;
}

namespace detail {
// Out-of-place accumulation. Accumulating in place would be wrong: a vjp may
// return the same tensor for several inputs (add returns {g, g}), or return
// the output cotangent itself, so grad slots can alias each other or a grad
// still held in the map. A fresh sum keeps every slot independent.
inline Tensor grad_sum(const Tensor& acc, const Tensor& g) {
  Tensor out = Tensor::zeros(acc.shape());
  float* d = out.data();
  const float* a = acc.data();
  const float* s = g.data();
  for (std::int64_t i = 0, n = out.numel(); i < n; ++i) d[i] = a[i] + s[i];
  return out;
}
}  // namespace detail

// Reverse-mode accumulation over the graph hanging off `loss`. Recorded ops
// are the Node records, accumulators are keyed by tensor storage identity,
// and each node is visited exactly once in reverse topological order.
class Tape {
 public:
  // allow_unreachable: return a zero gradient for wrt tensors the loss does
  // not depend on (e.g. parameters a mechanism leaves unused) instead of
  // throwing.
  static std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& wrt,
                                  bool allow_unreachable = false) {
    if (loss.numel() != 1) throw ShapeError("grad: loss " + shape_str(loss.shape()) + " is not scalar");
    NoGradGuard ng;  // cotangent math is not itself recorded

    // Topological order by iterative DFS.
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    struct Frame {
      Node* n;
      std::size_t next_input;
    };
    std::vector<Frame> stack;
    if (loss.node()) {
      seen.insert(loss.node().get());
      stack.push_back({loss.node().get(), 0});
    }
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_input < f.n->inputs.size()) {
        Node* child = f.n->inputs[f.next_input++].node().get();
        if (child && !seen.count(child)) {
          seen.insert(child);
          stack.push_back({child, 0});
        }
      } else {
        topo.push_back(f.n);
        stack.pop_back();
      }
    }

    std::unordered_set<const Storage*> wanted;
    for (const auto& w : wrt) wanted.insert(w.storage_key());

    std::unordered_map<const Storage*, Tensor> grads;
    grads[loss.storage_key()] = Tensor::ones(loss.shape());

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      Node* n = *it;
      auto gi = grads.find(n->out_store);
      if (gi == grads.end()) continue;  // output unused downstream
      Tensor gout = gi->second;
      if (!wanted.count(n->out_store)) grads.erase(gi);  // free as we go
      auto in_grads = n->vjp(gout);
      for (std::size_t i = 0; i < n->inputs.size(); ++i) {
        if (i >= in_grads.size() || !in_grads[i].defined()) continue;
        const Storage* key = n->inputs[i].storage_key();
        auto slot = grads.find(key);
        if (slot == grads.end()) {
          grads.emplace(key, in_grads[i]);
        } else {
          slot->second = detail::grad_sum(slot->second, in_grads[i]);
        }
      }
    }

    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) {
      auto it = grads.find(w.storage_key());
      if (it == grads.end()) {
        if (!allow_unreachable)
          throw GraphError("grad: tensor " + shape_str(w.shape()) +
                           " is not reachable from the loss (disconnected graph)");
        out.push_back(Tensor::zeros(w.shape()));
      } else {
        out.push_back(it->second);
      }
    }
    return out;
  }
};

}  // namespace arena
