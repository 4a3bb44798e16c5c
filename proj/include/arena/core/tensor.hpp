#pragma once

#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "arena/core/error.hpp"
#include "arena/core/memory.hpp"
#include "arena/core/rng.hpp"

namespace arena {

struct Node;  // autodiff record, defined in tape.hpp

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Flat float storage registered with all open memory meters.
struct Storage {
  std::vector<float> v;
  std::vector<std::shared_ptr<MemoryMeter>> meters;

  explicit Storage(std::size_t n) : v(n) {
    meters = detail::meter_stack();
    for (auto& m : meters) m->on_alloc(bytes());
  }
  ~Storage() {
    for (auto& m : meters) m->on_free(bytes());
  }
  Storage(const Storage&) = delete;
  Storage& operator=(const Storage&) = delete;

  std::int64_t bytes() const { return static_cast<std::int64_t>(v.size()) * 4; }
};

// Dense row-major float32 tensor. Value semantics over shared immutable
// storage; a non-null node links it into the autodiff graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, float value) {
    Tensor t(std::move(shape));
    for (auto& x : t.store_->v) x = value;
    return t;
  }

  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0f); }

  static Tensor scalar(float value) { return full({1}, value); }

  static Tensor from_data(Shape shape, std::vector<float> data) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
      throw ShapeError("from_data: shape " + shape_str(shape) + " does not match data length " +
                       std::to_string(data.size()));
    Tensor t(std::move(shape));
    t.store_->v = std::move(data);
    return t;
  }

  static Tensor randn(Shape shape, Rng& rng, float stddev = 1.0f) {
    Tensor t(std::move(shape));
    for (auto& x : t.store_->v) x = static_cast<float>(rng.normal()) * stddev;
    return t;
  }

  bool defined() const { return store_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t numel() const { return store_ ? static_cast<std::int64_t>(store_->v.size()) : 0; }
  std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t rows() const { return shape_.at(0); }
  std::int64_t cols() const { return shape_.at(1); }

  float* data() { return store_->v.data(); }
  const float* data() const { return store_->v.data(); }

  float at(std::int64_t i) const { return store_->v[static_cast<std::size_t>(i)]; }
  float at(std::int64_t i, std::int64_t j) const {
    return store_->v[static_cast<std::size_t>(i * cols() + j)];
  }
  float& at(std::int64_t i) { return store_->v[static_cast<std::size_t>(i)]; }
  float& at(std::int64_t i, std::int64_t j) {
    return store_->v[static_cast<std::size_t>(i * cols() + j)];
  }

  float item() const {
    if (numel() != 1) throw ShapeError("item: tensor " + shape_str(shape_) + " is not scalar");
    return store_->v[0];
  }

  bool same_storage(const Tensor& o) const { return store_ == o.store_; }
  const Storage* storage_key() const { return store_.get(); }

  const std::shared_ptr<Node>& node() const { return node_; }
  void set_node(std::shared_ptr<Node> n) { node_ = std::move(n); }
  Tensor detached() const {
    Tensor t = *this;
    t.node_ = nullptr;
    return t;
  }

 private:
  explicit Tensor(Shape shape)
      : store_(std::make_shared<Storage>(static_cast<std::size_t>(shape_numel(shape)))),
        shape_(std::move(shape)) {}

  std::shared_ptr<Storage> store_;
  Shape shape_;
  std::shared_ptr<Node> node_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

}  // namespace arena
