#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hwf/common.hpp"

namespace hwf {

template <typename T>
class Tape;

// Dense row-major N-dimensional array. Copies share the underlying buffer;
// buffers produced by operations are never written again, so sharing is safe
// across threads. Leaves (weights, inputs) own a gradient buffer once
// requires_grad is set; backward() accumulates into it.
template <typename T>
class Tensor {
public:
    using Scalar = T;

    Tensor() : data_(std::make_shared<std::vector<T>>()) {}

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<T>>(static_cast<size_t>(hwf::numel(shape_)), T(0))) {
        check_shape();
    }

    Tensor(Shape shape, std::vector<T> values)
        : shape_(std::move(shape)), data_(std::make_shared<std::vector<T>>(std::move(values))) {
        check_shape();
        if (static_cast<int64_t>(data_->size()) != hwf::numel(shape_))
            throw ConfigError("tensor data length " + std::to_string(data_->size()) +
                              " does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, T value) {
        Tensor t(std::move(shape));
        for (T& v : *t.data_) v = value;
        return t;
    }

    static Tensor ones(Shape shape) { return full(std::move(shape), T(1)); }

    static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int64_t numel() const { return static_cast<int64_t>(data_->size()); }

    const std::vector<T>& data() const { return *data_; }

    // For leaf setup (weight init, optimizer updates). Do not call on the
    // output of an operation that may still be referenced by a tape.
    std::vector<T>& mutable_data() { return *data_; }

    T item() const {
        if (numel() != 1) throw UsageError("item() requires a single-element tensor");
        return (*data_)[0];
    }

    T at(const std::vector<int64_t>& idx) const {
        return (*data_)[static_cast<size_t>(linear_index(idx))];
    }

    int64_t linear_index(const std::vector<int64_t>& idx) const {
        if (idx.size() != shape_.size()) throw UsageError("index rank mismatch");
        int64_t lin = 0;
        for (size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] < 0 || idx[i] >= shape_[i]) throw UsageError("index out of range");
            lin = lin * shape_[i] + idx[i];
        }
        return lin;
    }

    bool requires_grad() const { return requires_grad_; }

    Tensor& set_requires_grad(bool on) {
        requires_grad_ = on;
        if (on && !grad_)
            grad_ = std::make_shared<std::vector<T>>(data_->size(), T(0));
        return *this;
    }

    const std::vector<T>* grad() const { return grad_ ? grad_.get() : nullptr; }
    std::vector<T>* mutable_grad() { return grad_ ? grad_.get() : nullptr; }

    void zero_grad() {
        if (grad_) std::fill(grad_->begin(), grad_->end(), T(0));
    }

    // --- internals shared with Tape and the primitive ops ---
    const std::shared_ptr<std::vector<T>>& data_ptr() const { return data_; }
    const std::shared_ptr<std::vector<T>>& grad_ptr() const { return grad_; }
    int64_t tape_node() const { return node_; }
    uint64_t tape_id() const { return tape_id_; }
    void stamp(uint64_t tape_id, int64_t node) {
        tape_id_ = tape_id;
        node_ = node;
    }

    // Same buffer, new shape; no copy.
    Tensor reshaped_view(Shape shape) const {
        Tensor out;
        out.shape_ = std::move(shape);
        out.data_ = data_;
        return out;
    }

private:
    void check_shape() const {
        for (int64_t e : shape_)
            if (e <= 0) throw ConfigError("non-positive extent in shape " + shape_str(shape_));
    }

    Shape shape_;
    std::shared_ptr<std::vector<T>> data_;
    std::shared_ptr<std::vector<T>> grad_;
    bool requires_grad_ = false;
    int64_t node_ = -1;
    uint64_t tape_id_ = 0;  // 0 = not recorded
};

// Records primitive applications so a scalar can be differentiated with one
// reverse sweep. Each entry keeps the node ids involved and a closure that
// applies the vector-Jacobian product. A tape is single-use: backward()
// consumes it.
template <typename T>
class Tape {
public:
    Tape() : id_(next_id()) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    uint64_t id() const { return id_; }
    size_t size() const { return entries_.size(); }

    // Node id of an input tensor: reuses the stamp for tensors produced on
    // this tape, registers leaves for requires_grad tensors, and returns -1
    // for constants.
    int64_t input_node(const Tensor<T>& t) {
        if (t.tape_id() == id_ && t.tape_node() >= 0) return t.tape_node();
        if (!t.requires_grad()) return -1;
        const void* key = t.data_ptr().get();
        auto it = leaf_index_.find(key);
        if (it != leaf_index_.end()) return it->second;
        const int64_t node = add_node(t.numel());
        leaf_index_.emplace(key, node);
        leaves_.emplace_back(node, t.grad_ptr());
        return node;
    }

    // Registers the output of an op and stamps the tensor.
    int64_t output_node(Tensor<T>& t) {
        const int64_t node = add_node(t.numel());
        t.stamp(id_, node);
        return node;
    }

    void record(int64_t out_node, std::function<void(Tape&)> vjp) {
        if (consumed_) throw UsageError("tape already consumed by backward()");
        entries_.push_back(Entry{out_node, std::move(vjp)});
    }

    // Gradient of the entry's output; empty if the node is off the loss path.
    const std::vector<T>& grad_of(int64_t node) const { return grads_[static_cast<size_t>(node)]; }

    // Accumulation buffer for an input node; nullptr for untracked inputs.
    std::vector<T>* accum(int64_t node) {
        if (node < 0) return nullptr;
        auto& g = grads_[static_cast<size_t>(node)];
        if (g.empty()) g.assign(static_cast<size_t>(node_sizes_[static_cast<size_t>(node)]), T(0));
        return &g;
    }

    // Reverse sweep from a scalar loss. Populates the grad buffer of every
    // requires_grad leaf reachable from the loss, exactly once.
    void backward(const Tensor<T>& loss) {
        if (consumed_) throw UsageError("backward() already ran on this tape");
        if (loss.numel() != 1) throw UsageError("backward() needs a scalar loss");
        if (loss.tape_id() != id_ || loss.tape_node() < 0)
            throw UsageError("loss is detached from this tape");
        grads_.assign(node_sizes_.size(), {});
        grads_[static_cast<size_t>(loss.tape_node())] = {T(1)};
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
            if (grads_[static_cast<size_t>(it->out)].empty()) continue;
            it->vjp(*this);
        }
        for (auto& [node, buf] : leaves_) {
            auto& g = grads_[static_cast<size_t>(node)];
            if (g.empty() || !buf) continue;
            for (size_t i = 0; i < g.size(); ++i) (*buf)[i] += g[i];
        }
        grads_.clear();
        consumed_ = true;
    }

private:
    struct Entry {
        int64_t out;
        std::function<void(Tape&)> vjp;
    };

    static uint64_t next_id() {
        static std::atomic<uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    int64_t add_node(int64_t size) {
        node_sizes_.push_back(size);
        return static_cast<int64_t>(node_sizes_.size()) - 1;
    }

    uint64_t id_;
    bool consumed_ = false;
    std::vector<int64_t> node_sizes_;
    std::vector<Entry> entries_;
    std::vector<std::vector<T>> grads_;
    std::unordered_map<const void*, int64_t> leaf_index_;
    std::vector<std::pair<int64_t, std::shared_ptr<std::vector<T>>>> leaves_;
};

// RAII activation of a tape for the current thread. Ops record themselves on
// the innermost active tape; with no scope active they run without recording.
template <typename T>
class TapeScope {
public:
    explicit TapeScope(Tape<T>& tape) : prev_(current_) { current_ = &tape; }
    ~TapeScope() { current_ = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

    static Tape<T>* current() { return current_; }

private:
    Tape<T>* prev_;
    static thread_local Tape<T>* current_;
};

template <typename T>
thread_local Tape<T>* TapeScope<T>::current_ = nullptr;

}  // namespace hwf
