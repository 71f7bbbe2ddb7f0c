#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ilse/tensor.hpp"

namespace ilse {

// Named trainable tensors with their gradients and Adam moments. Iteration
// order is insertion order, which fixes checkpoint layout and update order.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor first_moment;
    Tensor second_moment;
  };

  Tensor& add(std::string name, Tensor init);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;

  Tensor& value(const std::string& name) { return entries_[index_of(name)].value; }
  const Tensor& value(const std::string& name) const { return entries_[index_of(name)].value; }
  Tensor& grad(const std::string& name) { return entries_[index_of(name)].grad; }
  const Tensor& grad(const std::string& name) const { return entries_[index_of(name)].grad; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Total number of trainable scalars.
  std::size_t scalar_count() const;
  // Scalars whose name starts with prefix.
  std::size_t scalar_count(const std::string& prefix) const;

  void zero_grad();
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  // Copies values only; gradients and moments are left untouched.
  void copy_values_from(const ParamStore& other);

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

}  // namespace ilse
