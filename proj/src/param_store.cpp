// SPDX-License-Identifier: Apache-2.0
#include "storyforge/param_store.hpp"

#include <cstring>

#include "storyforge/errors.hpp"

namespace storyforge {

namespace {

bool bit_equal(const NumArray& a, const NumArray& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

NumArray& ParamStore::add(const std::string& name, const std::string& group, NumArray value) {
  if (entries_.count(name)) throw Error("ParamStore: duplicate parameter '" + name + "'");
  owner_[name] = group;
  groups_[group].insert(name);
  return entries_.emplace(name, std::move(value)).first->second;
}

NumArray& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const NumArray& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const std::string& ParamStore::group_of(const std::string& name) const {
  auto it = owner_.find(name);
  if (it == owner_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

void ParamStore::freeze(const std::string& group) {
  if (!groups_.count(group)) throw Error("ParamStore: unknown group '" + group + "'");
  frozen_.insert(group);
}

void ParamStore::unfreeze(const std::string& group) { frozen_.erase(group); }

void ParamStore::zero_grad() {
  for (auto& [_, value] : entries_) value.zero_grad();
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, value] : entries_) n += value.size();
  return n;
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (owner_ != other.owner_) return false;
  for (const auto& [name, value] : entries_)
    if (!bit_equal(value, other.at(name))) return false;
  return true;
}

bool ParamStore::same_group_values(const ParamStore& other, const std::string& group) const {
  auto it = groups_.find(group);
  if (it == groups_.end()) return false;
  for (const auto& name : it->second) {
    if (!other.contains(name) || !bit_equal(at(name), other.at(name))) return false;
  }
  return true;
}

}  // namespace storyforge
