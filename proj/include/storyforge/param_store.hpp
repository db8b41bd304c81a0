// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "storyforge/num_array.hpp"

namespace storyforge {

/// Named registry of learnable weights. Every entry belongs to exactly one group;
/// groups can be frozen, in which case the optimizer leaves them untouched.
class ParamStore {
 public:
  /// Adds an entry. Throws if the name already exists.
  NumArray& add(const std::string& name, const std::string& group, NumArray value);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  NumArray& at(const std::string& name);
  const NumArray& at(const std::string& name) const;
  const std::string& group_of(const std::string& name) const;

  const std::map<std::string, NumArray>& entries() const { return entries_; }
  std::map<std::string, NumArray>& entries() { return entries_; }
  const std::map<std::string, std::set<std::string>>& groups() const { return groups_; }
  std::vector<std::string> names() const;

  void freeze(const std::string& group);
  void unfreeze(const std::string& group);
  void unfreeze_all() { frozen_.clear(); }
  bool is_frozen_group(const std::string& group) const { return frozen_.count(group) != 0; }
  bool is_frozen(const std::string& name) const { return is_frozen_group(group_of(name)); }
  const std::set<std::string>& frozen() const { return frozen_; }

  void zero_grad();
  std::size_t parameter_count() const;

  /// True when both stores hold identical names, groups, shapes and bit-identical values.
  bool same_values(const ParamStore& other) const;
  /// Bitwise value comparison restricted to one group.
  bool same_group_values(const ParamStore& other, const std::string& group) const;

 private:
  std::map<std::string, NumArray> entries_;
  std::map<std::string, std::string> owner_;
  std::map<std::string, std::set<std::string>> groups_;
  std::set<std::string> frozen_;
};

}  // namespace storyforge
