// Copyright 2026 The wm_policy Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wmp/autodiff/param_store.h"

#include "wmp/common/error.h"

namespace wmp::ad {

void ParamStore::set(const std::string& name, Tensor value) {
  Entry e;
  e.moments.m = Tensor::zeros_like(value);
  e.moments.v = Tensor::zeros_like(value);
  e.value = std::move(value);
  entries_.insert_or_assign(name, std::move(e));
}

bool ParamStore::contains(std::string_view name) const {
  return entries_.find(name) != entries_.end();
}

const ParamStore::Entry& ParamStore::entry(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw InvalidArgument("unknown parameter '" + std::string(name) + "'");
  }
  return it->second;
}

ParamStore::Entry& ParamStore::entry(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw InvalidArgument("unknown parameter '" + std::string(name) + "'");
  }
  return it->second;
}

const Tensor& ParamStore::at(std::string_view name) const {
  return entry(name).value;
}
Tensor& ParamStore::mutable_at(std::string_view name) {
  return entry(name).value;
}
Moments& ParamStore::moments(std::string_view name) {
  return entry(name).moments;
}
const Moments& ParamStore::moments(std::string_view name) const {
  return entry(name).moments;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamStore::names_with_prefix(
    std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, e] : entries_) {
    if (std::string_view(name).starts_with(prefix)) out.push_back(name);
  }
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

void ParamStore::erase_prefix(std::string_view prefix) {
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (std::string_view(it->first).starts_with(prefix)) {
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
}

void ParamStore::copy_prefix(std::string_view from, std::string_view to) {
  for (const std::string& name : names_with_prefix(from)) {
    std::string target = std::string(to) + name.substr(from.size());
    set(target, at(name));
  }
}

void ParamStore::reset_moments() {
  for (auto& [name, e] : entries_) {
    e.moments.m.fill(0.0);
    e.moments.v.fill(0.0);
    e.moments.step = 0;
  }
}

bool ParamStore::all_finite() const {
  for (const auto& [name, e] : entries_) {
    if (!e.value.all_finite()) return false;
  }
  return true;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || !(a->second.value == b->second.value)) {
      return false;
    }
  }
  return true;
}

}  // namespace wmp::ad
