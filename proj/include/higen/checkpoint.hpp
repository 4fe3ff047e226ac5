// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container: 8-byte magic, a length-prefixed JSON metadata block
// (config, seeds, step counter, named-array directory with shapes, frozen
// flags and byte offsets), then little-endian float32 arrays in directory
// order, each serialized row-major. Optimizer moments are stored as arrays
// named "opt.m.<param>" / "opt.v.<param>".

#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "higen/config.hpp"
#include "higen/trainer.hpp"
#include "higen/types.hpp"

namespace higen {

inline constexpr char kCheckpointMagic[9] = "HIGENCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointArray {
  std::string name;
  Index rows = 0, cols = 0;
  bool frozen = false;
  std::vector<float> data;  // row-major
};

struct Checkpoint {
  TrainConfig config;
  long step = 0;
  std::vector<CheckpointArray> arrays;

  const CheckpointArray* find(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return &a;
    return nullptr;
  }
};

namespace detail {

template <typename S>
std::vector<float> to_f32(const Mat<S>& m) {
  std::vector<float> out(static_cast<size_t>(m.size()));
  size_t k = 0;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      out[k++] = static_cast<float>(m(r, c));
  return out;
}

template <typename S>
Mat<S> from_f32(const CheckpointArray& a) {
  Mat<S> m(a.rows, a.cols);
  size_t k = 0;
  for (Index r = 0; r < a.rows; ++r)
    for (Index c = 0; c < a.cols; ++c)
      m(r, c) = static_cast<S>(a.data[k++]);
  return m;
}

}  // namespace detail

template <typename S>
Checkpoint make_checkpoint(const Trainer<S>& trainer) {
  Checkpoint ck;
  ck.config = trainer.config();
  ck.step = trainer.step();
  const auto& store = trainer.model().params;
  for (int i = 0; i < store.count(); ++i) {
    const auto& e = store.at(i);
    ck.arrays.push_back({e.name, e.value.rows(), e.value.cols(), e.frozen,
                         detail::to_f32(e.value)});
  }
  for (int i = 0; i < store.count(); ++i) {
    const auto& e = store.at(i);
    if (e.frozen) continue;
    ck.arrays.push_back({"opt.m." + e.name, e.value.rows(), e.value.cols(),
                         false, detail::to_f32(trainer.optimizer().moment1(i))});
    ck.arrays.push_back({"opt.v." + e.name, e.value.rows(), e.value.cols(),
                         false, detail::to_f32(trainer.optimizer().moment2(i))});
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Restores model parameters by name; throws a ShapeError naming the
// parameter on any dimension mismatch.
template <typename S>
void load_into_model(const Checkpoint& ck, Model<S>& model) {
  auto& store = model.params;
  for (int i = 0; i < store.count(); ++i) {
    auto& e = store.at(i);
    const CheckpointArray* a = ck.find(e.name);
    if (!a)
      throw ShapeError("checkpoint is missing parameter " + e.name);
    if (a->rows != e.value.rows() || a->cols != e.value.cols())
      throw ShapeError(
          "checkpoint shape mismatch for " + e.name + ": file has " +
          std::to_string(a->rows) + "x" + std::to_string(a->cols) +
          ", model expects " + std::to_string(e.value.rows()) + "x" +
          std::to_string(e.value.cols()));
    e.value = detail::from_f32<S>(*a);
  }
}

// Rebuilds a model of scalar type S from the checkpoint's stored config.
// float32 arrays convert exactly into both float and double models.
template <typename S>
Model<S> model_from_checkpoint(const Checkpoint& ck) {
  Model<S> model(ck.config.model_config());
  load_into_model(ck, model);
  return model;
}

// Restores a trainer (parameters, optimizer moments, step counter).
template <typename S>
Trainer<S> trainer_from_checkpoint(const Checkpoint& ck) {
  Trainer<S> trainer(ck.config);
  load_into_model(ck, trainer.model());
  auto& store = trainer.model().params;
  for (int i = 0; i < store.count(); ++i) {
    const auto& e = store.at(i);
    if (e.frozen) continue;
    const CheckpointArray* m = ck.find("opt.m." + e.name);
    const CheckpointArray* v = ck.find("opt.v." + e.name);
    if (!m || !v)
      throw ShapeError("checkpoint is missing optimizer state for " + e.name);
    trainer.optimizer().moment1(i) = detail::from_f32<S>(*m);
    trainer.optimizer().moment2(i) = detail::from_f32<S>(*v);
  }
  trainer.optimizer().set_step_count(ck.step);
  trainer.set_step(ck.step);
  return trainer;
}

}  // namespace higen
