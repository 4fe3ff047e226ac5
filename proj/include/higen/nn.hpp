// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "higen/rng.hpp"
#include "higen/tape.hpp"
#include "higen/types.hpp"

namespace higen {

// Named parameter arrays in registration order; the order is the checkpoint
// directory order.
template <typename S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Mat<S> value;
    bool frozen = false;
  };

  int add(const std::string& name, Index rows, Index cols,
          bool frozen = false) {
    require(index_.find(name) == index_.end(),
            "duplicate parameter name: " + name);
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back(Entry{name, Mat<S>::Zero(rows, cols), frozen});
    return static_cast<int>(entries_.size()) - 1;
  }

  int count() const { return static_cast<int>(entries_.size()); }
  Entry& at(int i) { return entries_[i]; }
  const Entry& at(int i) const { return entries_[i]; }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  std::int64_t trainable_size() const {
    std::int64_t n = 0;
    for (const auto& e : entries_)
      if (!e.frozen) n += e.value.size();
    return n;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

// Parameters bound onto a tape for one graph: leaves for trainable entries,
// constants for frozen ones.
template <typename S>
struct Bound {
  std::vector<Val<S>> vals;
  const Val<S>& operator[](int i) const { return vals[i]; }
};

template <typename S>
Bound<S> bind_params(Tape<S>& tape, const ParamStore<S>& store) {
  Bound<S> b;
  b.vals.reserve(store.count());
  for (int i = 0; i < store.count(); ++i) {
    const auto& e = store.at(i);
    b.vals.push_back(e.frozen ? tape.constant(e.value) : tape.leaf(e.value));
  }
  return b;
}

// Pre-LN causal transformer block parameter ids.
struct BlockIds {
  int ln1_g, ln1_b;
  int wq, bq, wk, bk, wv, bv, wo, bo;
  int ln2_g, ln2_b;
  int w1, b1, w2, b2;
};

inline BlockIds register_block(const std::string& prefix, int d_model,
                               int d_ff, auto& store) {
  BlockIds b;
  b.ln1_g = store.add(prefix + ".ln1.g", 1, d_model);
  b.ln1_b = store.add(prefix + ".ln1.b", 1, d_model);
  b.wq = store.add(prefix + ".attn.wq", d_model, d_model);
  b.bq = store.add(prefix + ".attn.bq", 1, d_model);
  b.wk = store.add(prefix + ".attn.wk", d_model, d_model);
  b.bk = store.add(prefix + ".attn.bk", 1, d_model);
  b.wv = store.add(prefix + ".attn.wv", d_model, d_model);
  b.bv = store.add(prefix + ".attn.bv", 1, d_model);
  b.wo = store.add(prefix + ".attn.wo", d_model, d_model);
  b.bo = store.add(prefix + ".attn.bo", 1, d_model);
  b.ln2_g = store.add(prefix + ".ln2.g", 1, d_model);
  b.ln2_b = store.add(prefix + ".ln2.b", 1, d_model);
  b.w1 = store.add(prefix + ".ffn.w1", d_model, d_ff);
  b.b1 = store.add(prefix + ".ffn.b1", 1, d_ff);
  b.w2 = store.add(prefix + ".ffn.w2", d_ff, d_model);
  b.b2 = store.add(prefix + ".ffn.b2", 1, d_model);
  return b;
}

// x + Attn(LN(x)) followed by x + FFN(LN(x)). Attention is causal: position
// t attends to positions <= t only.
template <typename S>
Val<S> causal_block(Tape<S>& tape, const Bound<S>& p, const BlockIds& ids,
                    Val<S> x, int n_heads) {
  using namespace ops;
  const Index d_model = x.v().cols();
  require(d_model % n_heads == 0, "d_model must divide by n_heads");
  const Index d_head = d_model / n_heads;
  const S att_scale = S(1) / std::sqrt(static_cast<S>(d_head));

  Val<S> h = layer_norm_rows(x, p[ids.ln1_g], p[ids.ln1_b]);
  Val<S> q = affine_rows(h, p[ids.wq], p[ids.bq]);
  Val<S> k = affine_rows(h, p[ids.wk], p[ids.bk]);
  Val<S> v = affine_rows(h, p[ids.wv], p[ids.bv]);

  std::vector<Val<S>> heads;
  heads.reserve(n_heads);
  for (int hi = 0; hi < n_heads; ++hi) {
    Val<S> qh = slice_cols(q, hi * d_head, d_head);
    Val<S> kh = slice_cols(k, hi * d_head, d_head);
    Val<S> vh = slice_cols(v, hi * d_head, d_head);
    Val<S> probs = causal_softmax_rows(matmul_nt(qh, kh, att_scale));
    heads.push_back(matmul(probs, vh));
  }
  Val<S> attn = affine_rows(concat_cols(heads), p[ids.wo], p[ids.bo]);
  x = add(x, attn);

  Val<S> h2 = layer_norm_rows(x, p[ids.ln2_g], p[ids.ln2_b]);
  Val<S> f = affine_rows(gelu(affine_rows(h2, p[ids.w1], p[ids.b1])),
                         p[ids.w2], p[ids.b2]);
  return add(x, f);
}

// Gaussian init helpers. Draw streams are keyed by parameter name so the
// init is independent of registration order and scalar type.
inline std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename S>
void init_gaussian(Mat<S>& m, std::uint64_t seed, const std::string& name,
                   double std_dev) {
  Rng rng(mix_seed(seed, name_hash(name)));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      m(r, c) = static_cast<S>(rng.gaussian() * std_dev);
}

}  // namespace higen
