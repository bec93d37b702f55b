#pragma once

#include <string>
#include <vector>

#include "padt/autograd.hpp"
#include "padt/rng.hpp"

namespace padt::nn {

using ag::ParamStore;
using ag::Tape;
using ag::Value;

// Modules register their parameters in a ParamStore at construction and keep
// only the indices. forward() must be called with the same store.

struct Linear {
  int w = -1;
  int b = -1;  // -1 when bias-free
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng,
         bool bias = true);
  // x: n x in -> n x out
  Value forward(Tape& t, ParamStore& ps, Value x) const;
};

struct LayerNormP {
  int gamma = -1;
  int beta = -1;
  LayerNormP() = default;
  LayerNormP(ParamStore& ps, const std::string& name, int d);
  Value forward(Tape& t, ParamStore& ps, Value x) const;
};

// Multi-head attention, separate query and key/value streams.
struct Mha {
  int n_heads = 0;
  int d_model = 0;
  Linear wq, wk, wv, wo;
  Mha() = default;
  Mha(ParamStore& ps, const std::string& name, int d, int heads, Rng& rng);
  // xq: Tq x d, xkv: Tk x d; attn_bias (optional, additive Tq x Tk constant)
  // passes Value{} to disable.
  Value forward(Tape& t, ParamStore& ps, Value xq, Value xkv,
                Value attn_bias = Value{}) const;
};

struct Mlp {
  Linear fc1, fc2;
  Mlp() = default;
  Mlp(ParamStore& ps, const std::string& name, int d, int hidden, Rng& rng);
  Value forward(Tape& t, ParamStore& ps, Value x) const;
};

// Pre-norm residual transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
struct TransformerBlock {
  LayerNormP ln1, ln2;
  Mha attn;
  Mlp mlp;
  TransformerBlock() = default;
  TransformerBlock(ParamStore& ps, const std::string& name, int d, int heads,
                   int mlp_hidden, Rng& rng);
  Value forward(Tape& t, ParamStore& ps, Value x,
                Value attn_bias = Value{}) const;
};

// T x T additive causal mask: 0 on and below the diagonal, large negative
// above.
ag::Mat causal_bias(int T);

// N(0, std) matrix draw.
ag::Mat randn(Rng& rng, int rows, int cols, double std);

}  // namespace padt::nn
