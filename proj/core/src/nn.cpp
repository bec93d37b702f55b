#include "padt/nn.hpp"

#include <cmath>

#include "padt/errors.hpp"

namespace padt::nn {

using ag::Mat;

Mat randn(Rng& rng, int rows, int cols, double std) {
  Mat m(rows, cols);
  // Row-major fill order so a table and its transpose draw differently.
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = std * rng.normal();
  return m;
}

Linear::Linear(ParamStore& ps, const std::string& name, int in, int out,
               Rng& rng, bool bias) {
  const double std = std::sqrt(2.0 / (in + out));
  w = ps.add(name + ".w", randn(rng, in, out, std));
  if (bias) b = ps.add(name + ".b", Mat::Zero(1, out));
}

Value Linear::forward(Tape& t, ParamStore& ps, Value x) const {
  Value y = t.matmul(x, t.param(ps, w));
  if (b >= 0) y = t.add_rowvec(y, t.param(ps, b));
  return y;
}

LayerNormP::LayerNormP(ParamStore& ps, const std::string& name, int d) {
  gamma = ps.add(name + ".g", Mat::Ones(1, d));
  beta = ps.add(name + ".b", Mat::Zero(1, d));
}

Value LayerNormP::forward(Tape& t, ParamStore& ps, Value x) const {
  return t.layer_norm(x, t.param(ps, gamma), t.param(ps, beta));
}

Mha::Mha(ParamStore& ps, const std::string& name, int d, int heads, Rng& rng)
    : n_heads(heads), d_model(d) {
  if (d % heads != 0)
    throw ConfigError("Mha: width " + std::to_string(d) +
                      " not divisible by " + std::to_string(heads) +
                      " heads");
  wq = Linear(ps, name + ".wq", d, d, rng);
  wk = Linear(ps, name + ".wk", d, d, rng);
  wv = Linear(ps, name + ".wv", d, d, rng);
  wo = Linear(ps, name + ".wo", d, d, rng);
}

Value Mha::forward(Tape& t, ParamStore& ps, Value xq, Value xkv,
                   Value attn_bias) const {
  const int dh = d_model / n_heads;
  Value q = wq.forward(t, ps, xq);
  Value k = wk.forward(t, ps, xkv);
  Value v = wv.forward(t, ps, xkv);
  std::vector<Value> heads;
  heads.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    Value qh = t.slice_cols(q, h * dh, dh);
    Value kh = t.slice_cols(k, h * dh, dh);
    Value vh = t.slice_cols(v, h * dh, dh);
    Value scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
    if (attn_bias.valid()) scores = t.add(scores, attn_bias);
    heads.push_back(t.matmul(t.softmax_rows(scores), vh));
  }
  return wo.forward(t, ps, t.concat_cols(heads));
}

Mlp::Mlp(ParamStore& ps, const std::string& name, int d, int hidden,
         Rng& rng) {
  fc1 = Linear(ps, name + ".fc1", d, hidden, rng);
  fc2 = Linear(ps, name + ".fc2", hidden, d, rng);
}

Value Mlp::forward(Tape& t, ParamStore& ps, Value x) const {
  return fc2.forward(t, ps, t.gelu(fc1.forward(t, ps, x)));
}

TransformerBlock::TransformerBlock(ParamStore& ps, const std::string& name,
                                   int d, int heads, int mlp_hidden,
                                   Rng& rng) {
  ln1 = LayerNormP(ps, name + ".ln1", d);
  ln2 = LayerNormP(ps, name + ".ln2", d);
  attn = Mha(ps, name + ".attn", d, heads, rng);
  mlp = Mlp(ps, name + ".mlp", d, mlp_hidden, rng);
}

Value TransformerBlock::forward(Tape& t, ParamStore& ps, Value x,
                                Value attn_bias) const {
  Value h = ln1.forward(t, ps, x);
  x = t.add(x, attn.forward(t, ps, h, h, attn_bias));
  x = t.add(x, mlp.forward(t, ps, ln2.forward(t, ps, x)));
  return x;
}

Mat causal_bias(int T) {
  Mat m = Mat::Zero(T, T);
  for (int r = 0; r < T; ++r)
    for (int c = r + 1; c < T; ++c) m(r, c) = -1e30;
  return m;
}

}  // namespace padt::nn
