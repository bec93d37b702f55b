#include "padt/decoder.hpp"

#include "padt/errors.hpp"

namespace padt {

TwoWayBlock::TwoWayBlock(ag::ParamStore& ps, const std::string& name, int d,
                         int heads, int mlp_hidden, Rng& rng) {
  self_attn = nn::Mha(ps, name + ".self", d, heads, rng);
  cross_qi = nn::Mha(ps, name + ".q2i", d, heads, rng);
  cross_iq = nn::Mha(ps, name + ".i2q", d, heads, rng);
  mlp = nn::Mlp(ps, name + ".mlp", d, mlp_hidden, rng);
  ln1 = nn::LayerNormP(ps, name + ".ln1", d);
  ln2 = nn::LayerNormP(ps, name + ".ln2", d);
  ln3 = nn::LayerNormP(ps, name + ".ln3", d);
  ln4 = nn::LayerNormP(ps, name + ".ln4", d);
}

std::pair<ag::Value, ag::Value> TwoWayBlock::forward(ag::Tape& t,
                                                     ag::ParamStore& ps,
                                                     ag::Value q,
                                                     ag::Value img) const {
  q = ln1.forward(t, ps, t.add(q, self_attn.forward(t, ps, q, q)));
  q = ln2.forward(t, ps, t.add(q, cross_qi.forward(t, ps, q, img)));
  q = ln3.forward(t, ps, t.add(q, mlp.forward(t, ps, q)));
  img = ln4.forward(t, ps, t.add(img, cross_iq.forward(t, ps, img, q)));
  return {q, img};
}

ObjectDecoder::ObjectDecoder(ag::ParamStore& ps, const std::string& name,
                             const DecoderConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  bbox_tok_ = ps.add(name + ".bbox_tok", nn::randn(rng, 1, cfg.d, 0.02));
  mask_tok_ = ps.add(name + ".mask_tok", nn::randn(rng, 1, cfg.d, 0.02));
  score_tok_ = ps.add(name + ".score_tok", nn::randn(rng, 1, cfg.d, 0.02));
  blocks_.reserve(cfg.n_blocks);
  for (int i = 0; i < cfg.n_blocks; ++i)
    blocks_.emplace_back(ps, name + ".blk" + std::to_string(i), cfg.d,
                         cfg.heads, cfg.mlp_hidden, rng);
  box_head_ = nn::Linear(ps, name + ".box_head", cfg.d, 4, rng);
  score_head_ = nn::Linear(ps, name + ".score_head", cfg.d, 1, rng);
}

StructuredPrediction ObjectDecoder::decode_group(ag::Tape& t,
                                                 ag::ParamStore& ps,
                                                 ag::Value group_hidden,
                                                 ag::Value patch_features,
                                                 int rows_merged,
                                                 int cols_merged) const {
  if (t.rows(group_hidden) < 1)
    throw ShapeError("decode_group: empty object query group");
  if (t.cols(group_hidden) != cfg_.d || t.cols(patch_features) != cfg_.d)
    throw ShapeError("decode_group: width mismatch, decoder d=" +
                     std::to_string(cfg_.d));
  if (t.rows(patch_features) != rows_merged * cols_merged)
    throw ShapeError("decode_group: " +
                     std::to_string(t.rows(patch_features)) +
                     " patch features for a " + std::to_string(rows_merged) +
                     "x" + std::to_string(cols_merged) + " merged grid");

  ag::Value q = t.concat_rows({t.param(ps, bbox_tok_), t.param(ps, mask_tok_),
                               t.param(ps, score_tok_), group_hidden});
  ag::Value img = patch_features;
  for (const auto& blk : blocks_) {
    auto [q2, img2] = blk.forward(t, ps, q, img);
    q = q2;
    img = img2;
  }

  ag::Value box_raw =
      t.sigmoid(box_head_.forward(t, ps, t.slice_rows(q, 0, 1)));
  ag::Value x0 = t.slice_cols(box_raw, 0, 1);
  ag::Value y0 = t.slice_cols(box_raw, 1, 1);
  ag::Value x1 = t.slice_cols(box_raw, 2, 1);
  ag::Value y1 = t.slice_cols(box_raw, 3, 1);
  ag::Value box = t.concat_cols(
      {t.cmin(x0, x1), t.cmin(y0, y1), t.cmax(x0, x1), t.cmax(y0, y1)});

  ag::Value mask_flat = t.matmul_nt(t.slice_rows(q, 1, 1), img);  // 1 x N'
  ag::Value mask_grid = t.reshape_rowmajor(mask_flat, rows_merged, cols_merged);

  StructuredPrediction out;
  out.box = box;
  out.mask_logits = t.bilinear_upsample(mask_grid, cfg_.upsample);
  out.score = t.sigmoid(score_head_.forward(t, ps, t.slice_rows(q, 2, 1)));
  return out;
}

std::vector<StructuredPrediction> ObjectDecoder::decode_all(
    ag::Tape& t, ag::ParamStore& ps, const std::vector<ag::Value>& groups,
    ag::Value patch_features, int rows_merged, int cols_merged) const {
  std::vector<StructuredPrediction> out;
  out.reserve(groups.size());
  for (const auto& g : groups)
    out.push_back(
        decode_group(t, ps, g, patch_features, rows_merged, cols_merged));
  return out;
}

std::vector<StructuredPrediction> ObjectDecoder::decode_all(
    ag::Tape& t, ag::ParamStore& ps,
    const std::vector<ObjectQueryGroup>& groups, ag::Value patch_features,
    int rows_merged, int cols_merged) const {
  std::vector<StructuredPrediction> out;
  out.reserve(groups.size());
  for (const auto& g : groups)
    out.push_back(decode_group(t, ps, t.input(g.hidden), patch_features,
                               rows_merged, cols_merged));
  return out;
}

}  // namespace padt
