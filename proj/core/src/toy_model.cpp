#include "padt/toy_model.hpp"

#include <algorithm>

#include "padt/errors.hpp"

namespace padt {

ag::Mat image_to_patches(const Image& img, const PatchGrid& grid) {
  if (img.height != grid.height() || img.width != grid.width())
    throw DimensionError("image_to_patches: image " +
                         std::to_string(img.height) + "x" +
                         std::to_string(img.width) + " does not match grid " +
                         std::to_string(grid.height()) + "x" +
                         std::to_string(grid.width()));
  const int p = grid.patch();
  ag::Mat out(grid.n_raw(), p * p * 3);
  for (int n = 0; n < grid.n_raw(); ++n) {
    const PixelRect r = grid.raw_patch_rect(n);
    int k = 0;
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) {
        const Rgb c = img.get(x, y);
        out(n, k++) = c.r / 255.0 - 0.5;
        out(n, k++) = c.g / 255.0 - 0.5;
        out(n, k++) = c.b / 255.0 - 0.5;
      }
  }
  return out;
}

PadtModel::PadtModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  const PatchGrid grid = cfg.grid();
  Rng rng(seed);

  patch_embed_ = nn::Linear(params_, "vis.patch_embed", cfg.patch * cfg.patch * 3,
                            cfg.d_v, rng);
  pos_raw_ = params_.add("vis.pos_raw",
                         nn::randn(rng, grid.n_raw(), cfg.d_v, 0.02));
  for (int i = 0; i < cfg.vision_layers; ++i)
    vision_blocks_.emplace_back(params_, "vis.blk" + std::to_string(i),
                                cfg.d_v, cfg.vision_heads,
                                cfg.mlp_ratio * cfg.d_v, rng);
  merge_proj_ = nn::Linear(params_, "vis.merge_proj",
                           cfg.merge * cfg.merge * cfg.d_v, cfg.d, rng);
  pos_merged_ = params_.add("vis.pos_merged",
                            nn::randn(rng, grid.n_merged(), cfg.d, 0.02));
  text_ = TextEmbedding(params_, "lm.text_table", cfg.v_text, cfg.d, rng);
  fvp_ = VisualProjector(params_, "fvp", cfg.d, cfg.rank(), rng);
  pos_tokens_ = params_.add("lm.pos_tokens",
                            nn::randn(rng, cfg.max_seq, cfg.d, 0.02));
  for (int i = 0; i < cfg.n_layers; ++i)
    lm_blocks_.emplace_back(params_, "lm.blk" + std::to_string(i), cfg.d,
                            cfg.n_heads, cfg.mlp_ratio * cfg.d, rng);
  final_ln_ = nn::LayerNormP(params_, "lm.final_ln", cfg.d);
  DecoderConfig dec = cfg.decoder;
  dec.d = cfg.d;
  decoder_ = ObjectDecoder(params_, "dec", dec, rng);
}

EncodedImage PadtModel::encode(ag::Tape& t, const Image& img) {
  const PatchGrid grid = cfg_.grid();
  auto& ps = params_;
  ag::Value x = t.input(image_to_patches(img, grid));
  x = patch_embed_.forward(t, ps, x);
  if (cfg_.use_positional) x = t.add(x, t.param(ps, pos_raw_));
  for (const auto& blk : vision_blocks_) x = blk.forward(t, ps, x);

  // Fuse each merge x merge raw neighborhood, row-major within the block
  // (NW, NE, SW, SE for merge=2), then project to the LM width. One gather
  // per block position keeps the tape small.
  const int m2 = cfg_.merge * cfg_.merge;
  std::vector<std::vector<int>> pos_lists(
      m2, std::vector<int>(grid.n_merged()));
  for (int n = 0; n < grid.n_merged(); ++n) {
    const std::vector<int> raws = grid.raw_indices_of_merged(n);
    for (int k = 0; k < m2; ++k) pos_lists[k][n] = raws[k];
  }
  std::vector<ag::Value> parts;
  parts.reserve(m2);
  for (int k = 0; k < m2; ++k)
    parts.push_back(t.gather_rows(x, pos_lists[k]));
  ag::Value merged = t.concat_cols(parts);  // N' x merge^2*d_v
  ag::Value f_patch = merge_proj_.forward(t, ps, merged);
  if (cfg_.use_positional) f_patch = t.add(f_patch, t.param(ps, pos_merged_));

  ag::Value protos = cfg_.use_fvp ? fvp_.forward(t, ps, f_patch) : f_patch;

  EncodedImage out;
  out.patch_features = f_patch;
  out.vocab = expand_vocabulary(t, t.param(ps, text_.table), protos,
                                cfg_.v_text);
  out.rows_merged = grid.rows_merged();
  out.cols_merged = grid.cols_merged();
  return out;
}

ag::Value PadtModel::forward_hidden(ag::Tape& t, const EncodedImage& enc,
                                    const std::vector<int>& ids) {
  auto& ps = params_;
  const int n_prefix = t.rows(enc.patch_features);
  const int total = n_prefix + static_cast<int>(ids.size());
  if (total > cfg_.max_seq)
    throw IndexError("forward_hidden: sequence of " + std::to_string(total) +
                     " exceeds max_seq " + std::to_string(cfg_.max_seq));
  ag::Value z =
      t.concat_rows({enc.patch_features, vocab_embed(t, enc.vocab, ids)});
  if (cfg_.use_positional)
    z = t.add(z, t.slice_rows(t.param(ps, pos_tokens_), 0, total));
  ag::Value bias = t.input(nn::causal_bias(total));
  for (const auto& blk : lm_blocks_) z = blk.forward(t, ps, z, bias);
  z = final_ln_.forward(t, ps, z);
  return t.slice_rows(z, n_prefix, static_cast<int>(ids.size()));
}

ag::Value PadtModel::forward_logits(ag::Tape& t, const EncodedImage& enc,
                                    ag::Value hidden_tokens) {
  return vocab_logits(t, enc.vocab, hidden_tokens);
}

GenerationResult PadtModel::generate(const Image& img,
                                     const std::vector<int>& prompt, Task task,
                                     int max_len,
                                     const std::vector<int>& stop_tokens) {
  GenerationResult out;
  out.seq.task = task;
  out.seq.v_text = cfg_.v_text;
  out.seq.n_vocab = cfg_.v_text + cfg_.grid().n_merged();
  out.seq.ids = prompt;
  out.seq.prompt_len = static_cast<int>(prompt.size());

  bool stopped = false;
  for (int step = 0; step < max_len && !stopped; ++step) {
    ag::Tape t;
    EncodedImage enc = encode(t, img);
    ag::Value hidden = forward_hidden(t, enc, out.seq.ids);
    ag::Value logits = forward_logits(t, enc, hidden);
    const ag::Mat& l = t.val(logits);
    const int last = static_cast<int>(l.rows()) - 1;
    int best = 0;
    for (int v = 1; v < l.cols(); ++v)
      if (l(last, v) > l(last, best)) best = v;
    out.seq.ids.push_back(best);
    stopped = std::find(stop_tokens.begin(), stop_tokens.end(), best) !=
              stop_tokens.end();
  }
  out.truncated = !stopped;

  // One more pass over the finished sequence collects the hidden states the
  // parser attaches to VRT groups.
  ag::Tape t;
  EncodedImage enc = encode(t, img);
  ag::Value hidden = forward_hidden(t, enc, out.seq.ids);
  out.hidden = t.val(hidden);
  return out;
}

std::vector<int> predictor_rows(const VrtSequence& seq) {
  std::vector<int> rows;
  const int T = static_cast<int>(seq.ids.size()) - seq.prompt_len;
  rows.reserve(T);
  for (int j = 0; j < T; ++j) rows.push_back(seq.prompt_len + j - 1);
  return rows;
}

}  // namespace padt
