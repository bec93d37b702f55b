#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "padt/autograd.hpp"
#include "padt/decoder.hpp"
#include "padt/image.hpp"
#include "padt/nn.hpp"
#include "padt/patch_grid.hpp"
#include "padt/rng.hpp"
#include "padt/sequencing.hpp"
#include "padt/vocab.hpp"

namespace padt {

struct ModelConfig {
  int d = 128;        // LM width
  int d_v = 64;       // vision width
  int n_layers = 4;   // LM blocks
  int n_heads = 4;
  int vision_layers = 2;
  int vision_heads = 4;
  int mlp_ratio = 4;
  int image_h = 56;
  int image_w = 56;
  int patch = 14;
  int merge = 2;
  int v_text = Tokenizer::kVText;
  int fvp_rank = 0;  // 0 -> d / 4
  bool use_fvp = true;
  bool use_positional = true;
  int max_seq = 640;  // image prefix + text, upper bound
  DecoderConfig decoder;

  int rank() const { return fvp_rank > 0 ? fvp_rank : d / 4; }
  PatchGrid grid() const { return PatchGrid(image_h, image_w, patch, merge); }
};

// Patch features plus the per-image vocabulary, live on one tape.
struct EncodedImage {
  ag::Value patch_features;  // N' x d
  DynamicVocabulary vocab;
  int rows_merged = 0;
  int cols_merged = 0;
};

struct GenerationResult {
  VrtSequence seq;  // prompt + generated target, EOS included when reached
  ag::Mat hidden;   // ids.size() x d final-layer states at token positions
  bool truncated = false;
};

// Raw patch pixel matrix: n_raw x (patch*patch*3), values scaled to
// [-0.5, 0.5], rows in raster order.
ag::Mat image_to_patches(const Image& img, const PatchGrid& grid);

// The full desk-scale stand-in: patch encoder -> 2x2 merge projector ->
// causal LM over [F_patch; text embeddings] with a weight-tied dynamic
// head, plus the object decoder.
class PadtModel {
 public:
  PadtModel(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ag::ParamStore& params() { return params_; }
  const ag::ParamStore& params() const { return params_; }
  const ObjectDecoder& decoder() const { return decoder_; }

  // Vision tower + merge + prototype projection + vocabulary expansion.
  // Non-const because tape values reference the parameter store for the
  // later backward pass.
  EncodedImage encode(ag::Tape& t, const Image& img);

  // Causal forward over [patch features; embedded ids]. Returns final-layer
  // hidden states at the token positions (ids.size() x d).
  ag::Value forward_hidden(ag::Tape& t, const EncodedImage& enc,
                           const std::vector<int>& ids);

  // Logits for every token position (predicting the next id).
  ag::Value forward_logits(ag::Tape& t, const EncodedImage& enc,
                           ag::Value hidden_tokens);

  // Greedy decoding from [BOS, prompt, SEP]; stops after emitting a stop
  // token (EOS by default) or at max_len generated tokens.
  GenerationResult generate(const Image& img, const std::vector<int>& prompt,
                            Task task, int max_len,
                            const std::vector<int>& stop_tokens = {
                                Tokenizer::kEos});

 private:
  ModelConfig cfg_;
  ag::ParamStore params_;

  nn::Linear patch_embed_;   // patch^2*3 -> d_v
  int pos_raw_ = -1;         // n_raw x d_v
  std::vector<nn::TransformerBlock> vision_blocks_;
  nn::Linear merge_proj_;    // 4*d_v -> d
  int pos_merged_ = -1;      // n_merged x d
  TextEmbedding text_;
  VisualProjector fvp_;
  int pos_tokens_ = -1;      // max_seq x d
  std::vector<nn::TransformerBlock> lm_blocks_;
  nn::LayerNormP final_ln_;
  ObjectDecoder decoder_;
};

// Rows of the token-position hidden matrix that predict each target step
// of the sequence (target step j is predicted from position prompt_len+j-1).
std::vector<int> predictor_rows(const VrtSequence& seq);

}  // namespace padt
